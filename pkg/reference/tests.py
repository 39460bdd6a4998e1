import math

import numpy as np
from django.test import SimpleTestCase, tag

from core.grid import Grid, Signal, l2_norm, rel_error
from core.potentials import builtin, cosine
from reference.strang import (
    StrangConfig, estimate_error, self_convergence, solve, solve_at, solve_backward, step,
)
from scenarios.datum import cosh_phase_datum

HBAR = 1.0 / (256 * math.pi)


def plane_wave(grid, k):
    return Signal(grid, np.exp(2j * np.pi * k * grid.points))


class StepTests(SimpleTestCase):

    def test_plane_wave_picks_up_kinetic_phase(self):
        grid = Grid(64)
        cfg = StrangConfig(1e-3, 1, HBAR, builtin('free'))
        u = step(plane_wave(grid, 3), cfg)
        phase = np.exp(-0.5j * HBAR * (2 * np.pi * 3) ** 2 * 1e-3)
        np.testing.assert_allclose(u.values, plane_wave(grid, 3).values * phase, atol=1e-13)

    def test_constant_potential_adds_uniform_phase(self):
        grid = Grid(64)
        cfg = StrangConfig(1e-3, 1, HBAR, cosine(amplitude=0.0, offset=2.5))
        u = step(plane_wave(grid, -5), cfg)
        phase = (np.exp(-1j * 2.5 * 1e-3 / HBAR)
                 * np.exp(-0.5j * HBAR * (2 * np.pi * 5) ** 2 * 1e-3))
        np.testing.assert_allclose(u.values, plane_wave(grid, -5).values * phase, atol=1e-12)


class HorizonTests(SimpleTestCase):

    def test_dt_is_rounded_to_hit_the_horizon(self):
        cfg = StrangConfig.for_horizon(1.0, 0.3, HBAR, builtin('well'))
        self.assertEqual(cfg.steps, 4)
        self.assertAlmostEqual(cfg.horizon, 1.0, places=15)
        self.assertLessEqual(cfg.dt, 0.3)

    def test_exact_multiple(self):
        self.assertEqual(StrangConfig.for_horizon(1.0, 1e-4, HBAR, builtin('well')).steps, 10000)

    def test_negative_horizon_runs_backwards(self):
        cfg = StrangConfig.for_horizon(-0.5, 0.1, HBAR, builtin('well'))
        self.assertEqual(cfg.steps, 5)
        self.assertLess(cfg.dt, 0)

    def test_invalid_steps(self):
        with self.assertRaises(ValueError):
            StrangConfig.for_horizon(1.0, 0.0, HBAR, builtin('well'))
        with self.assertRaises(ValueError):
            StrangConfig.for_horizon(0.1, 0.5, HBAR, builtin('well'))

    def test_zero_horizon_returns_datum(self):
        u0 = cosh_phase_datum(Grid(64), HBAR)
        self.assertIs(solve(u0, builtin('well'), 0.0, 0.1, HBAR), u0)


class SolveTests(SimpleTestCase):

    def test_norm_is_conserved(self):
        u0 = cosh_phase_datum(Grid(256), HBAR)
        u = solve(u0, builtin('well'), 1.0, 1e-4, HBAR)
        self.assertAlmostEqual(l2_norm(u), l2_norm(u0), delta=1e-10 * l2_norm(u0))

    def test_free_gaussian_closed_form(self):
        grid = Grid(1024)
        s = 0.05

        def exact(t):
            return Signal(grid, (1 + 1j * HBAR * t / s ** 2) ** -0.5
                          * np.exp(-(grid.points - 0.5) ** 2 / (2 * (s ** 2 + 1j * HBAR * t))))

        u = solve(exact(0.0), builtin('free'), 0.5, 0.1, HBAR)
        self.assertLess(rel_error(u, exact(0.5)), 1e-10)

    def test_time_reversal(self):
        u0 = cosh_phase_datum(Grid(256), HBAR)
        forward = solve(u0, builtin('hill'), 0.5, 1e-3, HBAR)
        back = solve_backward(forward, builtin('hill'), 0.5, 1e-3, HBAR)
        self.assertLess(rel_error(back, u0), 1e-8)

    def test_solve_at_matches_solve(self):
        u0 = cosh_phase_datum(Grid(256), HBAR)
        V = builtin('well')
        states = solve_at(u0, V, (0.2, 0.0, 0.1), 1e-3, HBAR)
        self.assertEqual(sorted(states), [0.0, 0.1, 0.2])
        self.assertIs(states[0.0], u0)
        self.assertLess(rel_error(states[0.2], solve(u0, V, 0.2, 1e-3, HBAR)), 1e-10)

    def test_negative_output_time(self):
        with self.assertRaises(ValueError):
            solve_at(cosh_phase_datum(Grid(64), HBAR), builtin('well'), (-0.1, 0.5), 1e-3, HBAR)

    def test_error_estimate_is_small(self):
        u0 = cosh_phase_datum(Grid(256), HBAR)
        self.assertLess(estimate_error(u0, builtin('well'), 0.1, 1e-4, HBAR), 1e-3)


class ConvergenceTests(SimpleTestCase):

    @tag('slow')
    def test_second_order_self_convergence(self):
        u0 = cosh_phase_datum(Grid(1024), HBAR)
        result = self_convergence(u0, builtin('well'), 0.5, 4e-4, HBAR)
        self.assertGreaterEqual(result.ratio, 3.2)
        self.assertLessEqual(result.ratio, 4.8)

    @tag('slow')
    def test_norm_drift_over_ten_thousand_steps(self):
        u0 = cosh_phase_datum(Grid(1024), HBAR)
        u = solve(u0, builtin('hill_well'), 1.0, 1e-4, HBAR)
        self.assertLess(abs(l2_norm(u) - l2_norm(u0)) / l2_norm(u0), 1e-10)
