import math
import tempfile
from pathlib import Path
from types import SimpleNamespace
from unittest import mock

import numpy as np
from django.test import SimpleTestCase, tag

from beams.dynamics import (
    BeamEnsemble, BeamState, BeamTrajectory, _track_branches, advance, gamma,
    initial_state, propagate, propagate_backward,
)
from beams.propagator import (
    ReinitPolicy, duhamel_order_probe, evolve, threshold_error_bound,
)
from beams.synthesis import amplitude, evaluate_beam, evaluate_ensemble, support_radius
from core.exceptions import (
    FocalPoint, IndexOutOfRange, PropagationError, SimulationError, StiffOrSingular,
)
from core.grid import Grid, Signal, l2_norm, rel_error
from core.potentials import BUILTINS, builtin, harmonic_local
from frames.gabor import GaborLattice, GaborSystem, analyze, frame_bounds, threshold
from reference.strang import solve

HBAR = 1.0 / (256 * math.pi)
EXAMPLE_LATTICE = GaborLattice(8, 256, 1024, HBAR)


def small_system(hbar=HBAR):
    return GaborSystem.build(GaborLattice(4, 64, 256, hbar))


def coherent_datum(grid, hbar, p=0.05, center=0.5, width=0.1):
    x = grid.points
    return Signal(grid, np.exp(-(x - center) ** 2 / (2 * width ** 2)) * np.exp(1j * p * x / hbar))


def random_signal(grid, seed):
    rng = np.random.default_rng(seed)
    return Signal(grid, rng.normal(size=grid.L) + 1j * rng.normal(size=grid.L))


def beam(x, p, delta=0.0, t=0.0):
    return BeamState(t, x, p, 1.0 + 0.0j, 1.0j, delta)


# ========================================================================
# BEAM STATES
# ========================================================================


class InitialStateTests(SimpleTestCase):

    def test_origin_atom(self):
        s = initial_state(0, 0, EXAMPLE_LATTICE)
        self.assertEqual((s.t, s.x, s.p, s.M, s.N, s.delta, s.branch),
                         (0.0, 0.0, 0.0, 1.0, 1.0j, 0.0, 0))
        self.assertEqual(s.gamma, 1.0j)

    def test_position_and_momentum(self):
        s = initial_state(64, 1, EXAMPLE_LATTICE)
        self.assertAlmostEqual(s.x, 0.5)
        self.assertAlmostEqual(s.p, 1.0 / 32, places=14)

    def test_phase_locking(self):
        for n, m in [(1, 1), (-5, 17), (64, -127), (33, 128)]:
            s = initial_state(n, m, EXAMPLE_LATTICE)
            self.assertAlmostEqual(s.delta - s.x * s.p / 2, 0.0, places=14)

    def test_indices_outside_symmetric_ranges(self):
        with self.assertRaises(IndexOutOfRange):
            initial_state(65, 0, EXAMPLE_LATTICE)
        with self.assertRaises(IndexOutOfRange):
            initial_state(0, -128, EXAMPLE_LATTICE)

    def test_ensemble_matches_single_states(self):
        index = np.array([[0, 0], [255, 127], [17, 3], [128, 64]])
        ensemble = BeamEnsemble.from_lattice(EXAMPLE_LATTICE, index)
        for i, (m, n) in enumerate([(0, 0), (-1, -1), (17, 3), (128, 64)]):
            self.assertEqual(ensemble.state(i), initial_state(n, m, EXAMPLE_LATTICE))

    def test_focal_point(self):
        with self.assertRaisesMessage(FocalPoint, 'focal point'):
            gamma(BeamState(0.0, 0.0, 0.0, 0j, 1j, 0.0))


class PropagateTests(SimpleTestCase):

    def test_free_particle_closed_form(self):
        s0 = BeamState(0.0, 0.2, 0.5, 1.0 + 0j, 1j, 0.05)
        final = propagate(s0, builtin('free'), 1.0).final
        self.assertAlmostEqual(final.t, 1.0)
        self.assertAlmostEqual(final.x, 0.7, delta=1e-8)
        self.assertAlmostEqual(final.p, 0.5, delta=1e-8)
        self.assertAlmostEqual(abs(final.M - (1 + 1j)), 0.0, delta=1e-8)
        self.assertAlmostEqual(abs(final.N - 1j), 0.0, delta=1e-8)
        self.assertAlmostEqual(final.delta, 0.175, delta=1e-8)
        self.assertAlmostEqual(abs(final.gamma - (1 + 1j) / 2), 0.0, delta=1e-8)

    def test_harmonic_winding_flips_amplitude_sign(self):
        V = harmonic_local(omega=1.0, center=0.5)
        final = propagate(beam(0.5, 0.0), V, 2 * math.pi, tol=1e-10).final
        self.assertAlmostEqual(abs(final.M - 1.0), 0.0, delta=1e-8)
        self.assertEqual(final.branch, 1)
        a = amplitude(final, HBAR).value
        self.assertAlmostEqual(abs(a + (math.pi * HBAR) ** -0.25), 0.0,
                               delta=1e-6 * (math.pi * HBAR) ** -0.25)

    def test_harmonic_closed_form_and_tolerance(self):
        V = harmonic_local()
        errors = []
        for tol in (1e-6, 1e-10):
            final = propagate(beam(0.6, 0.0), V, 1.0, tol=tol).final
            expected = np.array([0.6, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0])
            errors.append(np.max(np.abs(final.as_vector() - expected)))
            self.assertLess(errors[-1], 1e3 * tol)
        self.assertLess(errors[1], errors[0])

    def test_width_event_on_hill_top(self):
        trajectory = propagate(beam(0.5, 0.0), builtin('hill'), 1.0, width_event=0.05)
        self.assertIsNotNone(trajectory.event)
        self.assertEqual(trajectory.event.reason, 'beam spreading')
        self.assertTrue(0.3 < trajectory.event.time < 0.4)
        self.assertAlmostEqual(trajectory.final.t, trajectory.event.time)
        self.assertAlmostEqual(trajectory.final.width, 0.05, delta=1e-6)

    def test_no_event_above_threshold(self):
        trajectory = propagate(beam(0.5, 0.0), builtin('hill'), 0.2, width_event=0.01)
        self.assertIsNone(trajectory.event)
        self.assertAlmostEqual(trajectory.final.t, 0.2)

    def test_width_event_matches_plain_integration(self):
        # the event function sees the same potential as the flow
        V = builtin('well')
        plain = propagate(beam(0.3, 0.4), V, 0.3, tol=1e-10).final
        watched = propagate(beam(0.3, 0.4), V, 0.3, tol=1e-10, width_event=1e-3)
        self.assertIsNone(watched.event)
        np.testing.assert_allclose(watched.final.as_vector(), plain.as_vector(), atol=1e-8)

    def test_time_reversal(self):
        s0 = initial_state(20, 9, EXAMPLE_LATTICE)
        forward = propagate(s0, builtin('well'), 1.0, tol=1e-10).final
        back = propagate_backward(forward, builtin('well'), 1.0, tol=1e-10)
        self.assertAlmostEqual(back.t, 0.0)
        np.testing.assert_allclose(back.as_vector(), s0.as_vector(), atol=1e-6)
        self.assertEqual(back.branch, s0.branch)

    def test_tolerance_range(self):
        with self.assertRaises(ValueError):
            propagate(beam(0.5, 0.0), builtin('free'), 1.0, tol=1e-3)
        with self.assertRaises(ValueError):
            propagate(beam(0.5, 0.0), builtin('free'), 0.0)

    def test_branch_tracking(self):
        theta = np.linspace(0.0, 2.5 * np.pi, 100)
        branches = _track_branches(np.exp(1j * theta), 0)
        self.assertEqual(branches[0], 0)
        self.assertEqual(branches[-1], 1)

    def test_trajectory_csv(self):
        trajectory = propagate(beam(0.5, 0.1), builtin('well'), 0.1)
        self.assertIsInstance(trajectory, BeamTrajectory)
        self.assertEqual(trajectory.times[0], 0.0)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'trajectory.csv'
            trajectory.to_csv(path)
            lines = path.read_text().splitlines()
        self.assertEqual(lines[0], 't,x,p,ReM,ImM,ReN,ImN,delta,branch')
        self.assertEqual(len(lines), 1 + len(trajectory.samples))


class InvariantTests(SimpleTestCase):
    """Conservation laws along randomly chosen atoms"""

    def check_cases(self, count, seed):
        rng = np.random.default_rng(seed)
        names = sorted(BUILTINS)
        grid = Grid(1024)
        normed = 0
        for case in range(count):
            name = names[case % len(names)]
            V = builtin(name)
            n = int(rng.integers(-63, 65))
            m = int(rng.integers(-31, 33))
            t_end = float(rng.uniform(0.1, 2.0))
            s0 = initial_state(n, m, EXAMPLE_LATTICE)
            trajectory = propagate(s0, V, t_end, tol=1e-10)
            final = trajectory.final
            with self.subTest(potential=name, n=n, m=m, t=t_end):
                for s in trajectory.samples:
                    scale = max(1.0, abs(s.M) * abs(s.N))
                    self.assertLess(abs(s.wronskian - 2j), 1e-8 * scale)
                    self.assertLess(abs(s.width * abs(s.M) ** 2 - 1.0), 1e-8 * scale)
                    self.assertLess(abs(s.energy(V) - s0.energy(V)), 1e-7)

                phases = [amplitude(s, HBAR).phase for s in trajectory.samples]
                self.assertLess(np.max(np.abs(np.diff(phases))), np.pi / 2)

                # below 0.08 the half-period support cut shows; above 400 the grid does
                if 0.08 <= final.width <= 400:
                    normed += 1
                    values = evaluate_beam(final, 1.0, HBAR, grid)
                    self.assertAlmostEqual(l2_norm(values), 1.0, delta=1e-6)
        return normed

    def test_invariants(self):
        self.assertGreater(self.check_cases(20, seed=0), 0)

    @tag('slow')
    def test_invariants_many_cases(self):
        self.assertGreater(self.check_cases(200, seed=1), 100)


# ========================================================================
# ENSEMBLES
# ========================================================================


class EnsembleTests(SimpleTestCase):

    def setUp(self):
        rng = np.random.default_rng(5)
        index = np.column_stack([rng.integers(0, 256, 8), rng.integers(0, 128, 8)])
        self.ensemble = BeamEnsemble.from_lattice(EXAMPLE_LATTICE, index)

    def test_advance_matches_single_beams(self):
        V = builtin('well')
        advanced, event = advance(self.ensemble, V, 0.5, tol=1e-10)
        self.assertIsNone(event)
        self.assertEqual(advanced.t, 0.5)
        for i in range(len(self.ensemble)):
            single = propagate(self.ensemble.state(i), V, 0.5, tol=1e-10).final
            np.testing.assert_allclose(advanced.state(i).as_vector(), single.as_vector(),
                                       atol=1e-7)
            self.assertEqual(advanced.state(i).branch, single.branch)

    def test_chunks_and_concat(self):
        parts = self.ensemble.chunks(3)
        self.assertEqual([len(p) for p in parts], [3, 3, 2])
        joined = BeamEnsemble.concat(parts)
        np.testing.assert_array_equal(joined.x, self.ensemble.x)
        np.testing.assert_array_equal(joined.index, self.ensemble.index)

    def test_matrix_round_trip(self):
        y = self.ensemble.as_matrix()
        same = self.ensemble.with_matrix(0.0, y, self.ensemble.branch)
        np.testing.assert_array_equal(same.M, self.ensemble.M)
        np.testing.assert_array_equal(same.delta, self.ensemble.delta)

    def test_event_names_the_spreading_beam(self):
        ensemble = BeamEnsemble.from_lattice(EXAMPLE_LATTICE, [[0, 0], [0, 64]])
        advanced, event = advance(ensemble, builtin('hill'), 1.0, width_event=0.05)
        self.assertIsNotNone(event)
        self.assertEqual(event.index, (0, 64))
        self.assertAlmostEqual(advanced.t, event.time)
        self.assertAlmostEqual(float(np.min(advanced.width)), 0.05, delta=1e-6)

    def test_failure_is_attributed_to_a_beam(self):
        failed = SimpleNamespace(status=-1, message='step size underflow',
                                 t=np.array([0.0]), y=np.zeros((7, 1)), t_events=None)
        with mock.patch('beams.dynamics.solve_ivp', return_value=failed):
            with self.assertRaises(PropagationError) as ctx:
                advance(self.ensemble, builtin('well'), 1.0)
        self.assertEqual(ctx.exception.index, tuple(int(v) for v in self.ensemble.index[0]))
        self.assertIsInstance(ctx.exception.cause, StiffOrSingular)


# ========================================================================
# SYNTHESIS
# ========================================================================


class AmplitudeTests(SimpleTestCase):

    def test_initial_amplitude(self):
        a = amplitude(beam(0.5, 0.0), HBAR)
        self.assertAlmostEqual(a.modulus, (math.pi * HBAR) ** -0.25)
        self.assertEqual(a.phase, 0.0)

    def test_square_root_of_free_spreading(self):
        s = BeamState(1.0, 0.5, 0.0, 1 + 1j, 1j, 0.0)
        a = amplitude(s, HBAR)
        self.assertAlmostEqual(a.modulus, (math.pi * HBAR) ** -0.25 * 2 ** -0.25)
        self.assertAlmostEqual(a.phase, -math.pi / 8)
        self.assertAlmostEqual(a.modulus ** 2 * abs(s.M), (math.pi * HBAR) ** -0.5)

    def test_branch_selects_sheet(self):
        s = BeamState(0.0, 0.5, 0.0, 1 + 0j, 1j, 0.0, branch=1)
        self.assertAlmostEqual(abs(amplitude(s, HBAR).value + (math.pi * HBAR) ** -0.25), 0.0)

    def test_support_radius(self):
        self.assertEqual(float(support_radius(1.0, 1.0)), 0.5)
        self.assertAlmostEqual(float(support_radius(1.0, HBAR)), 8 * math.sqrt(HBAR))


class EvaluateTests(SimpleTestCase):

    def setUp(self):
        self.grid = Grid(1024)

    def test_initial_beam_is_normalised_gaussian(self):
        values = evaluate_beam(beam(0.5, 0.0), 1.0, HBAR, self.grid).values
        d = self.grid.points - 0.5
        expected = (math.pi * HBAR) ** -0.25 * np.exp(-d ** 2 / (2 * HBAR))
        np.testing.assert_allclose(values, expected, atol=1e-12)
        self.assertAlmostEqual(l2_norm(Signal(self.grid, values)), 1.0, delta=1e-6)

    def test_free_spreading_widens_by_sqrt_two(self):
        def spread(s):
            density = np.abs(evaluate_beam(s, 1.0, HBAR, self.grid).values) ** 2
            d = self.grid.displacement(0.5)
            mean = np.sum(d * density) / np.sum(density)
            return mean, math.sqrt(np.sum((d - mean) ** 2 * density) / np.sum(density))

        s0 = beam(0.5, 0.0)
        s1 = propagate(s0, builtin('free'), 1.0).final
        mean0, std0 = spread(s0)
        mean1, std1 = spread(s1)
        self.assertAlmostEqual(mean1, mean0, delta=1e-10)
        self.assertAlmostEqual(std1 / std0, math.sqrt(2), delta=1e-6 * math.sqrt(2))

    def test_norm_across_widths(self):
        # M = r, N = i / r keeps the Wronskian at 2i with Im Gamma = 1 / r^2
        for r in (0.05, 0.2, 1.0, 2.0, 3.5):
            with self.subTest(width=1 / r ** 2):
                s = BeamState(0.0, 0.3, 0.2, complex(r, 0.0), 1j / r, 0.0)
                self.assertAlmostEqual(abs(s.wronskian - 2j), 0.0, delta=1e-14)
                values = evaluate_beam(s, 1.0, HBAR, self.grid)
                self.assertAlmostEqual(l2_norm(values), 1.0, delta=1e-6)

    def test_beam_wraps_around_the_period(self):
        values = evaluate_beam(beam(0.0, 0.0), 1.0, HBAR, self.grid).values
        self.assertAlmostEqual(abs(values[1]), abs(values[-1]), places=12)

    def test_ensemble_is_sum_of_beams(self):
        rng = np.random.default_rng(9)
        index = np.column_stack([rng.integers(0, 256, 5), rng.integers(0, 128, 5)])
        ensemble, _ = advance(BeamEnsemble.from_lattice(EXAMPLE_LATTICE, index),
                              builtin('well'), 0.3)
        weights = rng.normal(size=5) + 1j * rng.normal(size=5)
        total = evaluate_ensemble(ensemble, weights, HBAR, self.grid, chunk_size=2)
        expected = sum((evaluate_beam(ensemble.state(i), weights[i], HBAR, self.grid)
                        for i in range(1, 5)),
                       evaluate_beam(ensemble.state(0), weights[0], HBAR, self.grid))
        self.assertLess(rel_error(total, expected), 1e-12)

    def test_weight_count_must_match(self):
        ensemble = BeamEnsemble.from_lattice(EXAMPLE_LATTICE, [[0, 0]])
        with self.assertRaises(ValueError):
            evaluate_ensemble(ensemble, [1.0, 2.0], HBAR, self.grid)

    def test_empty_ensemble(self):
        ensemble = BeamEnsemble.from_lattice(EXAMPLE_LATTICE, np.zeros((0, 2), dtype=int))
        out = evaluate_ensemble(ensemble, [], HBAR, self.grid)
        self.assertEqual(np.count_nonzero(out.values), 0)

    def test_quadratic_potentials_are_exact(self):
        for V, t_end in ((builtin('free'), 0.5), (harmonic_local(), 0.3)):
            with self.subTest(potential=V.name):
                s0 = beam(0.5, 0.25)
                u0 = evaluate_beam(s0, 1.0, HBAR, self.grid)
                final = propagate(s0, V, t_end).final
                u_ref = solve(u0, V, t_end, 1e-4, HBAR)
                self.assertLess(rel_error(evaluate_beam(final, 1.0, HBAR, self.grid), u_ref), 1e-5)


# ========================================================================
# PARAMETRIX
# ========================================================================


class ReinitPolicyTests(SimpleTestCase):

    def test_parse(self):
        self.assertEqual(ReinitPolicy.parse('none'), ReinitPolicy())
        self.assertEqual(ReinitPolicy.parse('uniform:4'), ReinitPolicy('uniform', segments=4))
        self.assertEqual(ReinitPolicy.parse(' Event:0.3 '), ReinitPolicy('event', width=0.3))
        self.assertEqual(ReinitPolicy.parse('event', default_width=0.2),
                         ReinitPolicy('event', width=0.2))

    def test_malformed(self):
        for text in ('uniform:x', 'uniform:0', 'event', 'event:1.5', 'sometimes'):
            with self.subTest(text=text):
                with self.assertRaises(ValueError):
                    ReinitPolicy.parse(text)

    def test_boundaries(self):
        self.assertEqual(ReinitPolicy('uniform', segments=4).boundaries(2.0),
                         [0.0, 0.5, 1.0, 1.5, 2.0])
        self.assertEqual(ReinitPolicy().boundaries(1.0), [0.0, 1.0])

    def test_str_parses_back(self):
        for text in ('none', 'uniform:8', 'event:0.2'):
            self.assertEqual(str(ReinitPolicy.parse(text)), text)


class EvolveTests(SimpleTestCase):

    def setUp(self):
        self.sys = small_system()
        self.f0 = coherent_datum(self.sys.grid, HBAR)

    def test_full_expansion_reproduces_datum(self):
        run = evolve(self.f0, self.sys, builtin('well'), 0.05, 0.0)
        self.assertLess(rel_error(run.output_at(0.0), self.f0), 1e-8)
        self.assertGreater(run.segments[0].retained, self.sys.lattice.n_atoms // 2)

    def test_threshold_error_bound_at_start(self):
        c = analyze(self.f0, self.sys)
        eta = 1e-3 * np.max(np.abs(c.values))
        kept, _ = threshold(c, eta)
        _, b_hi = frame_bounds(self.sys.window, self.sys.lattice)
        run = evolve(self.f0, self.sys, builtin('well'), 0.05, eta)
        bound = threshold_error_bound(c, kept, self.f0, b_hi)
        self.assertGreater(bound, 0.0)
        self.assertLessEqual(rel_error(run.output_at(0.0), self.f0), bound + 1e-8)
        self.assertLess(run.segments[0].retained, self.sys.lattice.n_atoms)

    def test_free_particle_matches_reference(self):
        V = builtin('free')
        eta = 1e-6 * np.max(np.abs(analyze(self.f0, self.sys).values))
        run = evolve(self.f0, self.sys, V, 0.5, eta)
        reconstruction = rel_error(run.output_at(0.0), self.f0)
        u_ref = solve(self.f0, V, 0.5, 0.01, HBAR)
        self.assertLess(rel_error(run.output_at(0.5), u_ref), 2 * reconstruction + 1e-5)

    def test_linearity(self):
        V = builtin('well')
        f, g = random_signal(self.sys.grid, 1), random_signal(self.sys.grid, 2)
        alpha, beta = 0.7 - 0.2j, 1.3j
        combined = evolve(f * alpha + g * beta, self.sys, V, 0.05, 0.0).final
        separate = (evolve(f, self.sys, V, 0.05, 0.0).final * alpha
                    + evolve(g, self.sys, V, 0.05, 0.0).final * beta)
        self.assertLess(rel_error(combined, separate), 1e-8)

    def test_output_times(self):
        run = evolve(self.f0, self.sys, builtin('well'), 0.1, 1e-3,
                     output_times=(0.0, 0.05, 0.1))
        self.assertEqual(sorted(run.outputs), [0.0, 0.05, 0.1])
        self.assertIs(run.final, run.outputs[0.1])
        run.output_at(0.05)
        with self.assertRaises(KeyError):
            run.output_at(0.07)
        self.assertEqual(set(run.timings), {'analysis', 'beams', 'synthesis', 'total'})

    def test_threads_do_not_change_the_result(self):
        V = builtin('hill')
        serial = evolve(self.f0, self.sys, V, 0.1, 1e-3, chunk_size=64).final
        pooled = evolve(self.f0, self.sys, V, 0.1, 1e-3, chunk_size=64, threads=3).final
        np.testing.assert_array_equal(pooled.values, serial.values)

    def test_uniform_reinit_on_free_particle(self):
        V = builtin('free')
        eta = 1e-3 * np.max(np.abs(analyze(self.f0, self.sys).values))
        single = evolve(self.f0, self.sys, V, 0.4, eta)
        restarted = evolve(self.f0, self.sys, V, 0.4, eta,
                           reinit=ReinitPolicy('uniform', segments=4))
        np.testing.assert_allclose(restarted.boundaries, [0.0, 0.1, 0.2, 0.3, 0.4])
        self.assertEqual(len(restarted.segments), 4)

        _, b_hi = frame_bounds(self.sys.window, self.sys.lattice)
        discarded = sum(math.sqrt(b_hi * seg.discarded_energy) for seg in restarted.segments)
        discrete = math.sqrt(self.sys.grid.L)
        difference = l2_norm(restarted.final - single.final) * discrete
        self.assertLessEqual(difference, discarded + 1e-5 * l2_norm(single.final) * discrete)
        self.assertLessEqual(restarted.norm_bound_ratio(), 1.1 * math.sqrt(b_hi))

    def test_event_reinit_on_free_particle(self):
        # Im Gamma = 1 / (1 + s^2) for a free beam started s time units ago
        run = evolve(self.f0, self.sys, builtin('free'), 2.5, 1e-2,
                     reinit=ReinitPolicy('event', width=0.5))
        np.testing.assert_allclose(run.boundaries, [0.0, 1.0, 2.0, 2.5], atol=1e-6)
        self.assertIsNotNone(run.segments[0].event)
        self.assertEqual(len(run.segments[0].event.index), 2)
        self.assertIsNone(run.segments[-1].event)

    def test_segment_cap(self):
        with self.assertRaisesMessage(SimulationError, 'within 2 segments'):
            evolve(self.f0, self.sys, builtin('free'), 2.5, 1e-2,
                   reinit=ReinitPolicy('event', width=0.5), max_segments=2)

    def test_nothing_above_threshold(self):
        with self.assertLogs('beams.propagator', level='WARNING') as logs:
            run = evolve(self.f0, self.sys, builtin('well'), 0.1, 1e6)
        self.assertIn('No coefficient above', logs.output[0])
        self.assertEqual(np.count_nonzero(run.final.values), 0)
        self.assertEqual(run.segments[0].retained, 0)

    def test_empty_later_segment_keeps_the_boundary_output(self):
        etas = []

        def empty_after_first(c, eta):
            etas.append(eta)
            return threshold(c, eta if len(etas) == 1 else 1e6)

        with mock.patch('beams.propagator.threshold', side_effect=empty_after_first):
            with self.assertLogs('beams.propagator', level='WARNING'):
                run = evolve(self.f0, self.sys, builtin('free'), 0.1, 0.0,
                             reinit=ReinitPolicy('uniform', segments=2),
                             output_times=(0.0, 0.05, 0.1))
        self.assertEqual(len(run.segments), 2)
        self.assertGreater(l2_norm(run.output_at(0.05)), 0.5 * l2_norm(self.f0))
        self.assertEqual(np.count_nonzero(run.output_at(0.1).values), 0)

    def test_argument_checks(self):
        for kwargs in ({'T': 0.0, 'eta': 0.1}, {'T': 1.0, 'eta': -0.1},
                       {'T': 1.0, 'eta': 0.1, 'output_times': (0.5, 2.0)}):
            with self.subTest(**{k: str(v) for k, v in kwargs.items()}):
                with self.assertRaises(ValueError):
                    evolve(self.f0, self.sys, builtin('well'), **kwargs)


class OrderProbeTests(SimpleTestCase):

    @staticmethod
    def setup(hbar):
        sys = small_system(hbar)
        return sys, coherent_datum(sys.grid, hbar)

    @staticmethod
    def reference(f0, potential, T, hbar):
        return solve(f0, potential, T, 0.01, hbar)

    def test_ladder_checks(self):
        with self.assertRaises(ValueError):
            duhamel_order_probe(builtin('well'), self.setup, 0.1, (HBAR, HBAR / 2), self.reference)
        with self.assertRaises(ValueError):
            duhamel_order_probe(builtin('well'), self.setup, 0.1, (HBAR, HBAR / 2, HBAR / 3),
                                self.reference)

    def test_quadratic_potential_is_degenerate(self):
        hbars = (HBAR, HBAR / 2, HBAR / 4)
        with self.assertLogs('beams.propagator', level='WARNING') as logs:
            probe = duhamel_order_probe(builtin('free'), self.setup, 0.2, hbars, self.reference,
                                        eta=1e-8)
        self.assertTrue(probe.degenerate)
        self.assertIn('quadratic', probe.reason)
        self.assertIn('Degenerate order fit', logs.output[-1])
        self.assertEqual(probe.hbars, hbars)
        self.assertEqual(len(probe.errors), 3)
        self.assertTrue(all(e < 1e-4 for e in probe.errors))

    def test_reference_floor_is_reported(self):
        hbars = (HBAR, HBAR / 2, HBAR / 4)
        probe = duhamel_order_probe(builtin('well'), self.setup, 0.05, hbars, self.reference,
                                    eta=1e-4, floor=lambda *args: 1.0)
        self.assertTrue(probe.degenerate)
        self.assertIn('reference floor', probe.reason)
