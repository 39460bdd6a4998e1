import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import GridMismatch, InvalidGrid, UnknownPotential, ZeroReference
from core.grid import Grid, Signal, dft, idft, l2_norm, rel_error
from core.potentials import BUILTINS, builtin, cosine, hessian_sign_regions


# ========================================================================
# GRID AND SIGNALS
# ========================================================================


class GridTests(SimpleTestCase):

    def test_rejects_odd_or_short_grids(self):
        for L in (7, 9, 6, 0):
            with self.assertRaises(InvalidGrid):
                Grid(L)

    def test_points_and_frequencies(self):
        grid = Grid(8)
        self.assertEqual(grid.spacing, 0.125)
        np.testing.assert_allclose(grid.points, np.arange(8) / 8)
        self.assertEqual(list(grid.frequencies), [-4, -3, -2, -1, 0, 1, 2, 3])

    def test_wrap_gives_minimal_displacement(self):
        np.testing.assert_allclose(Grid.wrap([0.9, -0.7, 0.25, 0.5]), [-0.1, 0.3, 0.25, -0.5])

    def test_signal_length_must_match(self):
        with self.assertRaisesMessage(GridMismatch, 'grid mismatch'):
            Signal(Grid(8), np.zeros(10))

    def test_arithmetic_checks_grids(self):
        with self.assertRaises(GridMismatch):
            Signal.zeros(Grid(8)) + Signal.zeros(Grid(16))

    def test_csv_round_trip(self):
        rng = np.random.default_rng(7)
        s = Signal(Grid(16), rng.normal(size=16) + 1j * rng.normal(size=16))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'signal.csv'
            s.to_csv(path)
            self.assertEqual(path.read_text().splitlines()[0], 'index,real,imag')
            loaded = Signal.from_csv(path)
        np.testing.assert_array_equal(loaded.values, s.values)


class DftTests(SimpleTestCase):

    def test_constant_signal_is_pure_dc(self):
        out = dft(Signal(Grid(8), np.ones(8)))
        expected = np.zeros(8, dtype=complex)
        expected[4] = math.sqrt(8)      # k = 0 sits at index L/2
        np.testing.assert_allclose(out.values, expected, atol=1e-14)

    def test_pure_tone(self):
        grid = Grid(16)
        out = dft(Signal(grid, np.exp(2j * np.pi * np.arange(16) / 16)))
        k1 = list(grid.frequencies).index(1)
        self.assertAlmostEqual(abs(out.values[k1] - 4.0), 0.0, places=12)
        out.values[k1] = 0
        self.assertLess(np.max(np.abs(out.values)), 1e-13)

    def test_unitary_and_invertible(self):
        rng = np.random.default_rng(1)
        s = Signal(Grid(64), rng.normal(size=64) + 1j * rng.normal(size=64))
        out = dft(s)
        self.assertAlmostEqual(np.linalg.norm(out.values) / np.linalg.norm(s.values), 1.0, places=12)
        self.assertLess(rel_error(idft(out), s), 1e-12)


class NormTests(SimpleTestCase):

    def test_unit_constant(self):
        self.assertAlmostEqual(l2_norm(Signal(Grid(32), np.ones(32))), 1.0, places=14)

    def test_rel_error(self):
        rng = np.random.default_rng(3)
        v = Signal(Grid(32), rng.normal(size=32) + 1j * rng.normal(size=32))
        self.assertEqual(rel_error(v, v), 0.0)
        self.assertAlmostEqual(rel_error(v * 1.01, v), 0.01, delta=1e-12)

    def test_zero_reference(self):
        grid = Grid(8)
        with self.assertRaisesMessage(ZeroReference, 'zero reference'):
            rel_error(Signal(grid, np.ones(8)), Signal.zeros(grid))

    def test_gaussian_quadrature(self):
        hbar = 1.0 / (512.0 * math.pi)
        g = Signal.from_function(
            Grid(1024),
            lambda x: (math.pi * hbar) ** -0.25 * np.exp(-(x - 0.5) ** 2 / (2.0 * hbar)))
        self.assertAlmostEqual(l2_norm(g), 1.0, delta=1e-6)


# ========================================================================
# POTENTIALS
# ========================================================================


class PotentialTests(SimpleTestCase):

    def test_well_values(self):
        well = builtin('well')
        self.assertAlmostEqual(float(well.v(0.5)), -1.0, places=14)
        self.assertAlmostEqual(float(well.dv(0.5)), 0.0, places=12)
        self.assertAlmostEqual(float(well.d2v(0.5)), 4 * math.pi ** 2, places=10)

    def test_hill_values(self):
        hill = builtin('hill')
        self.assertAlmostEqual(float(hill.v(0.5)), 1.0, places=14)
        self.assertAlmostEqual(float(hill.d2v(0.5)), -4 * math.pi ** 2, places=10)

    def test_hill_well_formula(self):
        x = np.linspace(0, 1, 11)
        np.testing.assert_allclose(builtin('hill_well').v(x),
                                   10 + np.sin(2 * np.pi * (x + 0.5)), atol=1e-13)

    def test_free_is_zero(self):
        free = builtin('free')
        x = np.linspace(0, 1, 7)
        for fn in (free.v, free.dv, free.d2v):
            np.testing.assert_array_equal(fn(x), np.zeros(7))
        self.assertTrue(free.quadratic)

    def test_derivatives_match_finite_differences(self):
        x = np.linspace(0, 1, 101)
        h = 1e-5
        for name in BUILTINS:
            V = builtin(name)
            with self.subTest(potential=name):
                np.testing.assert_allclose((V.v(x + h) - V.v(x - h)) / (2 * h), V.dv(x), atol=1e-6)
                np.testing.assert_allclose((V.dv(x + h) - V.dv(x - h)) / (2 * h), V.d2v(x), atol=1e-6)

    def test_periodic_builtins(self):
        x = np.linspace(0, 1, 50)
        for name in ('free', 'well', 'hill', 'hill_well'):
            V = builtin(name)
            with self.subTest(potential=name):
                self.assertTrue(V.periodic)
                np.testing.assert_allclose(V.v(x + 1), V.v(x), atol=1e-12)

    def test_parameters_override_defaults(self):
        V = builtin('hill', amplitude=2.0)
        self.assertEqual(V.params['shift'], 0.5)
        self.assertAlmostEqual(float(V.v(0.0)), -2.0)

    def test_unknown_name(self):
        with self.assertRaisesMessage(UnknownPotential, "unknown potential 'quartic'"):
            builtin('quartic')


class HessianRegionTests(SimpleTestCase):

    def assertRegions(self, regions, expected):
        self.assertEqual(len(regions), len(expected))
        for region, (start, end, sign) in zip(regions, expected):
            self.assertAlmostEqual(region.start, start, places=10)
            self.assertAlmostEqual(region.end, end, places=10)
            self.assertEqual(region.sign, sign)

    def test_well_is_convex_in_the_middle(self):
        self.assertRegions(hessian_sign_regions(builtin('well')),
                           [(0, 0.25, -1), (0.25, 0.75, 1), (0.75, 1, -1)])

    def test_hill_is_concave_in_the_middle(self):
        self.assertRegions(hessian_sign_regions(builtin('hill')),
                           [(0, 0.25, 1), (0.25, 0.75, -1), (0.75, 1, 1)])

    def test_hill_well(self):
        self.assertRegions(hessian_sign_regions(builtin('hill_well')),
                           [(0, 0.5, 1), (0.5, 1, -1)])

    def test_boundaries_between_samples_are_refined(self):
        # sign change at x = 0.3, not on the sampling lattice
        V = cosine(shift=0.25 - 0.3)
        regions = hessian_sign_regions(V, resolution=16)
        self.assertAlmostEqual(regions[0].end, 0.3, places=12)

    def test_free_has_one_zero_region(self):
        self.assertRegions(hessian_sign_regions(builtin('free')), [(0, 1, 0)])

    def test_resolution_floor(self):
        with self.assertRaises(ValueError):
            hessian_sign_regions(builtin('well'), resolution=8)
