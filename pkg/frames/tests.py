import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import GridMismatch, NotAFrame, WindowNotPeriodizable
from core.grid import Signal, rel_error
from frames.gabor import (
    CoefficientGrid, GaborLattice, GaborSystem, analyze, atom_matrix,
    dense_frame_operator, dual_window, frame_bounds, gaussian_window,
    synth, threshold, unscaled_window,
)

SMALL_HBAR = 0.004


def random_signal(grid, seed):
    rng = np.random.default_rng(seed)
    return Signal(grid, rng.normal(size=grid.L) + 1j * rng.normal(size=grid.L))


# ========================================================================
# LATTICE AND WINDOWS
# ========================================================================


class LatticeTests(SimpleTestCase):

    def test_preset_geometry(self):
        lattice = GaborLattice(8, 256, 1024, 1.0 / (256 * math.pi))
        self.assertEqual(lattice.N, 128)
        self.assertEqual(lattice.n_atoms, 32768)
        self.assertEqual(lattice.redundancy, 32)
        self.assertTrue(lattice.is_oversampled)
        self.assertAlmostEqual(lattice.alpha * lattice.beta, lattice.density, places=14)
        self.assertAlmostEqual(float(lattice.position(64)), 0.5)
        self.assertAlmostEqual(float(lattice.momentum(1)), 1.0 / 32, places=14)

    def test_signed_indices(self):
        lattice = GaborLattice(2, 8, 16, SMALL_HBAR)
        self.assertEqual(list(lattice.signed_time([0, 4, 5, 7])), [0, 4, -3, -1])
        self.assertEqual(list(lattice.signed_channel([0, 4, 5, 7])), [0, 4, -3, -1])

    def test_shifts_must_divide_length(self):
        with self.assertRaises(ValueError):
            GaborLattice(3, 8, 16, SMALL_HBAR)
        with self.assertRaises(ValueError):
            GaborLattice(2, 8, 16, 0.0)


class WindowTests(SimpleTestCase):

    def test_gaussian_window_shape(self):
        lattice = GaborLattice(8, 256, 1024, 1.0 / (512 * math.pi))
        g = gaussian_window(lattice).values
        self.assertEqual(int(np.argmax(np.abs(g))), 0)
        self.assertAlmostEqual(np.linalg.norm(g), 1.0, places=12)
        np.testing.assert_allclose(g[1:], g[1:][::-1], rtol=1e-12)
        self.assertLess(np.max(np.abs(g.imag)), 1e-15)
        self.assertTrue(np.all(g.real > 0))

    def test_wide_window_is_rejected(self):
        with self.assertRaisesMessage(WindowNotPeriodizable, 'not numerically periodizable'):
            GaborSystem.build(GaborLattice(2, 8, 16, 10.0))

    def test_unscaled_window_matches_dilated_gaussian(self):
        lattice = GaborLattice(4, 32, 64, SMALL_HBAR)
        np.testing.assert_allclose(unscaled_window(lattice).values,
                                   gaussian_window(lattice).values, atol=1e-13)

    def test_rescaled_analysis(self):
        # on a uniform periodic grid the dilation only relabels sample
        # coordinates; the hbar frame and the unscaled frame give the same coefficients
        lattice = GaborLattice(4, 32, 64, SMALL_HBAR)
        sys = GaborSystem.build(lattice)
        unscaled = GaborSystem.build(lattice, window=unscaled_window(lattice))
        f = random_signal(lattice.grid, 11)
        expected = analyze(f, sys).values
        actual = analyze(f, unscaled).values
        self.assertLess(np.linalg.norm(actual - expected) / np.linalg.norm(expected), 1e-10)
        self.assertAlmostEqual(lattice.alpha * lattice.beta, lattice.density)


# ========================================================================
# TRANSFORMS
# ========================================================================


class TransformTests(SimpleTestCase):

    def setUp(self):
        self.lattice = GaborLattice(2, 8, 16, SMALL_HBAR)
        self.sys = GaborSystem.build(self.lattice)

    def test_analysis_matches_atom_matrix(self):
        f = random_signal(self.lattice.grid, 0)
        atoms = atom_matrix(self.sys.dual, self.lattice)
        c = analyze(f, self.sys)
        np.testing.assert_allclose(c.values.T.ravel(), atoms.conj() @ f.values, atol=1e-12)

    def test_synthesis_matches_atom_matrix(self):
        rng = np.random.default_rng(1)
        c = CoefficientGrid(rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)), self.lattice)
        atoms = atom_matrix(self.sys.window, self.lattice)
        np.testing.assert_allclose(synth(c, self.sys).values, atoms.T @ c.values.T.ravel(),
                                   atol=1e-12)

    def test_frame_operator_from_atoms(self):
        atoms = atom_matrix(self.sys.window, self.lattice)
        np.testing.assert_allclose(dense_frame_operator(self.sys.window, self.lattice),
                                   atoms.T @ atoms.conj(), atol=1e-12)

    def test_round_trip(self):
        f = random_signal(self.lattice.grid, 2)
        self.assertLess(rel_error(synth(analyze(f, self.sys), self.sys), f), 1e-10)

    def test_window_against_its_dual(self):
        c = analyze(self.sys.window, self.sys)
        self.assertAlmostEqual(abs(c.values[0, 0] - self.lattice.a / self.lattice.M), 0.0,
                               places=10)

    def test_unit_impulse(self):
        impulse = np.zeros(16)
        impulse[0] = 1.0
        c = analyze(Signal(self.lattice.grid, impulse), self.sys)
        gamma = self.sys.dual.values
        a, M = self.lattice.a, self.lattice.M
        for m in range(M):
            for n in range(self.lattice.N):
                expected = np.conj(gamma[(-a * n) % 16]) * np.exp(2j * np.pi * a * n * m / M)
                self.assertAlmostEqual(abs(c.values[m, n] - expected), 0.0, places=12)

    def test_single_coefficient_synthesizes_window(self):
        c = CoefficientGrid.single(self.lattice, 0, 0)
        np.testing.assert_allclose(synth(c, self.sys).values, self.sys.window.values, atol=1e-14)
        zero = synth(CoefficientGrid.zeros(self.lattice), self.sys)
        self.assertEqual(np.count_nonzero(zero.values), 0)

    def test_time_shift_covariance(self):
        f = random_signal(self.lattice.grid, 3)
        c = analyze(f, self.sys).values
        shifted = analyze(f.shifted(self.lattice.a), self.sys).values
        np.testing.assert_allclose(shifted, np.roll(c, 1, axis=1), atol=1e-12)

    def test_modulation_covariance(self):
        f = random_signal(self.lattice.grid, 4)
        tone = np.exp(2j * np.pi * np.arange(16) / self.lattice.M)
        c = np.abs(analyze(f, self.sys).values)
        modulated = np.abs(analyze(Signal(f.grid, f.values * tone), self.sys).values)
        np.testing.assert_allclose(modulated, np.roll(c, 1, axis=0), atol=1e-12)

    def test_lattice_mismatch(self):
        other = GaborSystem.build(GaborLattice(2, 8, 32, SMALL_HBAR))
        with self.assertRaises(GridMismatch):
            analyze(random_signal(self.lattice.grid, 5), other)


# ========================================================================
# FRAME BOUNDS AND DUALS
# ========================================================================


class FrameBoundTests(SimpleTestCase):

    def test_full_short_time_fourier_transform_is_tight(self):
        lattice = GaborLattice(1, 16, 16, SMALL_HBAR)
        g = gaussian_window(lattice)
        a_lo, b_hi = frame_bounds(g, lattice)
        self.assertAlmostEqual(a_lo, 16.0, places=10)
        self.assertAlmostEqual(b_hi, 16.0, places=10)
        np.testing.assert_allclose(dual_window(g, lattice).values, g.values / 16, atol=1e-13)

    def test_dual_of_tight_dual_is_window(self):
        lattice = GaborLattice(1, 16, 16, SMALL_HBAR)
        g = gaussian_window(lattice)
        np.testing.assert_allclose(dual_window(dual_window(g, lattice), lattice).values,
                                   g.values, atol=1e-12)

    def test_dense_and_iterative_agree(self):
        lattice = GaborLattice(2, 16, 32, SMALL_HBAR)
        g = gaussian_window(lattice)
        dense = frame_bounds(g, lattice, method='dense')
        iterative = frame_bounds(g, lattice, method='iterative')
        np.testing.assert_allclose(iterative, dense, atol=1e-6)
        self.assertGreater(dense[0] / dense[1], 1e-3)

    def test_undersampled_lattice_is_not_a_frame(self):
        lattice = GaborLattice(8, 4, 32, SMALL_HBAR)
        g = gaussian_window(lattice)
        a_lo, b_hi = frame_bounds(g, lattice, method='dense')
        self.assertLess(a_lo / b_hi, 1e-6)
        with self.assertRaisesMessage(NotAFrame, 'not a frame'):
            dual_window(g, lattice)

    def test_lattice_just_above_critical_density(self):
        lattice = GaborLattice(6, 5, 60, SMALL_HBAR)
        self.assertAlmostEqual(lattice.density, 1.2)
        a_lo, b_hi = frame_bounds(gaussian_window(lattice), lattice, method='dense')
        self.assertLess(a_lo / b_hi, 1e-6)

    def test_unknown_method(self):
        lattice = GaborLattice(2, 8, 16, SMALL_HBAR)
        with self.assertRaises(ValueError):
            frame_bounds(gaussian_window(lattice), lattice, method='lanczos')

    def test_dual_solves_frame_equation(self):
        lattice = GaborLattice(4, 32, 64, SMALL_HBAR)
        g = gaussian_window(lattice)
        expected = np.linalg.solve(dense_frame_operator(g, lattice), g.values)
        np.testing.assert_allclose(dual_window(g, lattice).values, expected, atol=1e-10)

    def test_coefficient_energy_within_bounds(self):
        lattice = GaborLattice(4, 32, 64, SMALL_HBAR)
        sys = GaborSystem.build(lattice)
        a_lo, b_hi = frame_bounds(sys.window, lattice)
        for seed in range(5):
            f = random_signal(lattice.grid, seed)
            energy = analyze(f, sys, against='primary').energy
            norm2 = float(np.sum(np.abs(f.values) ** 2))
            self.assertGreaterEqual(energy, a_lo * norm2 * (1 - 1e-10))
            self.assertLessEqual(energy, b_hi * norm2 * (1 + 1e-10))


# ========================================================================
# THRESHOLDING AND EXPORT
# ========================================================================


class ThresholdTests(SimpleTestCase):

    def setUp(self):
        self.lattice = GaborLattice(2, 8, 16, SMALL_HBAR)
        self.sys = GaborSystem.build(self.lattice)
        self.c = analyze(random_signal(self.lattice.grid, 6), self.sys)

    def test_zero_threshold_keeps_everything(self):
        kept, support = threshold(self.c, 0.0)
        np.testing.assert_array_equal(kept.values, self.c.values)
        self.assertEqual(support.shape, (self.lattice.n_atoms, 2))

    def test_large_threshold_keeps_nothing(self):
        kept, support = threshold(self.c, np.max(np.abs(self.c.values)))
        self.assertEqual(support.shape, (0, 2))
        self.assertEqual(kept.energy, 0.0)

    def test_support_is_time_major(self):
        kept, support = threshold(self.c, 0.0)
        self.assertEqual(tuple(support[0]), (0, 0))
        self.assertEqual(tuple(support[1]), (1, 0))
        self.assertEqual(tuple(support[8]), (0, 1))

    def test_negative_threshold(self):
        with self.assertRaises(ValueError):
            threshold(self.c, -1.0)

    def test_csv_layout(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'coeffs.csv'
            self.c.to_csv(path)
            lines = path.read_text().splitlines()
        self.assertEqual(lines[0], 'm,n,real,imag')
        self.assertEqual(len(lines), 1 + self.lattice.n_atoms)
        self.assertTrue(lines[2].startswith('1,0,'))
