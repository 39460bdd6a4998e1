# frames/gabor.py
"""
Discrete Gabor analysis and synthesis on the periodic unit interval.

Conventions (phase-locked, indices periodic mod L):

    analysis   c(m, n) = sum_l f(l) conj(w(l - a n)) exp(-2 pi i (l - a n) m / M)
    synthesis  f(l)    = sum_{m,n} c(m, n) w(l - a n) exp(2 pi i (l - a n) m / M)

The transform sums are unnormalised; Signal norms elsewhere use the
continuum quadrature of core.grid.
"""

from dataclasses import dataclass
from functools import cached_property
import logging
import math

import numpy as np
from scipy import fft
from scipy.sparse.linalg import LinearOperator, cg, eigsh

from core.exceptions import GridMismatch, NotAFrame, WindowNotPeriodizable
from core.grid import Grid, Signal

logger = logging.getLogger(__name__)

# dense eigensolve below this length, Lanczos above
DENSE_LIMIT = 256
PERIODIZATION_TOL = 1e-12


# ========================================================================
# LATTICE
# ========================================================================


@dataclass(frozen=True)
class GaborLattice:
    a: int          # time shift in samples
    M: int          # number of channels
    L: int          # signal length
    hbar: float

    def __post_init__(self):
        if self.a <= 0 or self.M <= 0:
            raise ValueError(f'a and M must be positive, got a={self.a}, M={self.M}')
        if self.L % self.a or self.L % self.M:
            raise ValueError(
                f'a={self.a} and M={self.M} must both divide L={self.L}')
        if self.hbar <= 0:
            raise ValueError(f'hbar must be positive, got {self.hbar}')

    @cached_property
    def grid(self):
        return Grid(self.L)

    @property
    def h(self):
        return 2.0 * math.pi * self.hbar

    @property
    def N(self):
        """Number of time positions L / a"""
        return self.L // self.a

    @property
    def n_atoms(self):
        return self.N * self.M

    @property
    def redundancy(self):
        return self.M / self.a

    @property
    def density(self):
        """alpha * beta of the unscaled lattice; < 1 means oversampled"""
        return self.a / self.M

    @property
    def is_oversampled(self):
        return self.M > self.a

    @property
    def alpha(self):
        return self.a / (self.L * math.sqrt(self.h))

    @property
    def beta(self):
        return math.sqrt(self.h) * self.L / self.M

    # symmetric index ranges n in (-N/2, N/2], m in (-M/2, M/2]

    def signed_time(self, n):
        n = np.asarray(n)
        return np.where(n > self.N // 2, n - self.N, n)

    def signed_channel(self, m):
        m = np.asarray(m)
        return np.where(m > self.M // 2, m - self.M, m)

    def position(self, n):
        """x_0 = a n / L"""
        return self.a * np.asarray(n) / self.L

    def momentum(self, m):
        """p_0 = 2 pi hbar m L / M"""
        return 2.0 * math.pi * self.hbar * np.asarray(m) * self.L / self.M

    def __str__(self):
        return f'a={self.a}, M={self.M}, L={self.L}, hbar={self.hbar:.6g}'


# ========================================================================
# COEFFICIENTS
# ========================================================================


@dataclass(frozen=True, eq=False)
class CoefficientGrid:
    values: np.ndarray      # shape (M, N), m = frequency, n = time
    lattice: GaborLattice

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        expected = (self.lattice.M, self.lattice.N)
        if values.shape != expected:
            raise GridMismatch(f'coefficient grid {values.shape} != {expected}')
        object.__setattr__(self, 'values', values)

    @classmethod
    def zeros(cls, lattice):
        return cls(np.zeros((lattice.M, lattice.N), dtype=np.complex128), lattice)

    @classmethod
    def single(cls, lattice, m, n, value=1.0):
        c = cls.zeros(lattice)
        c.values[m % lattice.M, n % lattice.N] = value
        return c

    @property
    def energy(self):
        return float(np.sum(np.abs(self.values) ** 2))

    def support(self):
        """(m, n) pairs with non-zero coefficients, ordered n-major then m"""
        m, n = np.nonzero(self.values.T)[::-1]
        return np.column_stack([m, n])

    def to_csv(self, path):
        # row-major with m fastest
        n_idx, m_idx = np.meshgrid(np.arange(self.lattice.N),
                                   np.arange(self.lattice.M), indexing='ij')
        flat = self.values.T.ravel()
        table = np.column_stack([m_idx.ravel(), n_idx.ravel(), flat.real, flat.imag])
        np.savetxt(path, table, delimiter=',', header='m,n,real,imag',
                   comments='', fmt=['%d', '%d', '%.17g', '%.17g'])


# ========================================================================
# WINDOWS
# ========================================================================


def gaussian_window(lattice):
    """
    Dilated Gaussian (pi hbar)^{-1/4} exp(-x^2 / (2 hbar)), periodized and
    normalised to unit discrete l2 norm.
    """
    tail = math.exp(-1.0 / (8.0 * lattice.hbar))
    if tail >= PERIODIZATION_TOL:
        raise WindowNotPeriodizable(
            f'window not numerically periodizable: hbar={lattice.hbar:.4g} '
            f'leaves {tail:.2e} at half period')

    grid = lattice.grid
    d = grid.wrap(grid.points)
    images = np.arange(-1, 2)[:, None]
    g = np.sum(np.exp(-(d[None, :] + images) ** 2 / (2.0 * lattice.hbar)), axis=0)
    g *= (math.pi * lattice.hbar) ** -0.25
    g /= np.linalg.norm(g)
    return Signal(grid, g)


def unscaled_window(lattice):
    """
    Standard Gaussian 2^{1/4} exp(-pi u^2) sampled on the dilated grid
    u_l = l / (L h^{1/2}), i.e. the window of the unscaled frame that the
    hbar-frame is obtained from.
    """
    scale = math.sqrt(lattice.h)
    period = 1.0 / scale
    u = lattice.grid.points / scale
    u = np.mod(u + period / 2, period) - period / 2
    images = np.arange(-1, 2)[:, None] * period
    g = 2 ** 0.25 * np.sum(np.exp(-math.pi * (u[None, :] + images) ** 2), axis=0)
    g /= np.linalg.norm(g)
    return Signal(lattice.grid, g)


# ========================================================================
# DGT / IDGT
# ========================================================================


def _time_shift_indices(lattice):
    # (N, L) table of (a n + j) mod L
    n = np.arange(lattice.N)[:, None]
    j = np.arange(lattice.L)[None, :]
    return (lattice.a * n + j) % lattice.L


def dgt(f, window, lattice):
    """Phase-locked DGT of f against an arbitrary window, shape (M, N)"""
    if f.grid.L != lattice.L or window.grid.L != lattice.L:
        raise GridMismatch()
    # u[n, j] = f(a n + j) conj(w(j)), then fold j mod M and FFT over the fold
    u = f.values[_time_shift_indices(lattice)] * np.conj(window.values)[None, :]
    folded = u.reshape(lattice.N, lattice.L // lattice.M, lattice.M).sum(axis=1)
    return CoefficientGrid(fft.fft(folded, axis=1).T, lattice)


def idgt(c, window, lattice):
    """Inverse of dgt's sum structure: sum of coefficient * shifted window atoms"""
    if c.lattice != lattice:
        raise GridMismatch('coefficient lattice does not match')
    if window.grid.L != lattice.L:
        raise GridMismatch()
    # v[n, j] = sum_m c(m, n) exp(2 pi i j m / M), periodic in j with period M
    v = lattice.M * fft.ifft(c.values.T, axis=1)
    v = np.tile(v, (1, lattice.L // lattice.M)) * window.values[None, :]
    out = np.zeros(lattice.L, dtype=np.complex128)
    np.add.at(out, _time_shift_indices(lattice).ravel(), v.ravel())
    return Signal(lattice.grid, out)


# ========================================================================
# FRAME OPERATOR
# ========================================================================


def walnut_coefficients(g, lattice):
    """
    Frame operator in Walnut form: (S f)(l) = sum_k W[k, l] f(l + k M), with
    W[k, l] = M sum_n g(l - a n) conj(g(l + k M - a n)), k = 0 .. L/M - 1.
    """
    L, M = lattice.L, lattice.M
    l = np.arange(L)[None, :]
    n = np.arange(lattice.N)[:, None]
    shifted = g.values[(l - lattice.a * n) % L]
    W = np.empty((L // M, L), dtype=np.complex128)
    for k in range(L // M):
        W[k] = M * np.sum(shifted * np.conj(np.roll(shifted, -k * M, axis=1)), axis=0)
    return W


def frame_operator(g, lattice):
    """S as a scipy LinearOperator (Hermitian, positive semi-definite)"""
    W = walnut_coefficients(g, lattice)
    M = lattice.M

    def matvec(f):
        f = np.asarray(f).ravel()
        return sum(W[k] * np.roll(f, -k * M) for k in range(W.shape[0]))

    return LinearOperator((lattice.L, lattice.L), matvec=matvec, rmatvec=matvec,
                          dtype=np.complex128)


def atom_matrix(g, lattice):
    """Dense (M*N, L) matrix whose rows are the atoms g_{m,n}; row index m + M n"""
    L, M = lattice.L, lattice.M
    l = np.arange(L)
    rows = np.empty((lattice.N * M, L), dtype=np.complex128)
    for n in range(lattice.N):
        shifted = g.values[(l - lattice.a * n) % L]
        rel = (l - lattice.a * n) % L
        for m in range(M):
            rows[m + M * n] = shifted * np.exp(2j * np.pi * rel * m / M)
    return rows


def dense_frame_operator(g, lattice):
    """S assembled from its Walnut bands, (L, L)"""
    W = walnut_coefficients(g, lattice)
    l = np.arange(lattice.L)
    S = np.zeros((lattice.L, lattice.L), dtype=np.complex128)
    for k in range(W.shape[0]):
        S[l, (l + k * lattice.M) % lattice.L] = W[k]
    return S


def frame_bounds(g, lattice, method='auto'):
    """
    Optimal frame constants (a_lo, b_hi) = extreme eigenvalues of S.

    Args:
        g: window Signal
        lattice: GaborLattice
        method: 'dense' (eigvalsh, small L), 'iterative' (Lanczos with
            tol 1e-10; a_lo from the shifted operator b_hi I - S) or 'auto'

    Returns:
        (a_lo, b_hi) as floats; a_lo may be ~0 for non-frames
    """
    if method == 'auto':
        method = 'dense' if lattice.L <= DENSE_LIMIT else 'iterative'

    if method == 'dense':
        eigenvalues = np.linalg.eigvalsh(dense_frame_operator(g, lattice))
        return float(max(eigenvalues[0], 0.0)), float(eigenvalues[-1])

    if method != 'iterative':
        raise ValueError(f'unknown method {method!r}')

    S = frame_operator(g, lattice)
    v0 = np.ones(lattice.L, dtype=np.complex128)
    b_hi = float(eigsh(S, k=1, which='LA', tol=1e-10, v0=v0,
                       return_eigenvectors=False)[0].real)
    shifted = LinearOperator(S.shape, matvec=lambda f: b_hi * np.ravel(f) - S.matvec(f),
                             dtype=np.complex128)
    top = float(eigsh(shifted, k=1, which='LA', tol=1e-10, v0=v0,
                      return_eigenvectors=False)[0].real)
    a_lo = max(b_hi - top, 0.0)
    logger.debug(f'Frame bounds for {lattice}: a_lo={a_lo:.6g}, b_hi={b_hi:.6g}')
    return a_lo, b_hi


def dual_window(g, lattice, method='auto'):
    """
    Canonical dual gamma = S^{-1} g, solved by conjugate gradients.

    Raises NotAFrame when the lattice has fewer atoms than samples or the
    estimated lower frame bound vanishes.
    """
    if lattice.n_atoms < lattice.L:
        raise NotAFrame(
            f'not a frame: {lattice.n_atoms} atoms for {lattice.L} samples ({lattice})')

    a_lo, b_hi = frame_bounds(g, lattice, method=method)
    if a_lo <= 1e-10 * b_hi:
        raise NotAFrame(f'not a frame: a_lo/b_hi = {a_lo / b_hi:.2e} ({lattice})')

    S = frame_operator(g, lattice)
    gamma, info = cg(S, g.values, rtol=1e-13, atol=0.0, maxiter=10 * lattice.L)
    if info != 0:
        logger.warning(f'CG for dual window did not converge (info={info}) on {lattice}')
    logger.info(f'Dual window ready for {lattice}, condition {b_hi / a_lo:.4g}')
    return Signal(g.grid, gamma)


# ========================================================================
# GABOR SYSTEM
# ========================================================================


@dataclass(frozen=True, eq=False)
class GaborSystem:
    lattice: GaborLattice
    window: Signal
    dual: Signal

    @classmethod
    def build(cls, lattice, window=None):
        """Gaussian window by default; the dual is computed once here"""
        window = gaussian_window(lattice) if window is None else window
        return cls(lattice, window, dual_window(window, lattice))

    @property
    def grid(self):
        return self.lattice.grid


def analyze(f, sys, against='dual'):
    """
    Phase-locked coefficients of f against the dual window (default) or
    the primary window (against='primary')
    """
    if f.grid.L != sys.lattice.L:
        raise GridMismatch()
    window = sys.dual if against == 'dual' else sys.window
    return dgt(f, window, sys.lattice)


def synth(c, sys, using='primary'):
    """Sum of coefficients times atoms of the primary window (default) or the dual"""
    window = sys.window if using == 'primary' else sys.dual
    return idgt(c, window, sys.lattice)


def threshold(c, eta):
    """
    Keep |c| > eta.

    Returns:
        (thresholded CoefficientGrid, (K, 2) int array of retained (m, n))
    """
    if eta < 0:
        raise ValueError(f'eta must be non-negative, got {eta}')
    keep = np.abs(c.values) > eta
    kept = CoefficientGrid(np.where(keep, c.values, 0.0), c.lattice)
    return kept, kept.support()
