# core/grid.py

from dataclasses import dataclass
from functools import cached_property
import logging

import numpy as np
from scipy import fft

from core.exceptions import GridMismatch, InvalidGrid, ZeroReference

logger = logging.getLogger(__name__)


# ========================================================================
# GRID -- periodic unit interval sampled at x_l = l / L
# ========================================================================


@dataclass(frozen=True)
class Grid:
    L: int

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 8 or self.L % 2:
            raise InvalidGrid(f'L must be an even integer >= 8, got {self.L}')

    @property
    def spacing(self):
        return 1.0 / self.L

    @cached_property
    def points(self):
        return np.arange(self.L) / self.L

    @cached_property
    def frequencies(self):
        """Integer cycles per unit interval, -L/2 .. L/2-1"""
        return np.arange(-self.L // 2, self.L // 2)

    @staticmethod
    def wrap(displacement):
        """Periodic displacement of minimal absolute value, in [-1/2, 1/2)"""
        return np.mod(np.asarray(displacement) + 0.5, 1.0) - 0.5

    def displacement(self, center):
        return self.wrap(self.points - center)


# ========================================================================
# SIGNAL -- complex samples on a Grid
# ========================================================================


@dataclass(frozen=True, eq=False)
class Signal:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != (self.grid.L,):
            raise GridMismatch(
                f'grid mismatch: {values.shape} samples for L={self.grid.L}')
        # frozen dataclass -- bypass __setattr__ for the coerced copy
        object.__setattr__(self, 'values', values)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.L, dtype=np.complex128))

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, fn(grid.points))

    def _check(self, other):
        if self.grid != other.grid:
            raise GridMismatch()

    def __add__(self, other):
        self._check(other)
        return Signal(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return Signal(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return Signal(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return Signal(self.grid, -self.values)

    def shifted(self, samples):
        """Circular translate by an integer number of samples"""
        return Signal(self.grid, np.roll(self.values, samples))

    def to_csv(self, path):
        table = np.column_stack([
            np.arange(self.grid.L), self.values.real, self.values.imag])
        np.savetxt(path, table, delimiter=',', header='index,real,imag',
                   comments='', fmt=['%d', '%.17g', '%.17g'])

    @classmethod
    def from_csv(cls, path):
        table = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
        return cls(Grid(len(table)), table[:, 1] + 1j * table[:, 2])


# ========================================================================
# DFT AND NORMS
# ========================================================================


def dft(s):
    """
    Unitary DFT, output ordered as Grid.frequencies (k = -L/2 .. L/2-1)

    output_k = L^{-1/2} sum_l s_l exp(-2 pi i k l / L)
    """
    return Signal(s.grid, fft.fftshift(fft.fft(s.values, norm='ortho')))


def idft(s):
    """Inverse of dft; expects frequency-ordered input"""
    return Signal(s.grid, fft.ifft(fft.ifftshift(s.values), norm='ortho'))


def l2_norm(s):
    """Continuum-consistent quadrature (L^{-1} sum |s_l|^2)^{1/2}"""
    return float(np.sqrt(np.mean(np.abs(s.values) ** 2)))


def rel_error(u, v):
    """Relative L2 error of u against the reference v"""
    u._check(v)
    reference = l2_norm(v)
    if reference == 0.0:
        raise ZeroReference()
    return l2_norm(u - v) / reference
