# scenarios/datum.py

import logging

import numpy as np

from core.grid import Signal
from frames.gabor import CoefficientGrid, synth

logger = logging.getLogger(__name__)

WINDOW_SIGMA = 200.0
WINDOW_CENTER = 0.5


def action(x):
    """tau_0(x) = -(1/5) log(exp(5 (x - 1/2)) + exp(-5 (x - 1/2)))"""
    s = 5.0 * (np.asarray(x) - 0.5)
    return -np.logaddexp(s, -s) / 5.0


def cosh_phase_datum(grid, hbar):
    """u_0(x) = exp(-25 (x - 1/2)^2) exp(i tau_0(x) / hbar); not normalised"""
    x = grid.points
    return Signal(grid, np.exp(-25.0 * (x - 0.5) ** 2) * np.exp(1j * action(x) / hbar))


def shifted_datum(grid, hbar):
    """cosh_phase_datum translated by half a period, so it peaks at x = 0"""
    return cosh_phase_datum(grid, hbar).shifted(grid.L // 2)


def windowed_datum(grid, hbar, sigma=WINDOW_SIGMA, center=WINDOW_CENTER):
    """cosh_phase_datum times exp(-sigma (x - center)^2)"""
    if sigma <= 0:
        raise ValueError(f'sigma must be positive, got {sigma}')
    d = grid.wrap(grid.points - center)
    return Signal(grid, cosh_phase_datum(grid, hbar).values * np.exp(-sigma * d ** 2))


def atom_datum(sys, m=0, n=0):
    """A single frame atom: synthesis of one unit coefficient at lattice index (m, n)"""
    return synth(CoefficientGrid.single(sys.lattice, m, n), sys)


DATUMS = ('cosh_phase', 'shifted', 'windowed', 'atom')


def build_datum(name, sys, **params):
    """
    Initial Signal for a scenario.

    Args:
        name: one of DATUMS
        sys: GaborSystem (grid, hbar and the atom datum's frame)
        params: sigma/center for 'windowed', m/n for 'atom'
    """
    grid, hbar = sys.grid, sys.lattice.hbar
    if name == 'cosh_phase':
        return cosh_phase_datum(grid, hbar)
    if name == 'shifted':
        return shifted_datum(grid, hbar)
    if name == 'windowed':
        return windowed_datum(grid, hbar, **params)
    if name == 'atom':
        return atom_datum(sys, **params)
    raise ValueError(f'unknown datum {name!r}; known: {", ".join(DATUMS)}')
