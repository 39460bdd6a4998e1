# reference/strang.py
"""
Strang-split pseudo-spectral solver for

    i hbar u_t = -(hbar^2 / 2) u_xx + V(x) u

on the periodic unit interval: half potential kick, exact kinetic flow in
Fourier space, half potential kick.
"""

from dataclasses import dataclass
from functools import cached_property
import logging
import math

import numpy as np
from scipy import fft

from core.grid import Signal, rel_error

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class StrangConfig:
    dt: float
    steps: int
    hbar: float
    potential: object

    @classmethod
    def for_horizon(cls, T, dt, hbar, potential):
        """Round dt down so that dt * steps == T"""
        if dt <= 0:
            raise ValueError(f'dt must be positive, got {dt}')
        if dt > abs(T) and T != 0:
            raise ValueError(f'dt={dt} exceeds the horizon {T}')
        steps = max(math.ceil(abs(T) / dt - 1e-9), 1) if T else 0
        return cls(T / steps if steps else dt, steps, hbar, potential)

    @property
    def horizon(self):
        return self.dt * self.steps


class _Stepper:
    """Phase factors for one grid, reused across steps"""

    def __init__(self, grid, cfg):
        self.cfg = cfg
        k = fft.fftfreq(grid.L, d=1.0 / grid.L)
        v = np.asarray(cfg.potential.v(grid.points), dtype=float)
        self.half_kick = np.exp(-0.5j * v * cfg.dt / cfg.hbar)
        self.drift = np.exp(-0.5j * cfg.hbar * (2.0 * np.pi * k) ** 2 * cfg.dt)

    def __call__(self, values):
        values = self.half_kick * values
        values = fft.ifft(self.drift * fft.fft(values))
        return self.half_kick * values


def step(u, cfg):
    """One Strang step of size cfg.dt (negative dt runs backwards)"""
    return Signal(u.grid, _Stepper(u.grid, cfg)(u.values))


def solve(u0, potential, T, dt, hbar):
    """
    Propagate u0 to time T (T < 0 integrates backwards with the reversed step).

    Returns:
        Signal at T
    """
    cfg = StrangConfig.for_horizon(T, dt, hbar, potential)
    if cfg.steps == 0:
        return u0
    stepper = _Stepper(u0.grid, cfg)
    values = u0.values
    for _ in range(cfg.steps):
        values = stepper(values)
    logger.debug(f'Strang solve: {cfg.steps} steps of dt={cfg.dt:.3g} to T={T:g}')
    return Signal(u0.grid, values)


def solve_backward(u, potential, T, dt, hbar):
    return solve(u, potential, -T, dt, hbar)


def solve_at(u0, potential, times, dt, hbar):
    """
    States at increasing output times, continuing from one time to the next.

    Returns:
        dict time -> Signal
    """
    out = {}
    current, clock = u0, 0.0
    for t in sorted(float(t) for t in times):
        if t < 0:
            raise ValueError(f'output times must be non-negative, got {t}')
        if t > clock:
            current = solve(current, potential, t - clock, min(dt, t - clock), hbar)
            clock = t
        out[t] = current
    return out


@dataclass(frozen=True)
class SelfConvergence:
    error_dt: float
    error_half: float

    @cached_property
    def ratio(self):
        return self.error_dt / self.error_half


def self_convergence(u0, potential, T, dt, hbar):
    """Errors of the dt and dt/2 runs measured against a dt/8 run"""
    fine = solve(u0, potential, T, dt / 8, hbar)
    result = SelfConvergence(
        rel_error(solve(u0, potential, T, dt, hbar), fine),
        rel_error(solve(u0, potential, T, dt / 2, hbar), fine),
    )
    logger.info(f'Strang self-convergence at dt={dt:g}: ratio {result.ratio:.3f}')
    return result


def estimate_error(u0, potential, T, dt, hbar):
    """
    Richardson-style estimate of the dt run's relative error: the dt vs dt/2
    difference scaled by 4/3 for a second-order scheme
    """
    coarse = solve(u0, potential, T, dt, hbar)
    fine = solve(u0, potential, T, dt / 2, hbar)
    return rel_error(coarse, fine) * 4.0 / 3.0
