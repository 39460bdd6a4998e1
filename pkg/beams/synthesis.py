# beams/synthesis.py

from dataclasses import dataclass
import logging
import math

import numpy as np

from beams.dynamics import gamma
from core.exceptions import FocalPoint
from core.grid import Signal

logger = logging.getLogger(__name__)

# beams are evaluated within CUTOFF widths of their centre
CUTOFF = 8.0
EVAL_CHUNK = 256


@dataclass(frozen=True)
class BeamAmplitude:
    modulus: float
    phase: float        # continuous in t; not reduced mod 2 pi

    @property
    def value(self):
        return self.modulus * np.exp(1j * self.phase)


def amplitude(s, hbar, scale=1.0):
    """
    a(t) = (pi hbar)^{-1/4} M_t^{-1/2}, with the square root taken on the
    sheet given by the beam's winding count.

    Args:
        s: BeamState
        hbar: semiclassical parameter
        scale: extra real factor (the window normalisation of the frame)
    """
    if abs(s.M) < 1e-12:
        raise FocalPoint()
    arg = np.angle(s.M) + 2.0 * np.pi * s.branch
    modulus = scale * (math.pi * hbar) ** -0.25 / math.sqrt(abs(s.M))
    return BeamAmplitude(float(modulus), float(-0.5 * arg))


def support_radius(width, hbar, cutoff=CUTOFF):
    """Half-width of the evaluated window: min(1/2, cutoff * sqrt(hbar / Im Gamma))"""
    return np.minimum(0.5, cutoff * np.sqrt(hbar / np.asarray(width)))


def evaluate_beam(s, c, hbar, grid, scale=1.0, cutoff=CUTOFF):
    """
    c * exp(i delta / hbar) exp(i p d / hbar) a(t) exp(i Gamma d^2 / (2 hbar))
    at the wrapped displacement d = x - x_t; zero outside the support radius.
    """
    g = gamma(s)
    amp = amplitude(s, hbar, scale)
    d = grid.displacement(s.x)
    inside = np.abs(d) <= support_radius(g.imag, hbar, cutoff)
    d = d[inside]
    phase = (s.delta + s.p * d + 0.5 * g * d ** 2) / hbar
    values = np.zeros(grid.L, dtype=np.complex128)
    values[inside] = c * amp.value * np.exp(1j * phase)
    return Signal(grid, values)


def evaluate_ensemble(ensemble, weights, hbar, grid, scale=1.0, cutoff=CUTOFF,
                      chunk_size=EVAL_CHUNK):
    """
    Superpose weighted beams on the grid.

    Chunks are reduced in ensemble order, so the result does not depend on
    how the ensemble was produced.
    """
    weights = np.asarray(weights, dtype=np.complex128)
    if len(weights) != len(ensemble):
        raise ValueError(f'{len(weights)} weights for {len(ensemble)} beams')

    out = np.zeros(grid.L, dtype=np.complex128)
    if len(ensemble) == 0:
        return Signal(grid, out)
    if np.min(np.abs(ensemble.M)) < 1e-12:
        raise FocalPoint()

    points = grid.points
    for start in range(0, len(ensemble), chunk_size):
        part = slice(start, start + chunk_size)
        x = ensemble.x[part, None]
        g = ensemble.gamma[part, None]
        arg = np.angle(ensemble.M[part]) + 2.0 * np.pi * ensemble.branch[part]
        amp = (scale * (math.pi * hbar) ** -0.25 / np.sqrt(np.abs(ensemble.M[part]))
               * np.exp(-0.5j * arg) * weights[part])

        d = grid.wrap(points[None, :] - x)
        inside = np.abs(d) <= support_radius(g.imag, hbar, cutoff)
        phase = (ensemble.delta[part, None] + ensemble.p[part, None] * d + 0.5 * g * d ** 2) / hbar
        beams = np.where(inside, amp[:, None] * np.exp(1j * np.where(inside, phase, 0.0)), 0.0)
        out += beams.sum(axis=0)
    return Signal(grid, out)
