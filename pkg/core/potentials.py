# core/potentials.py

from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.optimize import brentq

from core.exceptions import UnknownPotential

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


# ========================================================================
# POTENTIAL MODEL -- H(x, p) = V(x) + p^2 / 2
# ========================================================================


@dataclass(frozen=True, eq=False)
class Potential:
    """Closed-form V with first and second derivatives (vectorised in x)"""

    name: str
    v: object
    dv: object
    d2v: object
    params: dict = field(default_factory=dict)
    periodic: bool = True
    # quadratic Hamiltonians are propagated exactly by order-zero beams
    quadratic: bool = False

    def energy(self, x, p):
        return self.v(x) + 0.5 * np.asarray(p) ** 2

    def __str__(self):
        return self.name


def cosine(amplitude=1.0, offset=0.0, shift=0.0, name='cosine'):
    """V(x) = offset + amplitude * cos(2 pi (x + shift))"""
    def v(x):
        return offset + amplitude * np.cos(TWO_PI * (np.asarray(x) + shift))

    def dv(x):
        return -TWO_PI * amplitude * np.sin(TWO_PI * (np.asarray(x) + shift))

    def d2v(x):
        return -TWO_PI ** 2 * amplitude * np.cos(TWO_PI * (np.asarray(x) + shift))

    params = {'amplitude': amplitude, 'offset': offset, 'shift': shift}
    return Potential(name, v, dv, d2v, params)


def free():
    def zero(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    return Potential('free', zero, zero, zero, quadratic=True)


def harmonic_local(omega=TWO_PI, center=0.5):
    """
    V = omega^2 (x - center)^2 / 2; with the default omega this is
    2 pi^2 (x - 1/2)^2. Not periodic -- only meaningful near its minimum.
    """
    def v(x):
        return 0.5 * omega ** 2 * (np.asarray(x) - center) ** 2

    def dv(x):
        return omega ** 2 * (np.asarray(x) - center)

    def d2v(x):
        return np.full_like(np.asarray(x, dtype=float), omega ** 2)

    return Potential('harmonic_local', v, dv, d2v,
                     {'omega': omega, 'center': center},
                     periodic=False, quadratic=True)


# sin(2 pi (x + 1/2)) == cos(2 pi (x + 1/4))
BUILTINS = {
    'free': free,
    'harmonic_local': harmonic_local,
    'well': lambda **kw: cosine(name='well', **kw),
    'hill': lambda **kw: cosine(name='hill', **{'shift': 0.5, **kw}),
    'hill_well': lambda **kw: cosine(name='hill_well', **{'offset': 10.0, 'shift': 0.25, **kw}),
}


def builtin(name, **params):
    """
    Look up a named potential

    Args:
        name: one of BUILTINS
        params: overrides passed to the factory (amplitude, offset, shift,
            omega, center)

    Returns:
        Potential
    """
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise UnknownPotential(
            f'unknown potential {name!r}; known: {", ".join(sorted(BUILTINS))}') from None
    potential = factory(**params)
    logger.debug(f'Built potential {potential.name} with {potential.params}')
    return potential


# ========================================================================
# HESSIAN SIGN REGIONS
# ========================================================================


@dataclass(frozen=True)
class HessianRegion:
    start: float
    end: float
    sign: int   # +1 non-negative, -1 non-positive, 0 identically zero

    def contains(self, x):
        return self.start <= x <= self.end


def hessian_sign_regions(potential, resolution=256, atol=1e-12):
    """
    Split [0, 1] into contiguous intervals where d2v keeps its sign.

    Sign changes between samples are located with brentq, so boundaries
    are exact to solver precision rather than to the sampling step.
    """
    if resolution < 16:
        raise ValueError(f'resolution must be >= 16, got {resolution}')

    xs = np.linspace(0.0, 1.0, resolution + 1)
    values = np.asarray(potential.d2v(xs), dtype=float)
    signs = np.where(np.abs(values) <= atol, 0, np.sign(values)).astype(int)

    if not signs.any():
        return [HessianRegion(0.0, 1.0, 0)]

    # zero samples take the sign of the next non-zero one (last one: previous)
    nonzero = np.flatnonzero(signs)
    filled = signs.copy()
    for i in range(len(signs)):
        if filled[i] == 0:
            later = nonzero[nonzero > i]
            filled[i] = signs[later[0]] if len(later) else signs[nonzero[-1]]

    regions = []
    start = 0.0
    for i in range(len(xs) - 1):
        if filled[i] == filled[i + 1]:
            continue
        if signs[i] == 0:
            boundary = xs[i]
        elif signs[i + 1] == 0:
            boundary = xs[i + 1]
        else:
            boundary = brentq(lambda x: float(potential.d2v(x)), xs[i], xs[i + 1],
                              xtol=1e-14)
        regions.append(HessianRegion(start, float(boundary), int(filled[i])))
        start = float(boundary)
    regions.append(HessianRegion(start, 1.0, int(filled[-1])))
    return regions
