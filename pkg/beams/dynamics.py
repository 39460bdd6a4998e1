# beams/dynamics.py
"""
Gaussian-beam ODEs for H = V(x) + p^2 / 2:

    x' = p,   p' = -V'(x),   M' = N,   N' = -V''(x) M,   delta' = p^2 / 2 - V(x)

integrated as 7 real components (x, p, Re M, Im M, Re N, Im N, delta) with
scipy's Dormand-Prince RK45 pair. x lives on the real line and is wrapped
only when a beam is evaluated on the grid.
"""

from dataclasses import dataclass, field, replace
from typing import Optional
import logging
import math

import numpy as np
from scipy.integrate import solve_ivp

from core.exceptions import FocalPoint, IndexOutOfRange, PropagationError, StiffOrSingular

logger = logging.getLogger(__name__)

STATE_SIZE = 7
DEFAULT_TOL = 1e-9
DEFAULT_WIDTH_EVENT = 0.2
FOCAL_GUARD = 1e-12
TOL_RANGE = (1e-13, 1e-6)


# ========================================================================
# BEAM STATE
# ========================================================================


@dataclass(frozen=True)
class BeamState:
    t: float
    x: float
    p: float
    M: complex
    N: complex
    delta: float
    branch: int = 0     # winding count of M around 0

    @property
    def gamma(self):
        return gamma(self)

    @property
    def width(self):
        """Im Gamma, the inverse squared beam width"""
        return gamma(self).imag

    @property
    def wronskian(self):
        return np.conj(self.M) * self.N - self.M * np.conj(self.N)

    def energy(self, potential):
        return float(potential.energy(self.x, self.p))

    def as_vector(self):
        return np.array([self.x, self.p, self.M.real, self.M.imag,
                         self.N.real, self.N.imag, self.delta])

    @classmethod
    def from_vector(cls, t, y, branch=0):
        return cls(float(t), float(y[0]), float(y[1]), complex(y[2], y[3]),
                   complex(y[4], y[5]), float(y[6]), int(branch))


@dataclass(frozen=True)
class BeamEvent:
    time: float
    reason: str
    index: Optional[tuple] = None   # lattice (m, n) of the beam that fired


@dataclass
class BeamTrajectory:
    samples: list
    event: Optional[BeamEvent] = None

    @property
    def times(self):
        return np.array([s.t for s in self.samples])

    @property
    def final(self):
        return self.samples[-1]

    def to_csv(self, path):
        table = np.array([[s.t, s.x, s.p, s.M.real, s.M.imag, s.N.real, s.N.imag,
                           s.delta, s.branch] for s in self.samples])
        np.savetxt(path, table, delimiter=',', comments='',
                   header='t,x,p,ReM,ImM,ReN,ImN,delta,branch',
                   fmt=['%.17g'] * 8 + ['%d'])


def gamma(s):
    """Gamma_t = N_t / M_t"""
    if abs(s.M) < FOCAL_GUARD:
        raise FocalPoint(f'focal point: |M| = {abs(s.M):.2e} at t = {s.t}')
    return s.N / s.M


def initial_state(n, m, lattice):
    """
    Beam of lattice atom (n, m) at t = 0, with n and m in the symmetric
    ranges (-N/2, N/2] and (-M/2, M/2].
    """
    if not -lattice.N // 2 < n <= lattice.N // 2:
        raise IndexOutOfRange(f'time index n={n} outside ({-lattice.N // 2}, {lattice.N // 2}]')
    if not -lattice.M // 2 < m <= lattice.M // 2:
        raise IndexOutOfRange(f'channel m={m} outside ({-lattice.M // 2}, {lattice.M // 2}]')

    x0 = lattice.a * n / lattice.L
    p0 = 2.0 * math.pi * lattice.hbar * m * lattice.L / lattice.M
    delta0 = lattice.a * n * math.pi * lattice.hbar * m / lattice.M
    return BeamState(0.0, x0, p0, 1.0 + 0.0j, 1.0j, delta0, 0)


# ========================================================================
# INTEGRATION
# ========================================================================


def beam_rhs(t, y, potential):
    """Vector field for y of shape (7,) or (7, K)"""
    x, p, m_re, m_im, n_re, n_im, _ = y
    curvature = potential.d2v(x)
    return np.array([
        p,
        -potential.dv(x),
        n_re,
        n_im,
        -curvature * m_re,
        -curvature * m_im,
        0.5 * p ** 2 - potential.v(x),
    ])


def _check_tol(tol):
    low, high = TOL_RANGE
    if not low <= tol <= high:
        raise ValueError(f'tol must lie in [{low}, {high}], got {tol}')


def _solver_tol(tol, size):
    # solve_ivp bounds the RMS of the scaled error; dividing by sqrt(size)
    # bounds every component instead
    return tol / math.sqrt(size)


def _track_branches(m_history, start_branch):
    """
    Winding counts along accepted steps.

    m_history has time on axis -1; returns integer branches with the same
    shape so that angle(M) + 2 pi branch is continuous in time.
    """
    angles = np.angle(m_history)
    continuous = np.unwrap(angles, axis=-1)
    continuous = continuous + 2.0 * np.pi * np.expand_dims(start_branch, -1)
    return np.rint((continuous - angles) / (2.0 * np.pi)).astype(int)


def _raise_on_failure(sol, t0):
    if sol.status == -1:
        raise StiffOrSingular(f'stiff or singular after t = {t0}: {sol.message}')


def propagate(s0, potential, t_end, tol=DEFAULT_TOL, width_event=None):
    """
    Integrate one beam from s0.t to t_end.

    Args:
        s0: BeamState
        potential: core.potentials.Potential
        t_end: final time, > s0.t
        tol: absolute and relative tolerance in [1e-13, 1e-6]
        width_event: stop at the first time Im Gamma drops below this value

    Returns:
        BeamTrajectory with one sample per accepted solver step
    """
    _check_tol(tol)
    if t_end <= s0.t:
        raise ValueError(f't_end={t_end} must exceed the start time {s0.t}')

    events = None
    if width_event is not None:
        def spreading(t, y):
            m = complex(y[2], y[3])
            n = complex(y[4], y[5])
            return (n * np.conj(m)).imag / abs(m) ** 2 - width_event
        spreading.terminal = True
        spreading.direction = -1
        events = [spreading]

    def rhs(t, y):
        return beam_rhs(t, y, potential)

    rtol = _solver_tol(tol, STATE_SIZE)
    sol = solve_ivp(rhs, (s0.t, t_end), s0.as_vector(), method='RK45',
                    rtol=rtol, atol=rtol, events=events)
    _raise_on_failure(sol, s0.t)

    m_history = sol.y[2] + 1j * sol.y[3]
    if np.min(np.abs(m_history)) < FOCAL_GUARD:
        raise FocalPoint()
    branches = _track_branches(m_history, s0.branch)
    samples = [BeamState.from_vector(t, sol.y[:, i], branches[i])
               for i, t in enumerate(sol.t)]

    event = None
    if events and len(sol.t_events[0]):
        event = BeamEvent(float(sol.t_events[0][0]), 'beam spreading')
        logger.debug(f'Width event at t={event.time:.6g} for beam from x={s0.x:.4g}')
    return BeamTrajectory(samples, event)


def propagate_backward(s, potential, duration, tol=DEFAULT_TOL):
    """Integrate the sign-flipped vector field for `duration`; returns the final state"""
    _check_tol(tol)

    def reversed_rhs(tau, y):
        return -beam_rhs(tau, y, potential)

    rtol = _solver_tol(tol, STATE_SIZE)
    sol = solve_ivp(reversed_rhs, (0.0, duration), s.as_vector(), method='RK45',
                    rtol=rtol, atol=rtol)
    _raise_on_failure(sol, s.t)
    branches = _track_branches(sol.y[2] + 1j * sol.y[3], s.branch)
    return BeamState.from_vector(s.t - duration, sol.y[:, -1], branches[-1])


# ========================================================================
# ENSEMBLES -- many beams integrated as one system
# ========================================================================


@dataclass(frozen=True, eq=False)
class BeamEnsemble:
    """Structure-of-arrays batch of beams sharing the same time"""

    t: float
    x: np.ndarray
    p: np.ndarray
    M: np.ndarray
    N: np.ndarray
    delta: np.ndarray
    branch: np.ndarray
    index: np.ndarray = field(default=None)     # (K, 2) lattice (m, n)

    def __len__(self):
        return len(self.x)

    @classmethod
    def from_states(cls, states, index=None):
        return cls(
            t=states[0].t,
            x=np.array([s.x for s in states]),
            p=np.array([s.p for s in states]),
            M=np.array([s.M for s in states]),
            N=np.array([s.N for s in states]),
            delta=np.array([s.delta for s in states]),
            branch=np.array([s.branch for s in states], dtype=int),
            index=None if index is None else np.asarray(index),
        )

    @classmethod
    def from_lattice(cls, lattice, index, t=0.0):
        """
        Initial beams for retained lattice atoms.

        Args:
            lattice: GaborLattice
            index: (K, 2) array of (m, n) with m in 0..M-1, n in 0..N-1
        """
        index = np.asarray(index, dtype=int).reshape(-1, 2)
        m = lattice.signed_channel(index[:, 0])
        n = lattice.signed_time(index[:, 1])
        K = len(index)
        return cls(
            t=float(t),
            x=lattice.position(n).astype(float),
            p=lattice.momentum(m).astype(float),
            M=np.ones(K, dtype=np.complex128),
            N=np.full(K, 1j),
            delta=(lattice.a * n * math.pi * lattice.hbar * m / lattice.M).astype(float),
            branch=np.zeros(K, dtype=int),
            index=index,
        )

    @classmethod
    def concat(cls, parts):
        return cls(
            t=parts[0].t,
            x=np.concatenate([e.x for e in parts]),
            p=np.concatenate([e.p for e in parts]),
            M=np.concatenate([e.M for e in parts]),
            N=np.concatenate([e.N for e in parts]),
            delta=np.concatenate([e.delta for e in parts]),
            branch=np.concatenate([e.branch for e in parts]),
            index=None if parts[0].index is None else np.concatenate([e.index for e in parts]),
        )

    def take(self, selection):
        return BeamEnsemble(
            self.t, self.x[selection], self.p[selection], self.M[selection],
            self.N[selection], self.delta[selection], self.branch[selection],
            None if self.index is None else self.index[selection])

    def chunks(self, size):
        return [self.take(slice(start, start + size)) for start in range(0, len(self), size)]

    def state(self, i):
        return BeamState(self.t, float(self.x[i]), float(self.p[i]), complex(self.M[i]),
                         complex(self.N[i]), float(self.delta[i]), int(self.branch[i]))

    @property
    def gamma(self):
        return self.N / self.M

    @property
    def width(self):
        return (self.N * np.conj(self.M)).imag / np.abs(self.M) ** 2

    def as_matrix(self):
        return np.vstack([self.x, self.p, self.M.real, self.M.imag,
                          self.N.real, self.N.imag, self.delta])

    def with_matrix(self, t, y, branch):
        return replace(self, t=float(t), x=y[0].copy(), p=y[1].copy(),
                       M=y[2] + 1j * y[3], N=y[4] + 1j * y[5], delta=y[6].copy(),
                       branch=np.asarray(branch, dtype=int))


def advance(ensemble, potential, t_end, tol=DEFAULT_TOL, width_event=None):
    """
    Integrate every beam of the ensemble from ensemble.t to t_end.

    With width_event set, integration stops when the narrowest beam's
    Im Gamma falls below the threshold.

    Returns:
        (BeamEnsemble at the stop time, BeamEvent or None)
    """
    _check_tol(tol)
    K = len(ensemble)
    if K == 0 or t_end == ensemble.t:
        return ensemble, None

    def rhs(t, y):
        return beam_rhs(t, y.reshape(STATE_SIZE, K), potential).ravel()

    events = None
    if width_event is not None:
        def spreading(t, y):
            y = y.reshape(STATE_SIZE, K)
            m = y[2] + 1j * y[3]
            n = y[4] + 1j * y[5]
            return np.min((n * np.conj(m)).imag / np.abs(m) ** 2) - width_event
        spreading.terminal = True
        spreading.direction = -1
        events = [spreading]

    rtol = _solver_tol(tol, STATE_SIZE * K)
    sol = solve_ivp(rhs, (ensemble.t, t_end), ensemble.as_matrix().ravel(),
                    method='RK45', rtol=rtol, atol=rtol, events=events)
    if sol.status == -1:
        _locate_failure(ensemble, potential, t_end, tol, sol.message)

    y = sol.y.reshape(STATE_SIZE, K, -1)
    m_history = y[2] + 1j * y[3]
    if np.min(np.abs(m_history)) < FOCAL_GUARD:
        worst = int(np.argmin(np.min(np.abs(m_history), axis=1)))
        raise PropagationError(_lattice_index(ensemble, worst), FocalPoint())
    branches = _track_branches(m_history, ensemble.branch)[:, -1]
    advanced = ensemble.with_matrix(sol.t[-1], y[:, :, -1], branches)

    event = None
    if events and len(sol.t_events[0]):
        firing = int(np.argmin(advanced.width))
        event = BeamEvent(float(sol.t_events[0][0]), 'beam spreading',
                          _lattice_index(ensemble, firing))
    logger.debug(f'Advanced {K} beams to t={advanced.t:.6g} in {len(sol.t)} steps')
    return advanced, event


def _lattice_index(ensemble, i):
    if ensemble.index is None:
        return (i,)
    return tuple(int(v) for v in ensemble.index[i])


def _locate_failure(ensemble, potential, t_end, tol, message):
    # re-run beams one at a time to name the culprit
    for i in range(len(ensemble)):
        try:
            propagate(ensemble.state(i), potential, t_end, tol)
        except (StiffOrSingular, FocalPoint) as e:
            raise PropagationError(_lattice_index(ensemble, i), e) from e
    raise PropagationError(_lattice_index(ensemble, 0), StiffOrSingular(f'stiff or singular: {message}'))
