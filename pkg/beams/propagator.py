# beams/propagator.py
"""
Order-zero parametrix: expand the state in the Gabor frame, carry every
retained atom along as a Gaussian beam and superpose the beams, restarting
from a fresh expansion at each reinitialization boundary.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional
import logging
import math
import time

import numpy as np

from beams.dynamics import DEFAULT_TOL, BeamEnsemble, BeamEvent, advance
from beams.synthesis import evaluate_ensemble
from core.exceptions import SimulationError
from core.grid import Signal, l2_norm, rel_error
from frames.gabor import analyze, threshold

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 256
DEFAULT_MAX_SEGMENTS = 64
TIME_EPS = 1e-12


# ========================================================================
# REINITIALIZATION POLICY
# ========================================================================


@dataclass(frozen=True)
class ReinitPolicy:
    kind: str = 'none'          # none | uniform | event
    segments: int = 1           # uniform only
    width: Optional[float] = None   # event only: Im Gamma threshold

    def __post_init__(self):
        if self.kind not in ('none', 'uniform', 'event'):
            raise ValueError(f'unknown reinit policy {self.kind!r}')
        if self.kind == 'uniform' and self.segments < 1:
            raise ValueError(f'uniform reinit needs at least one segment, got {self.segments}')
        if self.kind == 'event' and not (self.width and 0.0 < self.width < 1.0):
            raise ValueError(f'event threshold must lie in (0, 1), got {self.width}')

    @classmethod
    def parse(cls, text, default_width=None):
        """'none', 'uniform:K' or 'event:R'; a bare 'event' takes default_width"""
        text = str(text).strip().lower()
        if text == 'none':
            return cls()
        kind, _, value = text.partition(':')
        if kind == 'event' and not value and default_width is not None:
            return cls('event', width=float(default_width))
        try:
            if kind == 'uniform':
                return cls('uniform', segments=int(value))
            if kind == 'event':
                return cls('event', width=float(value))
        except ValueError:
            raise ValueError(f'malformed reinit policy {text!r}') from None
        raise ValueError(f'unknown reinit policy {text!r}; use none, uniform:K or event:R')

    def boundaries(self, T):
        """Planned boundaries; event runs discover theirs while integrating"""
        if self.kind == 'uniform':
            return [T * k / self.segments for k in range(self.segments)] + [T]
        return [0.0, T]

    def __str__(self):
        if self.kind == 'uniform':
            return f'uniform:{self.segments}'
        if self.kind == 'event':
            return f'event:{self.width:g}'
        return 'none'


# ========================================================================
# RUN RECORDS
# ========================================================================


@dataclass
class Segment:
    index: int
    start: float
    end: float
    coefficients: object            # thresholded CoefficientGrid
    support: np.ndarray             # (K, 2) retained (m, n)
    retained_energy: float
    discarded_energy: float
    event: Optional[BeamEvent] = None
    beams: Optional[BeamEnsemble] = None    # states at `end`

    @property
    def retained(self):
        return len(self.support)


@dataclass
class ParametrixRun:
    hbar: float
    potential: object
    T: float
    eta: float
    reinit: ReinitPolicy
    segments: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)     # t -> Signal
    timings: dict = field(default_factory=dict)

    @property
    def boundaries(self):
        if not self.segments:
            return [0.0]
        return [self.segments[0].start] + [s.end for s in self.segments]

    @property
    def final(self):
        return self.outputs[max(self.outputs)]

    def output_at(self, t):
        for key, signal in self.outputs.items():
            if abs(key - t) <= TIME_EPS * max(1.0, abs(t)):
                return signal
        raise KeyError(f'no output at t={t}')

    def norm_bound_ratio(self):
        """
        max over outputs of ||U_eta(t) f|| / (sum_{retained} |c|^2)^{1/2},
        both in discrete l2 for the segment that produced the output
        """
        ratios = []
        for t, signal in self.outputs.items():
            seg = self._segment_for(t)
            if seg.retained_energy > 0:
                discrete = l2_norm(signal) * math.sqrt(signal.grid.L)
                ratios.append(discrete / math.sqrt(seg.retained_energy))
        return max(ratios) if ratios else 0.0

    def _segment_for(self, t):
        for seg in self.segments:
            if t <= seg.end + TIME_EPS:
                return seg
        return self.segments[-1]


# ========================================================================
# EVOLUTION
# ========================================================================


def initial_weights(kept, ensemble, hbar):
    """Phase-locked coefficients times exp(-i delta_0 / hbar)"""
    m, n = ensemble.index[:, 0], ensemble.index[:, 1]
    return kept.values[m, n] * np.exp(-1j * ensemble.delta / hbar)


def window_scale(sys):
    """g[0] / (pi hbar)^{-1/4}: the beam amplitude factor that reproduces the frame atoms"""
    return float(sys.window.values[0].real) * (math.pi * sys.lattice.hbar) ** 0.25


def _advance_all(ensemble, potential, t_end, tol, width_event, threads, chunk_size):
    chunks = ensemble.chunks(chunk_size)

    def work(chunk):
        return advance(chunk, potential, t_end, tol, width_event)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(chunk) for chunk in chunks]

    events = [event for _, event in results if event is not None]
    first = min(events, key=lambda e: e.time) if events else None
    return BeamEnsemble.concat([state for state, _ in results]), first


def evolve(f0, sys, potential, T, eta, reinit=None, output_times=None, tol=DEFAULT_TOL,
           threads=1, chunk_size=DEFAULT_CHUNK_SIZE, max_segments=DEFAULT_MAX_SEGMENTS):
    """
    Order-zero parametrix applied to f0 on [0, T].

    Args:
        f0: initial Signal
        sys: GaborSystem (window, dual, lattice)
        potential: Potential
        T: horizon > 0
        eta: coefficient threshold >= 0, re-applied after each reinitialization
        reinit: ReinitPolicy (default none)
        output_times: times in [0, T] at which to synthesize; default (0, T)
        tol: beam ODE tolerance
        threads: worker count for beam chunks
        chunk_size: beams integrated as one system
        max_segments: cap on event-driven restarts

    Returns:
        ParametrixRun
    """
    if T <= 0:
        raise ValueError(f'T must be positive, got {T}')
    if eta < 0:
        raise ValueError(f'eta must be non-negative, got {eta}')
    reinit = reinit or ReinitPolicy()

    times = sorted({0.0, float(T)} if output_times is None else {float(t) for t in output_times})
    if times[0] < 0 or times[-1] > T + TIME_EPS:
        raise ValueError(f'output times must lie in [0, {T}], got {times}')

    lattice = sys.lattice
    hbar = lattice.hbar
    scale = window_scale(sys)
    run = ParametrixRun(hbar, potential, float(T), float(eta), reinit)
    planned = reinit.boundaries(T)
    width_event = reinit.width if reinit.kind == 'event' else None
    started = time.perf_counter()
    busy = {'analysis': 0.0, 'beams': 0.0, 'synthesis': 0.0}

    def synthesize(ensemble, weights):
        tick = time.perf_counter()
        out = evaluate_ensemble(ensemble, weights, hbar, lattice.grid, scale)
        busy['synthesis'] += time.perf_counter() - tick
        return out

    state = f0
    t_bar = 0.0
    while True:
        if len(run.segments) >= max_segments:
            raise SimulationError(
                f'reinitialization did not reach T={T} within {max_segments} segments '
                f'(stopped at t={t_bar:.6g})')

        tick = time.perf_counter()
        coefficients = analyze(state, sys)
        kept, support = threshold(coefficients, eta)
        busy['analysis'] += time.perf_counter() - tick
        index = len(run.segments)

        if reinit.kind == 'uniform':
            target = planned[index + 1]
        else:
            target = float(T)

        if len(support) == 0:
            logger.warning(f'No coefficient above eta={eta} at t={t_bar:.6g}; output is zero')
            run.segments.append(Segment(index, t_bar, float(T), kept, support, 0.0,
                                        coefficients.energy))
            # the output at t_bar, if any, already came from the previous segment
            for t in times:
                if t >= t_bar - TIME_EPS and t not in run.outputs:
                    run.outputs[t] = Signal.zeros(lattice.grid)
            break

        ensemble = BeamEnsemble.from_lattice(lattice, support, t=t_bar)
        weights = initial_weights(kept, ensemble, hbar)
        logger.info(f'Segment {index}: {len(support)} of {lattice.n_atoms} atoms '
                    f'retained at t={t_bar:.6g}')

        tick = time.perf_counter()
        event = None
        if width_event is not None:
            _, event = _advance_all(ensemble, potential, target, tol, width_event,
                                    threads, chunk_size)
            if event is not None:
                if event.time - t_bar <= TIME_EPS:
                    raise SimulationError(
                        f'width event fired immediately at t={t_bar:.6g}; '
                        f'threshold {width_event} is too close to 1')
                target = event.time
                logger.info(f'Beam {event.index} spread below {width_event} at t={target:.6g}')
        busy['beams'] += time.perf_counter() - tick

        # outputs inside the segment: integrate to each requested time exactly
        if index == 0 and times[0] == 0.0:
            run.outputs[0.0] = synthesize(ensemble, weights)
        stops = [t for t in times if t_bar + TIME_EPS < t < target - TIME_EPS] + [target]
        current = ensemble
        for stop in stops:
            tick = time.perf_counter()
            current, _ = _advance_all(current, potential, stop, tol, None, threads, chunk_size)
            busy['beams'] += time.perf_counter() - tick
            signal = synthesize(current, weights)
            if stop != target or any(abs(t - target) <= TIME_EPS for t in times):
                run.outputs[_match(times, stop)] = signal
            if stop == target:
                state = signal

        run.segments.append(Segment(index, t_bar, target, kept, support, kept.energy,
                                    coefficients.energy - kept.energy, event, current))
        t_bar = target
        if t_bar >= T - TIME_EPS:
            break

    run.timings = {**busy, 'total': time.perf_counter() - started}
    logger.info(f'Parametrix reached T={T} in {len(run.segments)} segment(s), '
                f'{run.timings["total"]:.2f}s')
    return run


def _match(times, t):
    for candidate in times:
        if abs(candidate - t) <= TIME_EPS:
            return candidate
    return t


# ========================================================================
# DIAGNOSTICS
# ========================================================================


def threshold_error_bound(coefficients, kept, f0, b_hi):
    """
    Upper bound on rel_error(U_eta(0) f0, U_0(0) f0):
    (b_hi * sum_{discarded} |c|^2)^{1/2} / ||f0||, norms in discrete l2
    """
    discarded = max(coefficients.energy - kept.energy, 0.0)
    discrete_norm = l2_norm(f0) * math.sqrt(f0.grid.L)
    return math.sqrt(b_hi * discarded) / discrete_norm


@dataclass(frozen=True)
class OrderProbe:
    hbars: tuple
    errors: tuple
    slope: float
    intercept: float
    degenerate: bool = False
    reason: str = ''


def duhamel_order_probe(potential, setup, T, hbars, reference, eta=0.0, floor=None, **options):
    """
    Fit log(error) = slope * log(hbar) + c over a geometric hbar ladder.

    Args:
        potential: Potential
        setup: hbar -> (GaborSystem, initial Signal)
        T: horizon
        hbars: >= 3 values in geometric progression
        reference: (f0, potential, T, hbar) -> reference Signal at T
        eta: threshold passed to evolve
        floor: optional (f0, potential, T, hbar) -> error level the reference
            cannot resolve below
        options: forwarded to evolve

    Returns:
        OrderProbe; `degenerate` is set (and logged) when the potential is
        quadratic or any error sits at the floor
    """
    hbars = tuple(float(h) for h in hbars)
    if len(hbars) < 3:
        raise ValueError(f'need at least 3 hbar values, got {len(hbars)}')
    ratios = np.array(hbars[1:]) / np.array(hbars[:-1])
    if not np.allclose(ratios, ratios[0], rtol=1e-9):
        raise ValueError(f'hbar values must form a geometric progression, got {hbars}')

    errors, floors = [], []
    for hbar in hbars:
        sys, f0 = setup(hbar)
        run = evolve(f0, sys, potential, T, eta, **options)
        u_ref = reference(f0, potential, T, hbar)
        errors.append(rel_error(run.output_at(T), u_ref))
        floors.append(floor(f0, potential, T, hbar) if floor else 0.0)
        logger.info(f'Order probe hbar={hbar:.4g} (L={sys.lattice.L}): error {errors[-1]:.4e}')

    reason = ''
    at_floor = [i for i, (e, f) in enumerate(zip(errors, floors)) if e <= f]
    if potential.quadratic:
        reason = 'quadratic potential: the order-zero remainder vanishes'
    elif at_floor:
        i = at_floor[0]
        reason = f'error {errors[i]:.2e} at the reference floor {floors[i]:.2e} (hbar={hbars[i]:.4g})'

    # exact results (free particle) would give log(0)
    logged = np.log(np.maximum(errors, np.finfo(float).tiny))
    slope, intercept = np.polyfit(np.log(hbars), logged, 1)
    if reason:
        logger.warning(f'Degenerate order fit ({reason}); slope {slope:.3f} is not meaningful')
    return OrderProbe(hbars, tuple(errors), float(slope), float(intercept), bool(reason), reason)
