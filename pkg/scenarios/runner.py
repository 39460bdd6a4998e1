# scenarios/runner.py

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional
import logging
import time

from django.conf import settings
from django.db import DatabaseError, transaction

from beams.propagator import (
    OrderProbe, ParametrixRun, ReinitPolicy, duhamel_order_probe, evolve,
    threshold_error_bound,
)
from core.grid import rel_error
from frames.gabor import GaborSystem, analyze, frame_bounds, threshold
from reference.strang import estimate_error, solve, solve_at
from scenarios.datum import build_datum
from scenarios.models import RunSegment, ScenarioRun
from scenarios.utils_export import (
    plot_series, time_label, write_coefficients, write_signal, write_summary,
)

logger = logging.getLogger(__name__)

# the reference must be this much more accurate than what it measures
REFERENCE_MARGIN = 10.0


@dataclass
class RunReport:
    scenario: object
    run: ParametrixRun
    initial: object
    bounds: tuple
    reconstruction_error: float
    threshold_bound: float
    references: dict = field(default_factory=dict)     # t -> Signal
    errors: dict = field(default_factory=dict)         # t -> rel_error
    reference_error: Optional[float] = None
    baseline_error: Optional[float] = None
    probe: Optional[OrderProbe] = None
    timings: dict = field(default_factory=dict)
    out_dir: Optional[Path] = None
    files: list = field(default_factory=list)
    record: Optional[ScenarioRun] = None

    @property
    def final_error(self):
        return self.errors.get(self.scenario.T)

    @property
    def improvement_factor(self):
        if self.baseline_error is None or not self.final_error:
            return None
        return self.baseline_error / self.final_error

    def summary(self):
        s = self.scenario
        run = self.run
        data = {
            'preset': s.preset or 'none',
            'name': s.name,
            'L': s.L,
            'h': s.h,
            'hbar': s.hbar,
            'a': s.a,
            'M': s.M,
            'potential': s.potential,
            'datum': s.datum,
            'eta': s.eta,
            'T': s.T,
            'reinit': s.reinit,
            'atoms_retained': run.segments[0].retained,
            'segments': len(run.segments),
            'segment_times': run.boundaries,
            'retained_per_segment': [seg.retained for seg in run.segments],
            'frame_bounds': list(self.bounds),
            'reconstruction_error': self.reconstruction_error,
            'threshold_bound': self.threshold_bound,
            'norm_bound_ratio': run.norm_bound_ratio(),
        }
        for t, err in sorted(self.errors.items()):
            data[f'rel_error@{time_label(t)}'] = err
        if self.reference_error is not None:
            data['reference_error_estimate'] = self.reference_error
        if self.baseline_error is not None:
            data['baseline_rel_error'] = self.baseline_error
            data['improvement_factor'] = self.improvement_factor
        events = [seg.event for seg in run.segments if seg.event is not None]
        if events:
            data['event_times'] = [e.time for e in events]
        if self.probe is not None:
            data['probe_hbars'] = list(self.probe.hbars)
            data['probe_errors'] = list(self.probe.errors)
            data['probe_slope'] = self.probe.slope
            data['probe_degenerate'] = self.probe.reason or 'no'
        for key, seconds in self.timings.items():
            data[f'time_{key}'] = seconds
        return data


# ========================================================================
# BUILDING BLOCKS
# ========================================================================


def gaussbeam_options(**overrides):
    """settings.GAUSSBEAM with explicit overrides (None values ignored)"""
    options = dict(settings.GAUSSBEAM)
    options.update({k: v for k, v in overrides.items() if v is not None})
    return options


def build_system(scenario):
    tick = time.perf_counter()
    sys = GaborSystem.build(scenario.lattice)
    logger.info(f'Gabor system for {scenario.lattice} ready in {time.perf_counter() - tick:.2f}s')
    return sys


def solver_settings(scenario, options):
    """(tol, reinit policy) with settings filling what the scenario leaves open"""
    tol = scenario.tol if scenario.tol is not None else options['ODE_TOL']
    width = scenario.width_event if scenario.width_event is not None else options['WIDTH_EVENT']
    return tol, ReinitPolicy.parse(scenario.reinit, default_width=width)


def _evolve(scenario, sys, f0, options):
    tol, policy = solver_settings(scenario, options)
    return evolve(
        f0, sys, scenario.build_potential(), scenario.T, scenario.eta,
        reinit=policy,
        output_times=scenario.times,
        tol=tol,
        threads=options['THREADS'],
        chunk_size=options['CHUNK_SIZE'],
        max_segments=options['MAX_SEGMENTS'],
    )


def reference_solution(f0, potential, T, hbar, dt):
    return solve(f0, potential, T, dt, hbar)


# ========================================================================
# RUN
# ========================================================================


def run_scenario(scenario, out_dir=None, reference=True, persist=True, **overrides):
    """
    Execute a scenario: parametrix, optional reference and baseline, the
    order probe when configured, artifacts and the database record.

    Args:
        scenario: validated Scenario
        out_dir: artifact directory (default RESULTS_DIR / scenario name)
        reference: run the Strang reference and report errors
        persist: store a ScenarioRun record
        overrides: THREADS, CHUNK_SIZE, MAX_SEGMENTS, ODE_TOL, WIDTH_EVENT

    Returns:
        RunReport
    """
    options = gaussbeam_options(**overrides)
    started = time.perf_counter()
    timings = {}
    logger.info(f'Running {scenario}')

    tick = time.perf_counter()
    sys = build_system(scenario)
    bounds = frame_bounds(sys.window, sys.lattice)
    f0 = build_datum(scenario.datum, sys, **scenario.datum_params)
    timings['setup'] = time.perf_counter() - tick

    run = _evolve(scenario, sys, f0, options)
    timings.update({f'parametrix_{k}': v for k, v in run.timings.items()})

    coefficients = analyze(f0, sys)
    kept, _ = threshold(coefficients, scenario.eta)
    report = RunReport(
        scenario=scenario,
        run=run,
        initial=f0,
        bounds=bounds,
        reconstruction_error=rel_error(run.output_at(0.0), f0),
        threshold_bound=threshold_error_bound(coefficients, kept, f0, bounds[1]),
    )

    potential = scenario.build_potential()
    if reference:
        tick = time.perf_counter()
        report.references = solve_at(f0, potential, scenario.times, scenario.reference_dt,
                                     scenario.hbar)
        for t, u_ref in report.references.items():
            if t > 0:
                report.errors[t] = rel_error(run.output_at(t), u_ref)
        report.errors[0.0] = report.reconstruction_error
        report.reference_error = estimate_error(f0, potential, scenario.T,
                                                scenario.reference_dt, scenario.hbar)
        timings['reference'] = time.perf_counter() - tick
        _check_reference(report)
        report.baseline_error = _run_baseline(scenario, sys, options)

    if scenario.probe_hbars:
        tick = time.perf_counter()
        report.probe = _run_probe(scenario, options)
        timings['probe'] = time.perf_counter() - tick

    timings['total'] = time.perf_counter() - started
    report.timings = timings

    report.out_dir = Path(out_dir or Path(options['RESULTS_DIR']) / scenario.name)
    report.files = export_report(report)
    if persist:
        report.record = save_run(report)

    logger.info(f'Finished {scenario.name} in {timings["total"]:.2f}s '
                f'(final error {report.final_error})')
    return report


def _check_reference(report):
    measured = [e for t, e in report.errors.items() if t > 0]
    if measured and report.reference_error * REFERENCE_MARGIN > min(measured):
        logger.warning(
            f'Reference error estimate {report.reference_error:.2e} is not '
            f'{REFERENCE_MARGIN:g}x below the smallest measured error {min(measured):.2e}; '
            f'decrease reference_dt')


def _run_baseline(scenario, sys, options):
    variant = scenario.baseline_variant()
    if variant is None:
        if scenario.baseline != 'none':
            logger.warning(f'Baseline {scenario.baseline} coincides with {scenario.name}; skipped')
        return None

    logger.info(f'Running baseline {variant.name}')
    f0 = build_datum(variant.datum, sys, **variant.datum_params)
    run = _evolve(variant, sys, f0, options)
    potential = variant.build_potential()
    u_ref = reference_solution(f0, potential, variant.T, variant.hbar, variant.reference_dt)
    return rel_error(run.output_at(variant.T), u_ref)


def _run_probe(scenario, options):
    def setup(hbar):
        scaled = scenario.rescaled(hbar)
        sys = build_system(scaled)
        return sys, build_datum(scaled.datum, sys, **scaled.datum_params)

    def reference(f0, potential, T, hbar):
        return reference_solution(f0, potential, T, hbar, scenario.reference_dt)

    def floor(f0, potential, T, hbar):
        return REFERENCE_MARGIN * estimate_error(f0, potential, T, scenario.reference_dt, hbar)

    tol, policy = solver_settings(scenario, options)
    return duhamel_order_probe(
        scenario.build_potential(), setup, scenario.T, scenario.probe_hbars, reference,
        eta=scenario.eta, floor=floor, reinit=policy, tol=tol,
        threads=options['THREADS'], chunk_size=options['CHUNK_SIZE'],
        max_segments=options['MAX_SEGMENTS'],
    )


# ========================================================================
# ARTIFACTS AND PERSISTENCE
# ========================================================================


def export_report(report):
    """state_t<t>.csv, reference_t<t>.csv, coeffs_seg<k>.csv and summary.txt"""
    out_dir = report.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for t, signal in sorted(report.run.outputs.items()):
        files.append(write_signal(signal, out_dir, 'state', t))
    for t, signal in sorted(report.references.items()):
        files.append(write_signal(signal, out_dir, 'reference', t))
    for seg in report.run.segments:
        files.append(write_coefficients(seg.coefficients, out_dir, seg.index))
    files.append(write_summary(report.summary(), out_dir))
    logger.info(f'Wrote {len(files)} files to {out_dir}')
    return files


def save_run(report):
    """Store the run; a database failure is logged and does not fail the run"""
    s = report.scenario
    plot_data = {time_label(t): {'parametrix': plot_series(signal)}
                 for t, signal in report.run.outputs.items()}
    for t, signal in report.references.items():
        plot_data.setdefault(time_label(t), {})['reference'] = plot_series(signal)

    try:
        with transaction.atomic():
            record = ScenarioRun.objects.create(
                name=s.name,
                preset=s.preset,
                potential=s.potential,
                datum=s.datum,
                L=s.L,
                hbar=s.hbar,
                a=s.a,
                M=s.M,
                eta=s.eta,
                T=s.T,
                reinit=s.reinit,
                atoms_retained=report.run.segments[0].retained,
                segments=len(report.run.segments),
                reconstruction_error=report.reconstruction_error,
                final_error=report.final_error,
                baseline_error=report.baseline_error,
                improvement_factor=report.improvement_factor,
                errors={time_label(t): e for t, e in report.errors.items()},
                summary={k: _jsonable(v) for k, v in report.summary().items()},
                plot_data=plot_data,
                out_dir=str(report.out_dir or ''),
                duration=report.timings.get('total', 0.0),
            )
            RunSegment.objects.bulk_create([
                RunSegment(
                    run=record,
                    index=seg.index,
                    start=seg.start,
                    end=seg.end,
                    retained=seg.retained,
                    discarded_energy=seg.discarded_energy,
                    event_time=seg.event.time if seg.event else None,
                    event_index=list(seg.event.index) if seg.event and seg.event.index else None,
                )
                for seg in report.run.segments
            ])
        return record
    except DatabaseError as e:
        logger.error(f'Could not store run {s.name}: {e}')
        return None


def record_failure(scenario, message):
    try:
        return ScenarioRun.objects.create(
            name=scenario.name, preset=scenario.preset, potential=scenario.potential,
            datum=scenario.datum, L=scenario.L, hbar=scenario.hbar, a=scenario.a,
            M=scenario.M, eta=scenario.eta, T=scenario.T, reinit=scenario.reinit,
            status='failed', message=message,
        )
    except DatabaseError as e:
        logger.error(f'Could not store failed run {scenario.name}: {e}')
        return None


def _jsonable(value):
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, 'item'):
        return value.item()
    return value
