# scenarios/management/commands/run.py

from pathlib import Path

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from core.exceptions import SimulationError
from scenarios.presets import PRESETS
from scenarios.runner import record_failure, run_scenario
from scenarios.scenario import Scenario


class Command(BaseCommand):
    help = 'Run a preset or a KEY=value scenario file and write the result artifacts'

    def add_arguments(self, parser):
        parser.add_argument(
            'target', help=f'Preset name ({", ".join(sorted(PRESETS))}) or config file path')
        parser.add_argument('--eta', type=float, help='Coefficient threshold')
        parser.add_argument('--T', type=float, dest='T', help='Time horizon')
        parser.add_argument('--reinit', help='none | uniform:K | event:R')
        parser.add_argument('--hbar', type=float, help='Semiclassical parameter')
        parser.add_argument('--out', help='Output directory')
        parser.add_argument('--reference', choices=['on', 'off'], default='on',
                            help='Run the split-step reference (default on)')
        parser.add_argument('--threads', type=int, help='Worker threads for beam chunks')
        parser.add_argument('--no-save', action='store_true',
                            help='Do not store the run in the database')

    def handle(self, *args, **options):
        target = options['target']
        overrides = {
            'eta': options['eta'],
            'T': options['T'],
            'reinit': options['reinit'],
            'hbar': options['hbar'],
        }

        try:
            if Path(target).is_file():
                scenario = Scenario.from_config_file(target, **overrides)
            else:
                scenario = Scenario.from_preset(target, **overrides)
        except ValidationError as e:
            raise CommandError(f'{target}: invalid scenario: {_flatten(e)}')

        if options['threads'] is not None and options['threads'] < 1:
            raise CommandError('--threads must be at least 1')

        self.stdout.write(f'Running {scenario}')
        try:
            report = run_scenario(
                scenario,
                out_dir=options['out'],
                reference=options['reference'] == 'on',
                persist=not options['no_save'],
                THREADS=options['threads'],
            )
        except (SimulationError, ValidationError, ValueError) as e:
            if not options['no_save']:
                record_failure(scenario, str(e))
            raise CommandError(f'{scenario.name}: {e}')

        run = report.run
        self.stdout.write(
            f'Segments: {len(run.segments)}, atoms retained: '
            f'{", ".join(str(seg.retained) for seg in run.segments)}')
        self.stdout.write(f'Reconstruction error at t=0: {report.reconstruction_error:.4e}')
        for t, err in sorted(report.errors.items()):
            if t > 0:
                self.stdout.write(f'rel_error@{t:g}: {err:.4e}')
        if report.improvement_factor is not None:
            self.stdout.write(
                f'Baseline ({scenario.baseline}) error {report.baseline_error:.4e}, '
                f'improvement factor {report.improvement_factor:.2f}')
        if report.probe is not None:
            style = self.style.WARNING if report.probe.degenerate else self.style.SUCCESS
            self.stdout.write(style(f'Order probe slope: {report.probe.slope:.3f}'))
            if report.probe.degenerate:
                self.stdout.write(self.style.WARNING(f'Degenerate fit: {report.probe.reason}'))
        if report.record is None and not options['no_save']:
            self.stdout.write(self.style.WARNING('Run was not stored in the database'))

        self.stdout.write(
            self.style.SUCCESS(f'Done in {report.timings["total"]:.1f}s, artifacts in {report.out_dir}'))


def _flatten(error):
    if hasattr(error, 'message_dict'):
        return '; '.join(f'{field}: {" ".join(messages)}'
                         for field, messages in error.message_dict.items())
    return ' '.join(error.messages)
