import math
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.core.management.base import CommandError
from django.db import DatabaseError
from django.test import SimpleTestCase, TestCase, override_settings, tag
from django.urls import reverse

from core.exceptions import SimulationError
from core.grid import Grid, l2_norm, rel_error
from frames.gabor import GaborLattice, GaborSystem, analyze, synth, threshold
from scenarios.datum import action, atom_datum, build_datum, cosh_phase_datum, shifted_datum, windowed_datum
from scenarios.models import RunSegment, ScenarioRun
from scenarios.presets import DEFAULT_HBAR, PRESETS, preset_values
from scenarios.runner import gaussbeam_options, run_scenario, solver_settings
from scenarios.scenario import Scenario
from scenarios.utils_export import format_value, plot_series, read_summary, write_summary

TINY_SCENARIO = """\
NAME=tiny_free
L=256
A=4
M=64
POTENTIAL=free
DATUM=atom
DATUM_PARAMS={"m": 2, "n": 32}
ETA=1e-6
T=0.1
OUTPUT_TIMES=0.05
REFERENCE_DT=0.01
"""


def write_config(directory, text):
    path = Path(directory) / 'scenario.env'
    path.write_text(text)
    return path


# ========================================================================
# INITIAL DATA
# ========================================================================


class DatumTests(SimpleTestCase):

    def setUp(self):
        self.grid = Grid(1024)

    def test_cosh_phase_datum_at_centre(self):
        u = cosh_phase_datum(self.grid, DEFAULT_HBAR).values
        expected = np.exp(-1j * math.log(2) / (5 * DEFAULT_HBAR))
        self.assertAlmostEqual(abs(u[512] - expected), 0.0, places=10)

    def test_action_is_even_with_tanh_slope(self):
        d = np.linspace(0, 0.5, 11)
        np.testing.assert_allclose(action(0.5 + d), action(0.5 - d), atol=1e-14)
        h = 1e-6
        slope = (action(0.7 + h) - action(0.7 - h)) / (2 * h)
        self.assertAlmostEqual(float(slope), -math.tanh(1.0), places=8)

    def test_shifted_datum_peaks_at_zero(self):
        u = shifted_datum(self.grid, DEFAULT_HBAR).values
        self.assertEqual(int(np.argmax(np.abs(u))), 0)

    def test_windowed_datum_is_concentrated(self):
        u = windowed_datum(self.grid, DEFAULT_HBAR).values
        x = self.grid.points
        outside = (x < 0.25) | (x > 0.75)
        self.assertLess(np.sum(np.abs(u[outside]) ** 2) / np.sum(np.abs(u) ** 2), 1e-6)
        with self.assertRaises(ValueError):
            windowed_datum(self.grid, DEFAULT_HBAR, sigma=0.0)

    def test_atom_datum(self):
        sys = GaborSystem.build(GaborLattice(4, 64, 256, DEFAULT_HBAR))
        np.testing.assert_allclose(atom_datum(sys).values, sys.window.values, atol=1e-14)
        self.assertIsNotNone(build_datum('atom', sys, m=2, n=32))
        with self.assertRaises(ValueError):
            build_datum('plane_wave', sys)


# ========================================================================
# SCENARIOS
# ========================================================================


class ScenarioTests(SimpleTestCase):

    def test_every_preset_validates(self):
        for name in PRESETS:
            with self.subTest(preset=name):
                scenario = Scenario.from_preset(name)
                self.assertEqual(scenario.name, name)
                self.assertEqual(scenario.preset, name)

    def test_well_defaults(self):
        s = Scenario.from_preset('well')
        self.assertEqual((s.L, s.a, s.M, s.eta, s.T, s.reinit), (1024, 32, 256, 0.01, 1.0, 'none'))
        self.assertAlmostEqual(s.hbar, 1 / (256 * math.pi))
        self.assertAlmostEqual(s.h, 1 / 128)
        self.assertEqual(s.times, (0.0, 1.0))
        self.assertIn('well: V=well', str(s))

    def test_event_width_falls_back_to_settings(self):
        with override_settings(GAUSSBEAM={**settings.GAUSSBEAM, 'WIDTH_EVENT': 0.35}):
            s = Scenario.from_preset('hill', reinit='event')
            self.assertEqual(s.reinit_policy.width, 0.35)
            own = Scenario.from_preset('hill', reinit='event', width_event=0.1)
            self.assertEqual(own.reinit_policy.width, 0.1)

    def test_overrides_skip_none(self):
        s = Scenario.from_preset('hill', eta=0.02, T=None, reinit='uniform:4')
        self.assertEqual((s.eta, s.T, s.reinit), (0.02, 2.0, 'uniform:4'))

    def test_unknown_preset(self):
        with self.assertRaises(ValidationError) as ctx:
            Scenario.from_preset('lagoon')
        self.assertIn('preset', ctx.exception.message_dict)
        with self.assertRaises(KeyError):
            preset_values('lagoon')

    def test_validation_errors_name_the_field(self):
        base = Scenario.from_preset('well')
        cases = {
            'L': {'L': 1023},
            'hbar': {'hbar': 10.0},
            'lattice': {'a': 256, 'M': 8},
            'potential': {'potential': 'quartic'},
            'potential_params': {'potential_params': {'stiffness': 2.0}},
            'datum': {'datum': 'plane_wave'},
            'eta': {'eta': -0.1},
            'T': {'T': 0.0},
            'reinit': {'reinit': 'sometimes'},
            'output_times': {'output_times': (3.0,)},
            'reference_dt': {'reference_dt': 2.0},
            'tol': {'tol': 1e-3},
            'width_event': {'width_event': 1.5},
            'baseline': {'baseline': 'yesterday'},
            'probe_hbars': {'probe_hbars': (0.001, 0.0005)},
        }
        for field, changes in cases.items():
            with self.subTest(field=field):
                with self.assertRaises(ValidationError) as ctx:
                    base.with_changes(**changes)
                self.assertIn(field, ctx.exception.message_dict)

    def test_output_times_always_include_ends(self):
        s = Scenario.from_preset('well', output_times=(0.5, 0.25))
        self.assertEqual(s.times, (0.0, 0.25, 0.5, 1.0))

    def test_bare_event_takes_default_width(self):
        s = Scenario.from_preset('hill', reinit='event')
        self.assertEqual(s.reinit_policy.width, 0.2)
        _, policy = solver_settings(s, gaussbeam_options(WIDTH_EVENT=0.3))
        self.assertEqual(policy.width, 0.3)

    def test_solver_settings_prefer_the_scenario(self):
        s = Scenario.from_preset('hill_event', tol=1e-10)
        tol, policy = solver_settings(s, gaussbeam_options(ODE_TOL=1e-8))
        self.assertEqual(tol, 1e-10)
        self.assertEqual(policy.width, 0.2)
        tol, _ = solver_settings(Scenario.from_preset('well'), gaussbeam_options(ODE_TOL=1e-8))
        self.assertEqual(tol, 1e-8)

    def test_baseline_variants(self):
        hill = Scenario.from_preset('hill').baseline_variant()
        self.assertEqual((hill.reinit, hill.baseline, hill.name), ('none', 'none', 'hill:no_reinit'))
        windowed = Scenario.from_preset('well_windowed').baseline_variant()
        self.assertEqual((windowed.datum, windowed.datum_params), ('cosh_phase', {}))
        self.assertIsNone(Scenario.from_preset('hill', reinit='none').baseline_variant())
        self.assertIsNone(Scenario.from_preset('well').baseline_variant())

    def test_rescaled_keeps_lattice_proportions(self):
        s = Scenario.from_preset('order_probe')
        finer = s.rescaled(DEFAULT_HBAR / 4)
        self.assertEqual((finer.L, finer.a, finer.M), (4096, 32, 1024))
        self.assertEqual(finer.probe_hbars, ())
        finer.validate()

    def test_as_dict(self):
        data = Scenario.from_preset('order_probe').as_dict()
        self.assertIsInstance(data['probe_hbars'], list)
        self.assertEqual(len(data['probe_hbars']), 3)


class ConfigFileTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_file_values_override_preset(self):
        path = write_config(self.tmp.name, 'PRESET=hill\nETA=0.02\nOUTPUT_TIMES=0.5,1\n')
        s = Scenario.from_config_file(path)
        self.assertEqual((s.name, s.potential, s.T, s.eta), ('hill', 'hill', 2.0, 0.02))
        self.assertEqual(s.output_times, (0.5, 1.0))

    def test_flags_override_file(self):
        path = write_config(self.tmp.name, 'PRESET=hill\nETA=0.02\n')
        s = Scenario.from_config_file(path, eta=0.05, T=None)
        self.assertEqual((s.eta, s.T), (0.05, 2.0))

    def test_custom_scenario(self):
        s = Scenario.from_config_file(write_config(self.tmp.name, TINY_SCENARIO))
        self.assertEqual((s.name, s.preset, s.L, s.a, s.M), ('tiny_free', None, 256, 4, 64))
        self.assertEqual(s.datum_params, {'m': 2, 'n': 32})

    def test_lattice_constant_key(self):
        s = Scenario.from_config_file(write_config(self.tmp.name, 'H=0.0078125\n'))
        self.assertAlmostEqual(s.hbar, DEFAULT_HBAR, places=15)

    def test_hbar_and_h_conflict(self):
        path = write_config(self.tmp.name, 'H=0.0078125\nHBAR=0.001\n')
        with self.assertRaises(ValidationError) as ctx:
            Scenario.from_config_file(path)
        self.assertIn('hbar', ctx.exception.message_dict)

    def test_unparsable_values(self):
        for text, field in (('L=many\n', 'L'), ('DATUM_PARAMS={m: 2}\n', 'config'),
                            ('PRESET=lagoon\n', 'preset')):
            with self.subTest(text=text):
                with self.assertRaises(ValidationError) as ctx:
                    Scenario.from_config_file(write_config(self.tmp.name, text))
                self.assertIn(field, ctx.exception.message_dict)

    @mock.patch.dict('os.environ', {'ETA': '0.5'})
    def test_environment_does_not_leak_into_files(self):
        s = Scenario.from_config_file(write_config(self.tmp.name, 'PRESET=well\n'))
        self.assertEqual(s.eta, 0.01)


class ExportTests(SimpleTestCase):

    def test_summary_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_summary({'name': 'well', 'eta': 0.01, 'segment_times': [0.0, 1.0]}, tmp)
            self.assertEqual(path.read_text().splitlines()[0], 'name: well')
            summary = read_summary(path)
        self.assertEqual(summary, {'name': 'well', 'eta': '0.01', 'segment_times': '0, 1'})

    def test_format_value(self):
        self.assertEqual(format_value(np.float64(1 / 3)), '0.3333333333')
        self.assertEqual(format_value((1, 'a')), '1, a')

    def test_plot_series(self):
        series = plot_series(cosh_phase_datum(Grid(1024), DEFAULT_HBAR))
        self.assertEqual(set(series), {'x', 'abs', 'real', 'imag'})
        self.assertEqual(len(series['x']), 256)
        self.assertEqual(len(plot_series(cosh_phase_datum(Grid(64), DEFAULT_HBAR))['abs']), 64)


# ========================================================================
# RUNS, PERSISTENCE AND THE COMMAND
# ========================================================================


class RunnerTests(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.scenario = Scenario.from_config_file(write_config(self.tmp.name, TINY_SCENARIO))

    def test_report_and_record(self):
        report = run_scenario(self.scenario, out_dir=Path(self.tmp.name) / 'out')
        self.assertEqual(sorted(report.errors), [0.0, 0.05, 0.1])
        self.assertLess(report.final_error, 1e-3)
        self.assertLessEqual(report.reconstruction_error, report.threshold_bound + 1e-8)
        self.assertIsNone(report.improvement_factor)

        record = report.record
        self.assertEqual(ScenarioRun.objects.count(), 1)
        self.assertEqual(record.status, 'completed')
        self.assertEqual(set(record.errors), {'0', '0.05', '0.1'})
        self.assertEqual(record.segment_records.count(), 1)
        self.assertEqual(record.summary['name'], 'tiny_free')
        self.assertIn('parametrix', record.plot_data['0.1'])
        self.assertIn('reference', record.plot_data['0.1'])

    def test_artifacts(self):
        out = Path(self.tmp.name) / 'out'
        run_scenario(self.scenario, out_dir=out, persist=False)
        names = {p.name for p in out.iterdir()}
        self.assertTrue({'state_t0.csv', 'state_t0.05.csv', 'state_t0.1.csv',
                         'reference_t0.1.csv', 'coeffs_seg0.csv', 'summary.txt'} <= names)
        summary = read_summary(out / 'summary.txt')
        self.assertEqual(summary['potential'], 'free')
        self.assertEqual(summary['segments'], '1')
        self.assertLess(float(summary["rel_error@0.1"]), 1e-3)
        self.assertEqual(ScenarioRun.objects.count(), 0)

    def test_thread_count_does_not_change_output(self):
        first, second = Path(self.tmp.name) / 'one', Path(self.tmp.name) / 'two'
        run_scenario(self.scenario, out_dir=first, reference=False, persist=False,
                     THREADS=1, CHUNK_SIZE=64)
        run_scenario(self.scenario, out_dir=second, reference=False, persist=False,
                     THREADS=2, CHUNK_SIZE=64)
        self.assertEqual((first / 'state_t0.1.csv').read_bytes(),
                         (second / 'state_t0.1.csv').read_bytes())

    def test_uniform_baseline(self):
        scenario = self.scenario.with_changes(reinit='uniform:2', baseline='no_reinit')
        report = run_scenario(scenario, out_dir=Path(self.tmp.name) / 'out')
        self.assertEqual(len(report.run.segments), 2)
        self.assertIsNotNone(report.baseline_error)
        self.assertIsNotNone(report.improvement_factor)
        self.assertEqual(RunSegment.objects.filter(run=report.record).count(), 2)

    def test_coinciding_baseline_is_skipped(self):
        scenario = self.scenario.with_changes(baseline='no_reinit')
        with self.assertLogs('scenarios.runner', level='WARNING') as logs:
            report = run_scenario(scenario, out_dir=Path(self.tmp.name) / 'out', persist=False)
        self.assertIn('coincides', '\n'.join(logs.output))
        self.assertIsNone(report.baseline_error)

    def test_database_failure_keeps_the_run(self):
        with mock.patch.object(ScenarioRun.objects, 'create',
                               side_effect=DatabaseError('database is down')):
            with self.assertLogs('scenarios.runner', level='ERROR') as logs:
                report = run_scenario(self.scenario, out_dir=Path(self.tmp.name) / 'out',
                                      reference=False)
        self.assertIsNone(report.record)
        self.assertIn('database is down', logs.output[0])
        self.assertTrue((report.out_dir / 'summary.txt').exists())


class RunCommandTests(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.config = write_config(self.tmp.name, TINY_SCENARIO)
        self.out = str(Path(self.tmp.name) / 'out')

    def call(self, *args):
        stdout = StringIO()
        call_command('run', *args, stdout=stdout)
        return stdout.getvalue()

    def test_run_config_file(self):
        output = self.call(str(self.config), '--out', self.out)
        self.assertIn('Running tiny_free', output)
        self.assertIn('Segments: 1', output)
        self.assertIn('rel_error@0.1', output)
        self.assertIn('Done in', output)
        self.assertEqual(ScenarioRun.objects.get().name, 'tiny_free')

    def test_flags_override_the_file(self):
        self.call(str(self.config), '--out', self.out, '--reinit', 'uniform:2', '--eta', '1e-5')
        run = ScenarioRun.objects.get()
        self.assertEqual((run.reinit, run.eta, run.segments), ('uniform:2', 1e-5, 2))

    def test_reference_off_and_no_save(self):
        output = self.call(str(self.config), '--out', self.out, '--reference', 'off', '--no-save')
        self.assertNotIn('rel_error@', output)
        self.assertEqual(ScenarioRun.objects.count(), 0)
        self.assertFalse((Path(self.out) / 'reference_t0.1.csv').exists())

    def test_unknown_preset(self):
        with self.assertRaisesMessage(CommandError, 'invalid scenario'):
            self.call('lagoon')

    def test_invalid_override(self):
        with self.assertRaisesMessage(CommandError, 'eta'):
            self.call(str(self.config), '--eta', '-1')

    def test_thread_count(self):
        with self.assertRaisesMessage(CommandError, '--threads'):
            self.call(str(self.config), '--threads', '0')

    def test_failures_are_recorded(self):
        with mock.patch('scenarios.management.commands.run.run_scenario',
                        side_effect=SimulationError('segment cap reached')):
            with self.assertRaisesMessage(CommandError, 'tiny_free: segment cap reached'):
                self.call(str(self.config), '--out', self.out)
        run = ScenarioRun.objects.get()
        self.assertEqual((run.status, run.message), ('failed', 'segment cap reached'))


class RunViewTests(TestCase):

    def setUp(self):
        common = dict(potential='well', L=1024, hbar=DEFAULT_HBAR, a=32, M=256, eta=0.01, T=1.0)
        self.well = ScenarioRun.objects.create(name='well', final_error=0.02,
                                               improvement_factor=1.5, **common)
        self.failed = ScenarioRun.objects.create(name='hill', status='failed',
                                                 message='boom', **common)
        RunSegment.objects.create(run=self.well, index=0, start=0.0, end=1.0, retained=1234)

    def test_list(self):
        response = self.client.get(reverse('scenarios:run_list'))
        self.assertEqual(response.status_code, 200)
        data = response.json()
        self.assertEqual(data['count'], 2)
        self.assertEqual({r['name'] for r in data['runs']}, {'well', 'hill'})

    def test_filters_and_limit(self):
        data = self.client.get(reverse('scenarios:run_list'), {'status': 'failed'}).json()
        self.assertEqual([r['name'] for r in data['runs']], ['hill'])
        data = self.client.get(reverse('scenarios:run_list'), {'name': 'well', 'limit': 1}).json()
        self.assertEqual(data['count'], 1)
        self.assertEqual(len(data['runs']), 1)

    def test_invalid_limit(self):
        for limit in ('many', '0'):
            response = self.client.get(reverse('scenarios:run_list'), {'limit': limit})
            self.assertEqual(response.status_code, 400)
            self.assertEqual(response.json(), {'error': 'Invalid limit'})

    def test_detail(self):
        response = self.client.get(reverse('scenarios:run_detail', args=[self.well.id]))
        self.assertEqual(response.status_code, 200)
        data = response.json()
        self.assertEqual(data['segment_records'][0]['retained'], 1234)
        self.assertIn('plot_data', data)

    def test_missing_run(self):
        response = self.client.get(reverse('scenarios:run_detail', args=[9999]))
        self.assertEqual(response.status_code, 404)
        self.assertEqual(response.json(), {'error': 'Run not found'})

    def test_read_only(self):
        response = self.client.post(reverse('scenarios:run_list'))
        self.assertEqual(response.status_code, 405)

    def test_model_helpers(self):
        self.assertAlmostEqual(self.well.h, 1 / 128)
        self.assertTrue(self.well.improved)
        self.assertFalse(self.failed.improved)
        self.assertIn('well (none, eta=0.01)', str(self.well))
        self.assertEqual(str(self.well.segment_records.get()), 'well segment 0 [0, 1]')


# ========================================================================
# DESK-SCALE ACCEPTANCE
# ========================================================================


@tag('slow')
class AcceptanceTests(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def run_preset(self, name, reference=True, **overrides):
        return run_scenario(Scenario.from_preset(name, **overrides),
                            out_dir=Path(self.tmp.name) / name, reference=reference,
                            persist=False)

    def test_reconstruction_at_start(self):
        s = Scenario.from_preset('well')
        sys = GaborSystem.build(s.lattice)
        f0 = cosh_phase_datum(s.grid, s.hbar)
        c = analyze(f0, sys)
        self.assertLessEqual(rel_error(synth(threshold(c, 0.01)[0], sys), f0), 0.01)
        self.assertLessEqual(rel_error(synth(threshold(c, 0.0)[0], sys), f0), 1e-8)

    def test_reconstruction_at_finer_hbar(self):
        s = Scenario.from_preset('well', hbar=1 / (512 * math.pi))
        sys = GaborSystem.build(s.lattice)
        f0 = cosh_phase_datum(s.grid, s.hbar)
        kept, _ = threshold(analyze(f0, sys), 0.01)
        self.assertLessEqual(rel_error(synth(kept, sys), f0), 0.01)

    def test_free_particle_is_exact_up_to_reconstruction(self):
        report = self.run_preset('free')
        self.assertLessEqual(report.final_error, 2 * report.reconstruction_error + 1e-5)

    def test_well_against_reference(self):
        report = self.run_preset('well')
        self.assertLessEqual(report.errors[1.0], 0.15)
        self.assertLessEqual(l2_norm(report.run.final) / l2_norm(report.initial), 1.1)

    def test_well_error_grows_at_most_linearly(self):
        report = self.run_preset('well', T=2.0, output_times=(1.0,))
        self.assertLessEqual(report.errors[2.0], 2.5 * report.errors[1.0])

    def test_free_reinit_is_nearly_idempotent(self):
        single = self.run_preset('free', reference=False)
        restarted = self.run_preset('free', reinit='uniform:8', reference=False)
        self.assertEqual(len(restarted.run.segments), 8)
        self.assertLessEqual(rel_error(restarted.run.final, single.run.final),
                             2 * single.reconstruction_error)

    def test_order_of_the_remainder(self):
        report = run_scenario(Scenario.from_preset('order_probe'),
                              out_dir=Path(self.tmp.name) / 'probe', reference=False,
                              persist=False)
        self.assertFalse(report.probe.degenerate, report.probe.reason)
        self.assertGreaterEqual(report.probe.slope, 0.4)

    def test_reinitialization_on_the_hill(self):
        report = self.run_preset('hill')
        self.assertEqual(len(report.run.segments), 8)
        self.assertLessEqual(report.final_error, 0.5 * report.baseline_error)

    def test_reinitialization_on_the_hill_and_well(self):
        report = self.run_preset('hill_well')
        self.assertEqual(len(report.run.segments), 8)
        self.assertLess(report.final_error, report.baseline_error)

    def test_windowed_datum_improves(self):
        report = self.run_preset('well_windowed')
        self.assertLessEqual(report.final_error, 0.65 * report.baseline_error)
