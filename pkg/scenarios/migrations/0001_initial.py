# Generated by Django 4.2.7

from django.db import migrations, models
import django.db.models.deletion
import django.utils.timezone


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ScenarioRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=100)),
                ('preset', models.CharField(blank=True, max_length=100, null=True)),
                ('potential', models.CharField(max_length=50)),
                ('datum', models.CharField(default='cosh_phase', max_length=50)),
                ('L', models.PositiveIntegerField()),
                ('hbar', models.FloatField()),
                ('a', models.PositiveIntegerField()),
                ('M', models.PositiveIntegerField()),
                ('eta', models.FloatField()),
                ('T', models.FloatField()),
                ('reinit', models.CharField(default='none', max_length=50)),
                ('atoms_retained', models.PositiveIntegerField(default=0, help_text='Retained atoms in the first segment')),
                ('segments', models.PositiveIntegerField(default=0)),
                ('reconstruction_error', models.FloatField(blank=True, help_text='rel_error at t = 0', null=True)),
                ('final_error', models.FloatField(blank=True, help_text='rel_error against the reference at T', null=True)),
                ('baseline_error', models.FloatField(blank=True, null=True)),
                ('improvement_factor', models.FloatField(blank=True, null=True)),
                ('errors', models.JSONField(blank=True, default=dict)),
                ('summary', models.JSONField(blank=True, default=dict)),
                ('plot_data', models.JSONField(blank=True, default=dict)),
                ('out_dir', models.CharField(blank=True, max_length=500)),
                ('status', models.CharField(choices=[('completed', 'Completed'), ('failed', 'Failed')], default='completed', max_length=20)),
                ('message', models.TextField(blank=True)),
                ('duration', models.FloatField(default=0.0, help_text='Wall time in seconds')),
                ('created_at', models.DateTimeField(default=django.utils.timezone.now)),
            ],
            options={
                'verbose_name': 'Scenario Run',
                'verbose_name_plural': 'Scenario Runs',
                'db_table': 'scenario_runs',
                'ordering': ['-created_at'],
                'indexes': [
                    models.Index(fields=['-created_at'], name='run_created_idx'),
                    models.Index(fields=['name', '-created_at'], name='run_name_created_idx'),
                ],
            },
        ),
        migrations.CreateModel(
            name='RunSegment',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('index', models.PositiveIntegerField()),
                ('start', models.FloatField()),
                ('end', models.FloatField()),
                ('retained', models.PositiveIntegerField(default=0)),
                ('discarded_energy', models.FloatField(default=0.0)),
                ('event_time', models.FloatField(blank=True, null=True)),
                ('event_index', models.JSONField(blank=True, null=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='segment_records', to='scenarios.scenariorun')),
            ],
            options={
                'db_table': 'scenario_run_segments',
                'ordering': ['run', 'index'],
                'unique_together': {('run', 'index')},
            },
        ),
    ]
