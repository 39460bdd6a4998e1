import logging
import math
from django.db import models
from django.utils import timezone


logger = logging.getLogger(__name__)


# python manage.py makemigrations scenarios
# python manage.py migrate


# ========================================================================
# SCENARIO RUN MODEL
# ========================================================================


class ScenarioRun(models.Model):
    """One execution of the `run` command"""

    STATUS_CHOICES = [
        ('completed', 'Completed'),
        ('failed', 'Failed'),
    ]

    # Scenario identity
    name = models.CharField(max_length=100)
    preset = models.CharField(max_length=100, blank=True, null=True)
    potential = models.CharField(max_length=50)
    datum = models.CharField(max_length=50, default='cosh_phase')

    # Discretisation
    L = models.PositiveIntegerField()
    hbar = models.FloatField()
    a = models.PositiveIntegerField()
    M = models.PositiveIntegerField()

    # Parametrix settings
    eta = models.FloatField()
    T = models.FloatField()
    reinit = models.CharField(max_length=50, default='none')

    # Results
    atoms_retained = models.PositiveIntegerField(
        default=0, help_text='Retained atoms in the first segment')
    segments = models.PositiveIntegerField(default=0)
    reconstruction_error = models.FloatField(
        null=True, blank=True, help_text='rel_error at t = 0')
    final_error = models.FloatField(
        null=True, blank=True, help_text='rel_error against the reference at T')
    baseline_error = models.FloatField(null=True, blank=True)
    improvement_factor = models.FloatField(null=True, blank=True)

    # Per-time errors, the summary file and plot series
    errors = models.JSONField(default=dict, blank=True)
    summary = models.JSONField(default=dict, blank=True)
    plot_data = models.JSONField(default=dict, blank=True)

    out_dir = models.CharField(max_length=500, blank=True)
    status = models.CharField(
        max_length=20, choices=STATUS_CHOICES, default='completed')
    message = models.TextField(blank=True)
    duration = models.FloatField(default=0.0, help_text='Wall time in seconds')

    created_at = models.DateTimeField(default=timezone.now)

    class Meta:
        db_table = 'scenario_runs'
        ordering = ['-created_at']
        verbose_name = 'Scenario Run'
        verbose_name_plural = 'Scenario Runs'
        indexes = [
            models.Index(fields=['-created_at'], name='run_created_idx'),
            models.Index(fields=['name', '-created_at'], name='run_name_created_idx'),
        ]

    def __str__(self):
        return f"{self.name} ({self.reinit}, eta={self.eta:g}) at {self.created_at:%Y-%m-%d %H:%M}"

    @property
    def h(self):
        """Lattice constant 2 pi hbar"""
        return 2.0 * math.pi * self.hbar

    @property
    def improved(self):
        return self.improvement_factor is not None and self.improvement_factor > 1.0

    def as_json(self, detail=False):
        data = {
            'id': self.id,
            'name': self.name,
            'preset': self.preset,
            'potential': self.potential,
            'datum': self.datum,
            'L': self.L,
            'hbar': self.hbar,
            'a': self.a,
            'M': self.M,
            'eta': self.eta,
            'T': self.T,
            'reinit': self.reinit,
            'atoms_retained': self.atoms_retained,
            'segments': self.segments,
            'reconstruction_error': self.reconstruction_error,
            'final_error': self.final_error,
            'improvement_factor': self.improvement_factor,
            'status': self.status,
            'created_at': self.created_at.isoformat(),
        }
        if detail:
            data.update({
                'baseline_error': self.baseline_error,
                'errors': self.errors,
                'summary': self.summary,
                'plot_data': self.plot_data,
                'out_dir': self.out_dir,
                'message': self.message,
                'duration': self.duration,
                'segment_records': [s.as_json() for s in self.segment_records.all()],
            })
        return data


# ========================================================================
# RUN SEGMENT MODEL -- one entry per reinitialization interval
# ========================================================================


class RunSegment(models.Model):
    run = models.ForeignKey(
        ScenarioRun, on_delete=models.CASCADE, related_name='segment_records')
    index = models.PositiveIntegerField()
    start = models.FloatField()
    end = models.FloatField()
    retained = models.PositiveIntegerField(default=0)
    discarded_energy = models.FloatField(default=0.0)

    # width event that closed the segment, if any
    event_time = models.FloatField(null=True, blank=True)
    event_index = models.JSONField(null=True, blank=True)

    class Meta:
        db_table = 'scenario_run_segments'
        ordering = ['run', 'index']
        unique_together = ['run', 'index']

    def __str__(self):
        return f"{self.run.name} segment {self.index} [{self.start:g}, {self.end:g}]"

    def as_json(self):
        return {
            'index': self.index,
            'start': self.start,
            'end': self.end,
            'retained': self.retained,
            'discarded_energy': self.discarded_energy,
            'event_time': self.event_time,
            'event_index': self.event_index,
        }
