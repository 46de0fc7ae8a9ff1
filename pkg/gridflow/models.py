from django.contrib.auth.models import User
from django.db import models


class SimulationRun(models.Model):
    """
    One recorded simulator run: the scenario document as submitted, the
    effective seed and switches, and the summary derived from its trace.
    """
    STATUS_CHOICES = [
        ('completed', 'Completed'),
        ('failed', 'Failed'),
    ]
    SOURCE_CHOICES = [
        ('cli', 'Command line'),
        ('api', 'REST API'),
    ]

    owner = models.ForeignKey(User, on_delete=models.SET_NULL, null=True, blank=True, related_name='simulation_runs')
    name = models.CharField(max_length=100, blank=True)
    source = models.CharField(max_length=3, choices=SOURCE_CHOICES, default='api')
    scenario = models.JSONField(help_text="Scenario document with the case resolved inline")
    seed = models.PositiveBigIntegerField(default=0)
    duration = models.FloatField(help_text="Simulated time in seconds")
    constraint_enabled = models.BooleanField(default=True)
    penalty_enabled = models.BooleanField(default=True)
    meter_noise = models.FloatField(default=0.0, help_text="Meter noise sigma in p.u.")
    status = models.CharField(max_length=10, choices=STATUS_CHOICES, default='completed')
    summary = models.JSONField(null=True, blank=True)
    error = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.name or 'run'} #{self.pk} ({self.status})"

    @property
    def max_violation(self):
        if not self.summary:
            return None
        return self.summary.get('max_violation')
