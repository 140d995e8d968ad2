from django.db import models


class AnalysisRun(models.Model):
    """One invocation of manage.py adamant, stored with --save-run"""
    COMMAND_CHOICES = [
        ('test', 'Association test'),
        ('simulate', 'Simulation'),
        ('coherence', 'Coherence features'),
        ('power', 'Power study'),
    ]

    command = models.CharField(max_length=20, choices=COMMAND_CHOICES)
    created = models.DateTimeField(auto_now_add=True)

    seed = models.BigIntegerField()
    permutations = models.PositiveIntegerField()
    n_jobs = models.IntegerField(default=1)

    adaptive_p = models.FloatField(null=True, blank=True)
    runtime_ms = models.FloatField(null=True, blank=True)

    config = models.JSONField(default=dict)
    report = models.JSONField(default=dict)
    output_path = models.CharField(max_length=500, blank=True)

    def __str__(self):
        if self.adaptive_p is None:
            return f"{self.command} #{self.pk} (seed {self.seed})"
        return f"{self.command} #{self.pk}: p = {self.adaptive_p:.4g}"

    @property
    def pair_count(self):
        return len(self.report.get('pairs', []))

    def summary(self):
        return {
            'id': self.pk,
            'command': self.command,
            'created': self.created.isoformat(),
            'seed': self.seed,
            'permutations': self.permutations,
            'adaptive_p': self.adaptive_p,
            'pairs': self.pair_count,
            'output_path': self.output_path,
        }

    class Meta:
        ordering = ['-created']
