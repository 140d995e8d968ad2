# Generated by Django 6.0 on 2026-10-19 10:00

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="AnalysisRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                (
                    "command",
                    models.CharField(
                        choices=[
                            ("test", "Association test"),
                            ("simulate", "Simulation"),
                            ("coherence", "Coherence features"),
                            ("power", "Power study"),
                        ],
                        max_length=20,
                    ),
                ),
                ("created", models.DateTimeField(auto_now_add=True)),
                ("seed", models.BigIntegerField()),
                ("permutations", models.PositiveIntegerField()),
                ("n_jobs", models.IntegerField(default=1)),
                ("adaptive_p", models.FloatField(blank=True, null=True)),
                ("runtime_ms", models.FloatField(blank=True, null=True)),
                ("config", models.JSONField(default=dict)),
                ("report", models.JSONField(default=dict)),
                ("output_path", models.CharField(blank=True, max_length=500)),
            ],
            options={
                "ordering": ["-created"],
            },
        ),
    ]
