# Generated by Django 5.2.6 on 2026-10-18 09:12

import django.db.models.deletion
from django.conf import settings
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
        migrations.swappable_dependency(settings.AUTH_USER_MODEL),
    ]

    operations = [
        migrations.CreateModel(
            name='SimulationRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(blank=True, max_length=100)),
                ('source', models.CharField(choices=[('cli', 'Command line'), ('api', 'REST API')], default='api', max_length=3)),
                ('scenario', models.JSONField(help_text='Scenario document with the case resolved inline')),
                ('seed', models.PositiveBigIntegerField(default=0)),
                ('duration', models.FloatField(help_text='Simulated time in seconds')),
                ('constraint_enabled', models.BooleanField(default=True)),
                ('penalty_enabled', models.BooleanField(default=True)),
                ('meter_noise', models.FloatField(default=0.0, help_text='Meter noise sigma in p.u.')),
                ('status', models.CharField(choices=[('completed', 'Completed'), ('failed', 'Failed')], default='completed', max_length=10)),
                ('summary', models.JSONField(blank=True, null=True)),
                ('error', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
                ('owner', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.SET_NULL, related_name='simulation_runs', to=settings.AUTH_USER_MODEL)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
