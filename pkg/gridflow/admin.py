from django.contrib import admin

from .models import SimulationRun


@admin.register(SimulationRun)
class SimulationRunAdmin(admin.ModelAdmin):
    list_display = ['id', 'name', 'source', 'owner', 'seed', 'duration', 'status', 'get_max_violation', 'created_at']
    list_filter = ['status', 'source', 'constraint_enabled', 'penalty_enabled', 'created_at']
    search_fields = ['name', 'owner__username', 'error']
    readonly_fields = ['created_at', 'updated_at']

    fieldsets = (
        ('Run', {
            'fields': ('name', 'owner', 'source', 'status', 'error')
        }),
        ('Settings', {
            'fields': ('seed', 'duration', 'constraint_enabled', 'penalty_enabled', 'meter_noise')
        }),
        ('Documents', {
            'fields': ('scenario', 'summary'),
            'classes': ('collapse',)
        }),
        ('Timestamps', {
            'fields': ('created_at', 'updated_at'),
            'classes': ('collapse',)
        }),
    )

    def get_max_violation(self, obj):
        value = obj.max_violation
        return "-" if value is None else f"{value:.4f}"
    get_max_violation.short_description = 'Max violation (p.u.)'
