from django.contrib import admin

from .models import AnalysisRun


@admin.register(AnalysisRun)
class AnalysisRunAdmin(admin.ModelAdmin):
    list_display = ('id', 'command', 'created', 'seed', 'permutations', 'adaptive_p')
    search_fields = ('output_path',)
    list_filter = ('command', 'created')
    readonly_fields = ('created', 'runtime_ms', 'config', 'report')
