from django.contrib.auth.decorators import login_required
from django.http import JsonResponse
from django.shortcuts import get_object_or_404
from django.views.decorators.http import require_GET

from .models import AnalysisRun

RUN_LIST_LIMIT = 50


# ==================== RUN REGISTRY API ====================

@login_required
@require_GET
def api_run_list(request):
    """Latest stored runs, summary fields only"""
    runs = AnalysisRun.objects.all()
    command = request.GET.get('command')
    if command:
        runs = runs.filter(command=command)
    return JsonResponse({'runs': [run.summary() for run in runs[:RUN_LIST_LIMIT]]})


@login_required
@require_GET
def api_run_detail(request, run_id):
    """Full report of one run"""
    run = get_object_or_404(AnalysisRun, pk=run_id)
    return JsonResponse({**run.summary(), 'config': run.config, 'report': run.report})
