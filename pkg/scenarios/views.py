# scenarios/views.py
from django.http import JsonResponse
from django.views.decorators.http import require_GET

from scenarios.models import ScenarioRun
import logging

logger = logging.getLogger(__name__)

MAX_LIMIT = 200


@require_GET
def run_list(request):
    """Recent runs, newest first; ?name= filters, ?limit= caps the page"""
    try:
        limit = min(int(request.GET.get('limit', 50)), MAX_LIMIT)
    except ValueError:
        return JsonResponse({'error': 'Invalid limit'}, status=400)
    if limit < 1:
        return JsonResponse({'error': 'Invalid limit'}, status=400)

    runs = ScenarioRun.objects.all()
    name = request.GET.get('name')
    if name:
        runs = runs.filter(name=name)
    status = request.GET.get('status')
    if status:
        runs = runs.filter(status=status)

    total = runs.count()
    logger.debug(f"Run list: {total} runs (name={name}, status={status})")
    return JsonResponse({
        'count': total,
        'runs': [run.as_json() for run in runs[:limit]],
    })


@require_GET
def run_detail(request, run_id):
    """One run with errors, segments and the plot-data series"""
    try:
        run = ScenarioRun.objects.prefetch_related('segment_records').get(pk=run_id)
    except ScenarioRun.DoesNotExist:
        return JsonResponse({'error': 'Run not found'}, status=404)
    return JsonResponse(run.as_json(detail=True))
