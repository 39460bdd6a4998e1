from django.contrib import admin

from scenarios.models import RunSegment, ScenarioRun


class RunSegmentInline(admin.TabularInline):
    model = RunSegment
    extra = 0
    readonly_fields = ['index', 'start', 'end', 'retained', 'discarded_energy',
                       'event_time', 'event_index']
    can_delete = False


@admin.register(ScenarioRun)
class ScenarioRunAdmin(admin.ModelAdmin):
    list_display = ['name', 'potential', 'reinit', 'eta', 'T', 'atoms_retained',
                    'final_error', 'improvement_factor', 'status', 'created_at']
    list_filter = ['status', 'potential', 'reinit']
    search_fields = ['name', 'preset']
    readonly_fields = ['errors', 'summary', 'created_at', 'duration']
    exclude = ['plot_data']
    inlines = [RunSegmentInline]
