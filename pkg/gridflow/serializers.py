from rest_framework import serializers

from .conf import DEFAULTS
from .models import SimulationRun


def _pair(child):
    return serializers.ListField(child=child, min_length=2, max_length=2)


class LineSerializer(serializers.Serializer):
    """One branch: endpoints, reactance and flow limit in p.u."""
    to = serializers.IntegerField()
    x = serializers.FloatField()
    limit = serializers.FloatField()

    def get_fields(self):
        fields = super().get_fields()
        # ``from`` is a keyword, so it cannot be declared as a class attribute
        fields['from'] = serializers.IntegerField()
        return fields


class GeneratorSerializer(serializers.Serializer):
    """Generator bus, quadratic cost coefficients, limits in MW and lag in seconds"""
    bus = serializers.IntegerField()
    alpha = serializers.FloatField()
    beta = serializers.FloatField()
    gamma = serializers.FloatField()
    pmin = serializers.FloatField()
    pmax = serializers.FloatField()
    lag_s = serializers.FloatField(default=0.5)


class LoadSerializer(serializers.Serializer):
    """Load bus and its (time s, MW) schedule"""
    bus = serializers.IntegerField()
    schedule = serializers.ListField(child=_pair(serializers.FloatField()), min_length=1)


class CommEdgesField(serializers.Field):
    """A list of ``[a, b]`` node pairs, or the name of a built-in layout."""
    default_error_messages = {
        'layout': "Unknown layout '{value}'; expected one of: {layouts}.",
    }

    def __init__(self, layouts, **kwargs):
        self.layouts = tuple(layouts)
        self.pairs = serializers.ListField(child=_pair(serializers.IntegerField()))
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        if isinstance(data, str):
            if data not in self.layouts:
                self.fail('layout', value=data, layouts=', '.join(self.layouts))
            return data
        return self.pairs.run_validation(data)

    def to_representation(self, value):
        return value


class CommSerializer(serializers.Serializer):
    controllers = CommEdgesField(layouts=('ring', 'complete'), required=False)
    meters = CommEdgesField(layouts=('power', 'complete'), required=False)


class NetworkCaseSerializer(serializers.Serializer):
    """
    Schema of a network case document. Structural invariants (connectivity,
    positive reactances, one generator per bus) are checked by the grid model.
    """
    base_mva = serializers.FloatField(default=100.0, min_value=1e-9)
    buses = serializers.ListField(child=serializers.IntegerField(), min_length=2)
    lines = LineSerializer(many=True, allow_empty=False)
    generators = GeneratorSerializer(many=True, allow_empty=False)
    loads = LoadSerializer(many=True, required=False, default=list)
    comm = CommSerializer(required=False)


class SwitchesSerializer(serializers.Serializer):
    constraint = serializers.BooleanField(default=True)
    penalty = serializers.BooleanField(default=True)
    meter_noise = serializers.BooleanField(default=True)


class LoadEventSerializer(serializers.Serializer):
    """Linear ramp of ``delta_mw`` at ``bus`` between ``start`` and ``end`` seconds"""
    bus = serializers.IntegerField()
    start = serializers.FloatField(min_value=0.0)
    end = serializers.FloatField(min_value=0.0)
    delta_mw = serializers.FloatField()

    def validate(self, attrs):
        if attrs['end'] < attrs['start']:
            raise serializers.ValidationError("Load event ends before it starts")
        return attrs


class ScenarioSerializer(serializers.Serializer):
    """
    Scenario document: a case (path relative to the scenario file, a bundled
    fixture name, or an inline case object) plus run settings and events.
    """
    name = serializers.CharField(max_length=100, required=False, allow_blank=True, default='')
    case = serializers.JSONField()
    duration = serializers.FloatField(min_value=0.0)
    seed = serializers.IntegerField(min_value=0, max_value=2 ** 64 - 1, default=0)
    settings = serializers.DictField(required=False, default=dict)
    switches = SwitchesSerializer(required=False)
    attachments = serializers.DictField(child=serializers.IntegerField(), required=False, default=dict)
    line_limits = serializers.DictField(child=serializers.FloatField(), required=False, default=dict)
    load_events = LoadEventSerializer(many=True, required=False, default=list)

    def validate_case(self, value):
        if not isinstance(value, (str, dict)):
            raise serializers.ValidationError("Case must be a file name or an inline case object")
        return value

    def validate_settings(self, value):
        unknown = set(value) - set(DEFAULTS)
        if unknown:
            raise serializers.ValidationError(f"Unknown settings: {', '.join(sorted(unknown))}")
        return value

    def validate_attachments(self, value):
        for key in value:
            if not str(key).isdigit() or int(key) < 1:
                raise serializers.ValidationError(f"Attachment key '{key}' is not a generator number")
        return value

    def validate_line_limits(self, value):
        for key, limit in value.items():
            if not str(key).isdigit():
                raise serializers.ValidationError(f"Line limit key '{key}' is not a line number")
            if limit <= 0:
                raise serializers.ValidationError(f"Line {key}: limit must be positive")
        return value

    def validate(self, attrs):
        attrs.setdefault('switches', {'constraint': True, 'penalty': True, 'meter_noise': True})
        return attrs


class SimulationRunSerializer(serializers.ModelSerializer):
    """Recorded run without the scenario payload, for listings"""
    owner = serializers.CharField(source='owner.username', read_only=True, default=None)

    class Meta:
        model = SimulationRun
        fields = [
            'id', 'name', 'source', 'owner', 'seed', 'duration', 'constraint_enabled',
            'penalty_enabled', 'meter_noise', 'status', 'summary', 'error',
            'created_at', 'updated_at',
        ]
        read_only_fields = fields


class SimulationRunDetailSerializer(SimulationRunSerializer):
    """Recorded run including the resolved scenario document"""

    class Meta(SimulationRunSerializer.Meta):
        fields = SimulationRunSerializer.Meta.fields + ['scenario']
        read_only_fields = fields


class CaseSummarySerializer(serializers.Serializer):
    """Counts reported back by case validation"""
    valid = serializers.BooleanField()
    buses = serializers.IntegerField()
    lines = serializers.IntegerField()
    generators = serializers.IntegerField()
    loads = serializers.IntegerField()
    demand_mw = serializers.FloatField()
