"""
Simulator settings.

Defaults are layered: built-in values below, then ``settings.GRIDFLOW`` from the
Django settings module, then a scenario's ``settings`` block, then CLI flags.
"""
from dataclasses import asdict, dataclass, fields, replace

from django.conf import settings

from .exceptions import ConfigurationError

DEFAULTS = {
    'tau': 0.01,
    'f0': 60.0,
    'kp': 40.0,
    'ki': 10.0,
    'consensus_gain': 1.0,
    'recovery_gain': 0.02,
    'dse_step': 1.0,
    'dse_rounds': 1,
    'kfp': 2.0,
    'kfi': 0.5,
    'penalty_deadband': 1e-4,
    'inertia': 10.0,
    'damping': 1.0,
    'meter_noise': 0.0,
    'load_noise': 0.0,
    'activation': 1.0,
    'ar_window': 50,
    'ar_refit_every': 10,
    'pinv_tol': 1e-10,
    'drop_probability': 0.0,
    'delay_steps': 0,
    'dse_decimation': 1,
    'control_decimation': 1,
    'dse_preroll_max': 20000,
    'dse_preroll_tol': 1e-12,
}

INTEGER_KEYS = frozenset({
    'ar_window', 'ar_refit_every', 'delay_steps', 'dse_rounds', 'dse_decimation',
    'control_decimation', 'dse_preroll_max',
})


@dataclass(frozen=True)
class SimulationSettings:
    tau: float
    f0: float
    kp: float
    ki: float
    consensus_gain: float
    recovery_gain: float
    dse_step: float
    dse_rounds: int
    kfp: float
    kfi: float
    penalty_deadband: float
    inertia: float
    damping: float
    meter_noise: float
    load_noise: float
    activation: float
    ar_window: int
    ar_refit_every: int
    pinv_tol: float
    drop_probability: float
    delay_steps: int
    dse_decimation: int
    control_decimation: int
    dse_preroll_max: int
    dse_preroll_tol: float

    def __post_init__(self):
        positive = ('tau', 'f0', 'inertia', 'activation', 'pinv_tol', 'dse_step')
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"Setting '{name}' must be positive", {name: getattr(self, name)})
        non_negative = (
            'kp', 'ki', 'consensus_gain', 'recovery_gain', 'kfp', 'kfi', 'penalty_deadband',
            'damping', 'meter_noise', 'load_noise', 'delay_steps', 'dse_preroll_tol',
        )
        for name in non_negative:
            if getattr(self, name) < 0:
                raise ConfigurationError(f"Setting '{name}' must not be negative", {name: getattr(self, name)})
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ConfigurationError("Setting 'drop_probability' must lie in [0, 1]")
        for name in ('ar_window', 'ar_refit_every', 'dse_rounds', 'dse_decimation', 'control_decimation'):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"Setting '{name}' must be at least 1")
        if self.ar_window < 3:
            raise ConfigurationError("Setting 'ar_window' must hold at least 3 samples")

    @classmethod
    def from_mapping(cls, values):
        unknown = set(values) - set(DEFAULTS)
        if unknown:
            raise ConfigurationError(f"Unknown settings: {', '.join(sorted(unknown))}")
        merged = {**DEFAULTS, **values}
        coerced = {}
        for name, value in merged.items():
            try:
                coerced[name] = int(value) if name in INTEGER_KEYS else float(value)
            except (TypeError, ValueError) as exc:
                raise ConfigurationError(f"Setting '{name}' is not numeric", {name: value}) from exc
        return cls(**coerced)

    def override(self, **values):
        """Copy with selected fields replaced, validated like the original."""
        names = {f.name for f in fields(self)}
        unknown = set(values) - names
        if unknown:
            raise ConfigurationError(f"Unknown settings: {', '.join(sorted(unknown))}")
        return replace(self, **values)

    def as_dict(self):
        return asdict(self)


def gridflow_settings(overrides=None):
    """
    Resolve ``settings.GRIDFLOW`` over the built-in defaults, then apply
    ``overrides`` (typically a scenario's ``settings`` block).
    """
    project = getattr(settings, 'GRIDFLOW', {}) or {}
    return SimulationSettings.from_mapping({**project, **(overrides or {})})
