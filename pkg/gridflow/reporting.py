"""Run summaries and the CSV trace writer."""
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from .engine import MODES

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.9g'

# mean wall time per engine step, s
STEP_BUDGET = 1e-3


@dataclass(frozen=True)
class RunSummary:
    steps: int
    final_cost: float | None
    max_violation: float
    max_violation_line: int | None
    violations: dict = field(default_factory=dict)
    lambda_spread: float | None = None
    final_frequency: float | None = None
    frequency_rms: float = 0.0
    final_flows: dict = field(default_factory=dict)
    mode_counts: dict = field(default_factory=dict)
    wall_per_step: float = 0.0
    within_step_budget: bool | None = None

    def as_dict(self):
        return asdict(self)


def summarize(trace, watch_lines=(), step_budget=STEP_BUDGET):
    """
    Summary figures from a trace alone. ``violations`` maps line number to the
    largest excess over its limit; ``final_flows`` reports the last recorded
    flow on the lines in ``watch_lines`` and on every line that ever violated.
    """
    steps = len(trace)
    counts = np.bincount(trace.mode_codes, minlength=len(MODES)) if steps else np.zeros(len(MODES), int)
    mode_counts = {mode.value: int(count) for mode, count in zip(MODES, counts)}
    if not steps:
        return RunSummary(steps=0, final_cost=None, max_violation=0.0, max_violation_line=None,
                          mode_counts=mode_counts)

    excess = np.maximum(np.abs(trace.flow) - trace.limits, 0.0).max(axis=0)
    violated = {int(u + 1): float(value) for u, value in enumerate(excess) if value > 0}
    worst = int(np.argmax(excess))
    reported = sorted(set(violated) | {int(u) for u in watch_lines})
    wall_per_step = trace.wall_seconds / steps
    if wall_per_step > step_budget:
        logger.warning("Mean step took %.3g ms, over the %.3g ms budget",
                       wall_per_step * 1e3, step_budget * 1e3)
    return RunSummary(
        steps=steps,
        final_cost=float(trace.cost[-1]),
        max_violation=float(excess[worst]),
        max_violation_line=worst + 1 if excess[worst] > 0 else None,
        violations=violated,
        lambda_spread=float(np.ptp(trace.lam[-1])) if trace.lam.shape[1] else 0.0,
        final_frequency=float(trace.f[-1]),
        frequency_rms=float(np.sqrt(np.mean((trace.f - trace.f0) ** 2))),
        final_flows={u: float(trace.flow[-1, u - 1]) for u in reported},
        mode_counts=mode_counts,
        wall_per_step=wall_per_step,
        within_step_budget=wall_per_step <= step_budget,
    )


def trace_frame(trace, downsample=1):
    """
    Trace as a ``DataFrame`` with columns ``t, f, lambda_i, ref_i, act_i,
    flow_u, est_flow_u, of_u, mode, cost``; ``est_flow`` is the estimate seen
    by the first controller.
    """
    rows = slice(None, None, max(int(downsample), 1))
    n_generators = trace.lam.shape[1]
    n_lines = trace.flow.shape[1]
    columns = {'t': trace.t[rows], 'f': trace.f[rows]}
    for prefix, values in (('lambda', trace.lam), ('ref', trace.ref), ('act', trace.act)):
        for i in range(n_generators):
            columns[f'{prefix}_{i + 1}'] = values[rows, i]
    for u in range(n_lines):
        columns[f'flow_{u + 1}'] = trace.flow[rows, u]
    first = trace.est_flow[:, 0, :] if n_generators else np.zeros_like(trace.flow)
    for u in range(n_lines):
        columns[f'est_flow_{u + 1}'] = first[rows, u]
    for u in range(n_lines):
        columns[f'of_{u + 1}'] = trace.of[rows, u].astype(int)
    columns['mode'] = np.asarray(trace.modes, dtype=object)[rows] if len(trace) else np.array([], dtype=object)
    columns['cost'] = trace.cost[rows]
    return pd.DataFrame(columns)


def write_trace_csv(trace, path, downsample=1):
    trace_frame(trace, downsample).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path
