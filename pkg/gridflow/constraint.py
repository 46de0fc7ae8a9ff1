"""
Line-flow constraint layer run inside every controller step.

A predicted overflow replaces the dispatch update by a particular solution that
cancels the forecast load effect on the flagged lines plus the projection of
the original update onto the kernel of their sensitivity. A live overflow
(seen in the meter estimates) adds a PI penalty that pushes the flagged flows
back under their limits. Work here is in p.u.
"""
import logging
from dataclasses import dataclass, field
from enum import StrEnum
from functools import lru_cache

import numpy as np

from .forecast import OverflowFlags
from .numerics import DEFAULT_TOL, nullspace_basis, pinv, project_onto_columns

logger = logging.getLogger(__name__)


class Mode(StrEnum):
    NORMAL = 'normal'
    CORRECT = 'correct'
    PENALTY = 'penalty'

    @property
    def severity(self):
        return _SEVERITY[self]

    @classmethod
    def most_severe(cls, modes):
        return max(modes, key=lambda mode: mode.severity, default=cls.NORMAL)


_SEVERITY = {Mode.NORMAL: 0, Mode.CORRECT: 1, Mode.PENALTY: 2}


@dataclass
class ConstraintState:
    n_lines: int
    kfp: float = 2.0
    kfi: float = 0.5
    deadband: float = 1e-4
    mode: Mode = Mode.NORMAL
    prev_excess: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.prev_excess is None:
            self.prev_excess = np.full(self.n_lines, np.nan)

    def forget(self):
        self.prev_excess[:] = np.nan


@dataclass(frozen=True)
class Sensitivity:
    """Everything the correction needs for one flag pattern."""
    hv: np.ndarray
    hvtg: np.ndarray
    hvtl: np.ndarray
    inverse: np.ndarray
    projector: np.ndarray

    @classmethod
    def build(cls, overflow, matrices, tol=DEFAULT_TOL):
        hv = build_violation_matrix(overflow, matrices.hflow)
        hvtg = hv @ matrices.tg
        n_gen = hvtg.shape[1]
        return cls(
            hv=hv,
            hvtg=hvtg,
            hvtl=hv @ matrices.tl,
            inverse=pinv(hvtg, tol),
            projector=project_onto_columns(nullspace_basis(hvtg, tol), np.eye(n_gen), tol),
        )


class SensitivityCache:
    """
    ``Sensitivity`` per (flags, sign) pattern, shared by every controller of a
    run.
    """

    def __init__(self, matrices, tol=DEFAULT_TOL, maxsize=128):
        self.matrices = matrices
        self.tol = tol
        self._lookup = lru_cache(maxsize=maxsize)(self._build)

    def __call__(self, overflow):
        return self._lookup(overflow.flags.tobytes(), overflow.sign.tobytes())

    def _build(self, flags, sign):
        overflow = OverflowFlags(flags=np.frombuffer(flags, dtype=bool), sign=np.frombuffer(sign))
        logger.debug("Factoring line sensitivities for lines %s",
                     [int(u) + 1 for u in np.flatnonzero(overflow.flags)])
        return Sensitivity.build(overflow, self.matrices, self.tol)

    def info(self):
        return self._lookup.cache_info()


def live_overflow(flows, limits, deadband=0.0):
    """Lines whose estimated magnitude exceeds the limit by more than ``deadband``."""
    flows = np.asarray(flows, dtype=float)
    flags = np.abs(flows) - limits > deadband
    return OverflowFlags(flags=flags, sign=np.where(flags, np.sign(flows), 0.0))


def build_violation_matrix(overflow, hflow):
    """Flagged rows of ``hflow`` times their violation sign, zero rows elsewhere."""
    return overflow.sign[:, None] * hflow


def particular_correction(hv, tg, tl, delta_load, tol=DEFAULT_TOL):
    return -pinv(hv @ tg, tol) @ (hv @ (tl @ delta_load))


def kernel_correction(hvtg, delta_gen, tol=DEFAULT_TOL):
    """Closest vector to ``delta_gen`` that leaves the flagged flows unchanged."""
    return project_onto_columns(nullspace_basis(hvtg, tol), delta_gen, tol)


def penalty_update(flows, limits, state, hvtg, live, tol=DEFAULT_TOL, inverse=None):
    """
    PI penalty on the positive excess of live-violated lines. On a line's first
    violated step the previous excess is taken equal to the current one, so the
    difference term starts at zero. ``inverse`` is ``pinv(hvtg)`` when known.
    """
    excess = np.where(live.flags, live.sign * flows - limits, 0.0)
    previous = np.where(np.isnan(state.prev_excess), excess, state.prev_excess)
    slope = np.where(live.flags, excess - previous, 0.0)
    forcing = state.kfp * slope + state.kfi * excess
    state.prev_excess = np.where(live.flags, excess, np.nan)
    if inverse is None:
        inverse = pinv(hvtg, tol)
    return -inverse @ forcing


def constrain_step(delta_gen, predicted, delta_load, flows, limits, state, matrices,
                   penalty=True, tol=DEFAULT_TOL, cache=None):
    """
    Apply the correction and penalty to a fleet update ``delta_gen``.

    ``predicted`` are the forecast overflow flags, ``flows`` the live estimated
    flows. ``cache`` is an optional ``SensitivityCache`` over ``matrices``.
    Returns ``(delta, mode, flags)`` where ``flags`` is the union of predicted
    and live flags the decision was based on.
    """
    live = live_overflow(flows, limits, state.deadband) if penalty else OverflowFlags.none(len(limits))
    flags = predicted.union(live)
    if not flags.any:
        state.forget()
        state.mode = Mode.NORMAL
        return delta_gen, state.mode, flags

    sens = cache(flags) if cache is not None else Sensitivity.build(flags, matrices, tol)
    delta = -sens.inverse @ (sens.hvtl @ delta_load) + sens.projector @ delta_gen
    if live.any:
        delta = delta + penalty_update(flows, limits, state, sens.hvtg, live, tol, sens.inverse)
        state.mode = Mode.PENALTY
    else:
        state.forget()
        state.mode = Mode.CORRECT
    return delta, state.mode, flags
