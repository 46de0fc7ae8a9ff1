"""
One-step-ahead forecasting: per-bus AR(2) load deltas, DC line-flow
prediction and the overflow check that decides whether the constraint layer
has to act.
"""
from dataclasses import dataclass

import numpy as np

from .numerics import DEFAULT_TOL, pinv


@dataclass(frozen=True)
class OverflowFlags:
    flags: np.ndarray
    sign: np.ndarray

    @classmethod
    def none(cls, n_lines):
        return cls(flags=np.zeros(n_lines, dtype=bool), sign=np.zeros(n_lines))

    @property
    def any(self):
        return bool(self.flags.any())

    def union(self, other):
        """Flags raised by either; where both fire, this object's sign wins."""
        flags = self.flags | other.flags
        sign = np.where(self.flags, self.sign, other.sign)
        return OverflowFlags(flags=flags, sign=np.where(flags, sign, 0.0))


def fit_ar2(samples, tol=DEFAULT_TOL):
    """
    Least-squares ``(phi1, phi2)`` of ``x(t) = phi1 x(t-1) + phi2 x(t-2)``.

    Uses the minimum-norm solution, so a degenerate history (all zero, or
    constant) yields ``(0, 0)`` or the smallest-norm fit instead of failing.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 3:
        return 0.0, 0.0
    design = np.column_stack((x[1:-1], x[:-2]))
    phi = pinv(design, tol) @ x[2:]
    return float(phi[0]), float(phi[1])


def fit_ar2_batch(series, tol=DEFAULT_TOL):
    """Row-wise ``fit_ar2`` over a 2-D array of equal-length histories."""
    series = np.asarray(series, dtype=float)
    if series.shape[1] < 3:
        return np.zeros((series.shape[0], 2))
    design = np.stack((series[:, 1:-1], series[:, :-2]), axis=-1)
    return np.einsum("bij,bj->bi", np.linalg.pinv(design, rtol=tol), series[:, 2:])


def predict_load_delta(phi, last, before):
    """``phi1 * last + phi2 * before``, elementwise when given arrays."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 1:
        return phi[0] * np.asarray(last) + phi[1] * np.asarray(before)
    return phi[:, 0] * last + phi[:, 1] * before


def predict_line_flows(flows, delta_gen, delta_load, hflow, tg, tl):
    """Line flows one step ahead from the current flows and injection increments (p.u.)."""
    return flows + hflow @ (tg @ delta_gen + tl @ delta_load)


def check_overflow(predicted, limits, activation=1.0):
    """Flag lines whose predicted magnitude reaches ``activation`` times the limit."""
    predicted = np.asarray(predicted, dtype=float)
    flags = np.abs(predicted) >= activation * np.asarray(limits)
    return OverflowFlags(flags=flags, sign=np.where(flags, np.sign(predicted), 0.0))


class LoadHistory:
    """
    Rolling per-bus history of load-side injection deltas with one AR(2)
    model per bus, refitted every ``refit_every`` pushes. Samples live in a
    ``window`` by bus ring buffer.
    """

    def __init__(self, n_buses, window=50, refit_every=10, tol=DEFAULT_TOL):
        self.window = window
        self.refit_every = refit_every
        self.tol = tol
        self.buffer = np.zeros((window, n_buses))
        self.phi = np.zeros((n_buses, 2))
        self._pushes = 0

    def __len__(self):
        return min(self._pushes, self.window)

    @property
    def samples(self):
        """Held samples oldest first, one row per bus."""
        order = np.arange(self._pushes - len(self), self._pushes) % self.window
        return self.buffer[order].T

    def push(self, deltas):
        self.buffer[self._pushes % self.window] = deltas
        self._pushes += 1
        if len(self) >= 3 and (self._pushes == 3 or self._pushes % self.refit_every == 0):
            self.refit()

    def refit(self):
        self.phi = fit_ar2_batch(self.samples, self.tol)

    def _back(self, lag):
        return self.buffer[(self._pushes - lag) % self.window]

    def predict(self):
        """Next-step delta per bus; persistence until three samples exist."""
        count = len(self)
        if count == 0:
            return np.zeros(self.buffer.shape[1])
        if count < 3:
            return self._back(1).copy()
        return predict_load_delta(self.phi, self._back(1), self._back(2))
