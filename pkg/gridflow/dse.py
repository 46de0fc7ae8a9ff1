"""
Distributed state estimation on the smart-meter network.

Each meter measures the net injection at its own bus and keeps a vector ``Z``
with one entry per meter. Neighbours' vectors are averaged into every entry
except the meter's own, which always holds the latest local measurement. Angles
then follow from a weighted least-squares fit of ``Z`` to the observation model.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .exceptions import UnobservableError

logger = logging.getLogger(__name__)


@dataclass
class MeterState:
    index: int
    z: np.ndarray
    step: float = 1.0
    weights: dict = field(default_factory=dict)
    theta: np.ndarray | None = None

    @classmethod
    def initial(cls, index, size, measurement, step=1.0, weights=None):
        """Local entry set to ``measurement``, everything else zero."""
        z = np.zeros(size)
        z[index] = measurement
        return cls(index=index, z=z, step=step, weights=dict(weights or {}))


def dse_step(state, neighbor_z, local):
    """
    Propagate one round. ``neighbor_z`` maps neighbour index to the vector it
    sent last round; missing neighbours are skipped. Returns the new ``Z``.
    """
    refreshed = state.z.copy()
    refreshed[state.index] = local
    pull = np.zeros_like(refreshed)
    for j, weight in state.weights.items():
        if j in neighbor_z:
            pull += weight * (neighbor_z[j] - refreshed)
    pull[state.index] = 0.0
    state.z = refreshed + state.step * pull
    return state.z


def gain_matrix(hobs, r):
    """``(H^T R^-1 H)^-1 H^T R^-1``; raises ``UnobservableError`` when the normal matrix is singular."""
    weights = np.diag(1.0 / np.diag(r))
    normal = hobs.T @ weights @ hobs
    rank = np.linalg.matrix_rank(normal)
    if rank < normal.shape[0]:
        raise UnobservableError(
            "observation model is unobservable",
            {'rank': int(rank), 'states': int(normal.shape[0])},
        )
    return linalg.solve(normal, hobs.T @ weights, assume_a='pos')


def wls_estimate(z, hobs, r):
    """Weighted least-squares angles (non-reference buses) from measurement vector ``z``."""
    return gain_matrix(hobs, r) @ z


def flows_from_states(theta, hflow):
    return hflow @ theta


@dataclass
class MeterNetwork:
    """
    Every meter of a case in matrix form. Row ``i`` of ``z`` is meter ``i``'s
    vector and ``weights[i, j]`` the weight meter ``i`` gives to meter ``j``;
    ``propagate`` is ``dse_step`` applied to all rows at once.
    """
    z: np.ndarray
    weights: np.ndarray
    steps: np.ndarray

    @classmethod
    def initial(cls, measurements, weights, step=1.0):
        """Each meter knows only its own measurement; ``weights`` is ``{i: {j: w}}``."""
        measurements = np.asarray(measurements, dtype=float)
        n = len(measurements)
        matrix = np.zeros((n, n))
        for i, adjacent in weights.items():
            for j, w in adjacent.items():
                matrix[i, j] = w
        return cls(z=np.diag(measurements), weights=matrix, steps=np.full(n, float(step)))

    @classmethod
    def from_meters(cls, meters):
        meters = sorted(meters, key=lambda meter: meter.index)
        network = cls.initial([meter.z[meter.index] for meter in meters],
                              {meter.index: meter.weights for meter in meters})
        network.z = np.array([meter.z for meter in meters], dtype=float)
        network.steps = np.array([meter.step for meter in meters], dtype=float)
        return network

    def __len__(self):
        return len(self.z)

    @property
    def adjacency(self):
        return self.weights != 0.0

    def propagate(self, measured, sent, delivered=None):
        """
        One round for every meter. Row ``j`` of ``sent`` is what meter ``j``
        posted; ``delivered[i, j]`` tells whether it reached meter ``i``, and
        ``None`` means every link delivered. Returns the new ``z``.
        """
        weights = self.weights if delivered is None else self.weights * delivered
        refreshed = self.z.copy()
        diagonal = np.diag_indices_from(refreshed)
        refreshed[diagonal] = measured
        pull = weights @ sent - weights.sum(axis=1)[:, None] * refreshed
        pull[diagonal] = 0.0
        self.z = refreshed + self.steps[:, None] * pull
        return self.z

    def preroll(self, truth, tol, max_rounds):
        """
        Propagate over ideal links with the plant frozen at ``truth`` until no
        entry moves by more than ``tol``. Returns the number of rounds, or
        ``None`` when ``max_rounds`` ran out.
        """
        for rounds in range(1, max_rounds + 1):
            previous = self.z
            self.propagate(truth, previous)
            if np.abs(self.z - previous).max() <= tol:
                logger.debug("Meter consensus converged after %d pre-roll rounds", rounds)
                return rounds
        logger.warning("Meter consensus did not converge within %d pre-roll rounds", max_rounds)
        return None
