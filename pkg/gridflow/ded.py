"""
Distributed economic dispatch for one generator controller.

Every controller keeps the full cost table of the fleet and a replica of every
generator's reference, so it can predict the dispatch update of the whole fleet
from its own incremental-cost step. Powers are in MW, incremental costs in
$/MWh, frequencies in Hz.
"""
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GeneratorTable:
    beta: np.ndarray
    gamma: np.ndarray
    pmin: np.ndarray
    pmax: np.ndarray
    lag: np.ndarray

    @classmethod
    def from_case(cls, case):
        gens = case.generators
        return cls(
            beta=np.array([g.beta for g in gens]),
            gamma=np.array([g.gamma for g in gens]),
            pmin=np.array([g.pmin for g in gens]),
            pmax=np.array([g.pmax for g in gens]),
            lag=np.array([g.lag_s for g in gens]),
        )

    def __len__(self):
        return len(self.beta)

    def curve(self, lam):
        return reference_from_lambda(lam, self.beta, self.gamma, self.pmin, self.pmax)

    def clamp(self, mw):
        return np.clip(mw, self.pmin, self.pmax)

    def interior(self, references):
        return (references > self.pmin) & (references < self.pmax)


@dataclass
class ControllerState:
    index: int
    lam: float
    references: np.ndarray
    outputs: np.ndarray
    table: GeneratorTable
    kp: float
    ki: float
    tau: float
    weights: dict = field(default_factory=dict)
    prev_freq_error: float = 0.0

    @property
    def reference(self):
        return float(self.references[self.index])

    @property
    def gamma(self):
        return float(self.table.gamma[self.index])


def consensus_step(state, neighbor_lambdas, f_meas, f0):
    """
    One round of the incremental-cost consensus with the frequency PI term.

    ``neighbor_lambdas`` maps neighbor index to the lambda it sent last round;
    neighbors missing from the mapping (dropped or delayed messages) are
    skipped. Updates ``state.lam`` and ``state.prev_freq_error`` in place and
    returns ``(lam, dlam)``.
    """
    consensus = sum(
        weight * (neighbor_lambdas[j] - state.lam)
        for j, weight in state.weights.items()
        if j in neighbor_lambdas
    )
    error = f0 - f_meas
    feedback = 2.0 * state.gamma * (state.kp * (error - state.prev_freq_error) + state.tau * state.ki * error)
    dlam = state.tau * consensus + feedback
    state.lam += dlam
    state.prev_freq_error = error
    return state.lam, dlam


def reference_from_lambda(lam, beta, gamma, pmin, pmax):
    """Output at incremental cost ``lam``, clamped to the generator limits."""
    return np.clip((lam - beta) / (2.0 * gamma), pmin, pmax)


def predict_gen_updates(dlam, references, table):
    """Fleet reference increments implied by ``dlam``; generators sitting on a limit stay put."""
    return np.where(table.interior(references), dlam / (2.0 * table.gamma), 0.0)


def recovery_updates(lam, references, delta, table, gain):
    """
    Pull toward the clamped cost curve at ``lam`` for references displaced by
    limit clamping or by constraint corrections.
    """
    return gain * (table.curve(lam) - (references + delta))


def apply_reference_updates(state, delta):
    """Add ``delta`` to the reference replica and clamp to the limits."""
    state.references = state.table.clamp(state.references + delta)
    return state.references


def advance_output_replica(state):
    """First-order lag estimate of the fleet's actual outputs."""
    table = state.table
    state.outputs = table.clamp(state.outputs + state.tau / table.lag * (state.references - state.outputs))
    return state.outputs
