"""
Ground-truth plant: lossless DC flow, one aggregate frequency, first-order
generator lag and scheduled loads. Everything is in p.u. on the case base
except frequency (Hz) and time (s).
"""
from dataclasses import dataclass

import numpy as np


@dataclass
class PlantState:
    outputs: np.ndarray
    loads: np.ndarray
    f: float
    theta: np.ndarray
    flows: np.ndarray
    t: float = 0.0


def solve_dc_flow(injections, matrices, participation):
    """
    Angles (reference included) and line flows for ``injections``. Any
    imbalance is taken out in proportion to ``participation`` first; it
    shows up in frequency, not in the flows.
    """
    balanced = injections - injections.sum() * participation
    theta = matrices.angles(balanced)
    return theta, matrices.hflow @ theta[1:]


def step_frequency(f, generation, load, inertia, damping, tau, f0):
    return f + tau / inertia * (generation - load - damping * (f - f0))


def step_generators(actual, references, tau, lag, pmin, pmax):
    return np.clip(actual + tau / lag * (references - actual), pmin, pmax)


def step_loads(schedule, t, sigma=0.0, rng=None):
    """Nodal draw at ``t`` from a ``LoadSchedule``; Gaussian noise (sigma in p.u.) only on buses carrying a load."""
    draw = schedule.at(t)
    if sigma > 0 and len(schedule.loaded):
        draw[schedule.loaded] += sigma * rng.standard_normal(len(schedule.loaded))
    return draw


class Plant:
    """
    The simulated grid. An imbalance between generation and load is shared
    among generator buses by P_max share (``participation``) before the flows
    are solved, and drives the single frequency state.
    """

    def __init__(self, case, matrices, settings, outputs, rng):
        self.case = case
        self.matrices = matrices
        self.settings = settings
        self.rng = rng
        base = case.base_mva
        gens = case.generators
        self.pmin = np.array([g.pmin for g in gens]) / base
        self.pmax = np.array([g.pmax for g in gens]) / base
        self.lag = np.array([g.lag_s for g in gens])
        self.coefficients = np.array([[g.alpha, g.beta, g.gamma] for g in gens]).reshape(-1, 3)
        self.load_sigma = settings.load_noise / base
        self.schedule = case.load_schedule()

        self.participation = np.zeros(case.n_buses)
        np.add.at(self.participation, matrices.gen_columns, self.pmax / self.pmax.sum())

        loads = step_loads(self.schedule, 0.0, self.load_sigma, rng)
        outputs = np.clip(np.asarray(outputs, dtype=float), self.pmin, self.pmax)
        self.state = PlantState(outputs=outputs, loads=loads, f=settings.f0,
                                theta=np.zeros(case.n_buses), flows=np.zeros(case.n_lines))
        self._refresh_flows()

    def injections(self):
        """Net nodal injection, generation minus load, in bus order."""
        net = -self.state.loads.copy()
        np.add.at(net, self.matrices.gen_columns, self.state.outputs)
        return net

    def _refresh_flows(self):
        self.state.theta, self.state.flows = solve_dc_flow(self.injections(), self.matrices, self.participation)

    def advance(self, references):
        """One step toward ``references`` (p.u.)."""
        s, state = self.settings, self.state
        state.f = step_frequency(state.f, state.outputs.sum(), state.loads.sum(),
                                 s.inertia, s.damping, s.tau, s.f0)
        state.outputs = step_generators(state.outputs, references, s.tau, self.lag, self.pmin, self.pmax)
        state.t += s.tau
        state.loads = step_loads(self.schedule, state.t, self.load_sigma, self.rng)
        self._refresh_flows()
        return state

    def cost(self):
        """Total fuel cost of the actual outputs in $/h."""
        mw = self.state.outputs * self.case.base_mva
        alpha, beta, gamma = self.coefficients.T
        return float(np.sum(alpha + beta * mw + gamma * mw * mw))
