"""
Centralised reference solvers. Slow and simple on purpose: they only exist to
check the distributed result and to feed the ``compare`` command.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EmptyFeasibleSetError, InfeasibleDemandError
from .grid import build_matrices, ptdf

logger = logging.getLogger(__name__)

BISECTION_TOL = 1e-9
FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class DispatchSolution:
    outputs: np.ndarray
    lam: float
    cost: float
    binding: list = field(default_factory=list)

    def as_dict(self):
        return {
            'outputs_mw': [float(p) for p in self.outputs],
            'lambda': float(self.lam),
            'cost': float(self.cost),
            'binding': list(self.binding),
        }


def dispatch_cost(generators, outputs):
    """Total $/h of ``outputs`` (MW) under the generators' quadratic costs."""
    return float(sum(gen.cost(p) for gen, p in zip(generators, outputs)))


def _limit_bindings(generators, outputs, tol=1e-6):
    binding = []
    for gen, p in zip(generators, outputs):
        if p <= gen.pmin + tol:
            binding.append(f"generator {gen.number} at pmin")
        elif p >= gen.pmax - tol:
            binding.append(f"generator {gen.number} at pmax")
    return binding


def centralized_ed(generators, demand):
    """
    Economic dispatch by bisection on the incremental cost until the power
    mismatch is below ``BISECTION_TOL`` MW.
    """
    beta = np.array([g.beta for g in generators])
    gamma = np.array([g.gamma for g in generators])
    pmin = np.array([g.pmin for g in generators])
    pmax = np.array([g.pmax for g in generators])
    if not pmin.sum() - BISECTION_TOL <= demand <= pmax.sum() + BISECTION_TOL:
        raise InfeasibleDemandError(
            f"demand {demand:.3f} MW outside generator range [{pmin.sum():.3f}, {pmax.sum():.3f}] MW",
            {'demand': demand, 'min': float(pmin.sum()), 'max': float(pmax.sum())},
        )

    def outputs_at(lam):
        return np.clip((lam - beta) / (2.0 * gamma), pmin, pmax)

    low = float(np.min(beta + 2.0 * gamma * pmin))
    high = float(np.max(beta + 2.0 * gamma * pmax))
    lam = 0.5 * (low + high)
    for _ in range(200):
        lam = 0.5 * (low + high)
        mismatch = outputs_at(lam).sum() - demand
        if abs(mismatch) < BISECTION_TOL:
            break
        if mismatch > 0:
            high = lam
        else:
            low = lam
    outputs = outputs_at(lam)
    return DispatchSolution(
        outputs=outputs,
        lam=lam,
        cost=dispatch_cost(generators, outputs),
        binding=_limit_bindings(generators, outputs),
    )


def centralized_dcopf_bruteforce(case, demand, step=1.0, t=0.0):
    """
    Exhaustive DC-OPF over a ``step`` MW grid for at most three generators.

    The last generator takes up the balance. Loads keep the case's spatial
    distribution at time ``t``, scaled to ``demand``.
    """
    if case.n_generators > 3:
        raise ValueError("brute-force search supports at most three generators")
    if step <= 0:
        raise ValueError("grid step must be positive")

    generators = case.generators
    matrices = build_matrices(case)
    sensitivity = ptdf(matrices)
    limits = case.limits()
    base = case.base_mva
    load_shape = case.load_vector(t)
    if load_shape.sum() > 0:
        load_shape = load_shape / load_shape.sum()
    draw = load_shape * demand / base

    axes = [np.arange(g.pmin, g.pmax + 0.5 * step, step) for g in generators[:-1]]
    last = generators[-1]
    if axes:
        head = np.array(np.meshgrid(*axes, indexing='ij')).reshape(len(axes), -1).T
    else:
        head = np.zeros((1, 0))
    tail = demand - head.sum(axis=1)
    keep = (tail >= last.pmin - FEASIBILITY_TOL) & (tail <= last.pmax + FEASIBILITY_TOL)
    candidates = np.column_stack((head[keep], tail[keep]))

    injections = np.tile(-draw, (len(candidates), 1))
    injections[:, matrices.gen_columns] += candidates / base
    flows = injections @ sensitivity.T
    feasible = np.all(np.abs(flows) <= limits + FEASIBILITY_TOL, axis=1)
    candidates = candidates[feasible]

    if not len(candidates):
        raise EmptyFeasibleSetError(
            f"no dispatch on a {step} MW grid meets demand {demand} MW within the line limits",
            {'demand': demand, 'step': step},
        )

    alpha = np.array([g.alpha for g in generators])
    beta = np.array([g.beta for g in generators])
    gamma = np.array([g.gamma for g in generators])
    costs = (alpha + beta * candidates + gamma * candidates ** 2).sum(axis=1)
    best = candidates[np.argmin(costs)]
    best_cost = dispatch_cost(generators, best)

    injections = -draw.copy()
    injections[matrices.gen_columns] += best / base
    flows = sensitivity @ injections
    binding = _limit_bindings(generators, best)
    binding += [
        f"{line.label} at limit"
        for line, flow in zip(case.lines, flows)
        if abs(flow) >= line.limit - step / base
    ]
    marginal = beta + 2.0 * gamma * best
    return DispatchSolution(outputs=best, lam=float(marginal.mean()), cost=best_cost, binding=binding)


def compare_dispatch(case, distributed_mw, demand, step=1.0, t=0.0):
    """
    Table of the distributed dispatch against economic dispatch and, for
    small cases, the brute-force DC-OPF.
    """
    generators = case.generators
    distributed_mw = np.asarray(distributed_mw, dtype=float)
    ed = centralized_ed(generators, demand)
    opf = None
    if case.n_generators <= 3:
        try:
            opf = centralized_dcopf_bruteforce(case, demand, step, t)
        except EmptyFeasibleSetError as exc:
            logger.warning("DC-OPF oracle found no feasible point: %s", exc)

    rows = []
    for position, gen in enumerate(generators):
        row = {
            'generator': gen.number,
            'bus': gen.bus,
            'distributed_mw': float(distributed_mw[position]),
            'ed_mw': float(ed.outputs[position]),
        }
        if opf is not None:
            row['dcopf_mw'] = float(opf.outputs[position])
            row['deviation_mw'] = float(distributed_mw[position] - opf.outputs[position])
        rows.append(row)
    return {
        'demand_mw': float(demand),
        'generators': rows,
        'distributed_cost': dispatch_cost(generators, distributed_mw),
        'ed': ed.as_dict(),
        'dcopf': opf.as_dict() if opf is not None else None,
    }
