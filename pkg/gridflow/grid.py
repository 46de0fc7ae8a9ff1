"""
Network case model and the static DC matrices derived from it.

Bus order is the order of ``buses`` in the case document and the first bus is
the angle reference. Lines are numbered from 1 in document order, generators
likewise, so ``line 24`` always means the 24th entry of ``lines``.
"""
import json
import logging
from dataclasses import dataclass, field, replace
from collections.abc import Mapping

import networkx as nx
import numpy as np

from .exceptions import CaseError
from .numerics import DEFAULT_TOL, pinv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Line:
    number: int
    from_bus: int
    to_bus: int
    x: float
    limit: float

    @property
    def label(self):
        return f"line {self.number} ({self.from_bus}-{self.to_bus})"


@dataclass(frozen=True)
class Generator:
    number: int
    bus: int
    alpha: float
    beta: float
    gamma: float
    pmin: float
    pmax: float
    lag_s: float = 0.5

    def cost(self, mw):
        """Quadratic fuel cost in $/h at ``mw``."""
        return self.alpha + self.beta * mw + self.gamma * mw * mw


@dataclass(frozen=True)
class Load:
    """Scheduled draw at one bus; breakpoints in seconds, values in p.u."""
    bus: int
    times: tuple
    values: tuple

    def at(self, t):
        return float(np.interp(t, self.times, self.values))

    def plus_ramp(self, start, end, delta):
        """Schedule with a linear ramp of ``delta`` p.u. between ``start`` and ``end`` added."""
        grid = sorted(set(self.times) | {start, end})

        def ramp(t):
            if end <= start:
                return delta if t >= start else 0.0
            return delta * min(max((t - start) / (end - start), 0.0), 1.0)

        return replace(self, times=tuple(grid), values=tuple(self.at(t) + ramp(t) for t in grid))


@dataclass(frozen=True)
class LoadSchedule:
    """Nodal draws (p.u.) at the merged breakpoints of every load; exact between them."""
    times: np.ndarray
    draws: np.ndarray
    loaded: np.ndarray

    @classmethod
    def from_case(cls, case):
        times = np.array(sorted({t for load in case.loads for t in load.times} or {0.0}))
        index = case.bus_index
        return cls(
            times=times,
            draws=np.array([case.load_vector(t) for t in times]).reshape(len(times), case.n_buses),
            loaded=np.array(sorted({index[load.bus] for load in case.loads}), dtype=int),
        )

    def at(self, t):
        times, draws = self.times, self.draws
        if t <= times[0]:
            return draws[0].copy()
        if t >= times[-1]:
            return draws[-1].copy()
        k = int(np.searchsorted(times, t, side='right')) - 1
        w = (t - times[k]) / (times[k + 1] - times[k])
        return (1.0 - w) * draws[k] + w * draws[k + 1]


@dataclass(frozen=True)
class NetworkCase:
    base_mva: float
    buses: tuple
    lines: tuple
    generators: tuple
    loads: tuple
    controller_edges: tuple
    meter_edges: tuple
    name: str = ''

    @property
    def n_buses(self):
        return len(self.buses)

    @property
    def n_lines(self):
        return len(self.lines)

    @property
    def n_generators(self):
        return len(self.generators)

    @property
    def reference_bus(self):
        return self.buses[0]

    @property
    def bus_index(self):
        return {bus: position for position, bus in enumerate(self.buses)}

    @property
    def generator_buses(self):
        return tuple(gen.bus for gen in self.generators)

    @property
    def load_side_buses(self):
        """Buses with a load-injection column: every bus without a generator, plus mixed buses."""
        gen_buses = set(self.generator_buses)
        load_buses = {load.bus for load in self.loads}
        return tuple(bus for bus in self.buses if bus not in gen_buses or bus in load_buses)

    def limits(self):
        return np.array([line.limit for line in self.lines])

    def load_vector(self, t):
        """Nodal load draw in p.u. at time ``t``, in bus order."""
        draw = np.zeros(self.n_buses)
        index = self.bus_index
        for load in self.loads:
            draw[index[load.bus]] += load.at(t)
        return draw

    def load_schedule(self):
        return LoadSchedule.from_case(self)

    def demand_mw(self, t=0.0):
        return float(self.load_vector(t).sum() * self.base_mva)

    def with_line_limits(self, overrides):
        """Copy with limits replaced for ``{line number: p.u.}``."""
        lines = list(self.lines)
        for number, limit in overrides.items():
            number = int(number)
            if not 1 <= number <= len(lines):
                raise CaseError(f"line {number} does not exist", {'line': number})
            if not limit > 0:
                raise CaseError(f"{lines[number - 1].label}: limit must be positive", {'line': number})
            lines[number - 1] = replace(lines[number - 1], limit=float(limit))
        return replace(self, lines=tuple(lines))

    def with_load_ramp(self, bus, start, end, delta_mw):
        """Copy with a ramp of ``delta_mw`` added to the load at ``bus``."""
        if bus not in self.bus_index:
            raise CaseError(f"load event refers to unknown bus {bus}", {'bus': bus})
        delta = delta_mw / self.base_mva
        loads = list(self.loads)
        for position, load in enumerate(loads):
            if load.bus == bus:
                loads[position] = load.plus_ramp(start, end, delta)
                break
        else:
            loads.append(Load(bus=bus, times=(0.0,), values=(0.0,)).plus_ramp(start, end, delta))
        return replace(self, loads=tuple(loads))

    def power_graph(self):
        graph = nx.MultiGraph()
        graph.add_nodes_from(self.buses)
        graph.add_edges_from((line.from_bus, line.to_bus) for line in self.lines)
        return graph

    def controller_graph(self):
        graph = nx.Graph()
        graph.add_nodes_from(self.generator_buses)
        graph.add_edges_from(self.controller_edges)
        return graph

    def meter_graph(self):
        graph = nx.Graph()
        graph.add_nodes_from(self.buses)
        graph.add_edges_from(self.meter_edges)
        return graph


@dataclass(frozen=True)
class GridMatrices:
    bfull: np.ndarray
    t: np.ndarray
    hflow: np.ndarray
    tg: np.ndarray
    tl: np.ndarray
    hobs: np.ndarray
    r: np.ndarray
    gen_columns: np.ndarray
    load_columns: np.ndarray
    htg: np.ndarray = field(init=False)
    htl: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, 'htg', self.hflow @ self.tg)
        object.__setattr__(self, 'htl', self.hflow @ self.tl)
        for value in vars(self).values():
            if isinstance(value, np.ndarray):
                value.setflags(write=False)

    @property
    def reduced(self):
        """Bfull with the reference-bus column removed."""
        return self.bfull[:, 1:]

    def angles(self, injections):
        """Full angle vector with the reference angle pinned to zero."""
        return np.concatenate(([0.0], self.t @ injections))


def load_case(document, name=''):
    """
    Parse and validate a case document (JSON text or an already decoded
    mapping) into a ``NetworkCase``. Schema problems and broken invariants
    raise ``CaseError`` naming the offending element.
    """
    from .serializers import NetworkCaseSerializer

    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise CaseError(f"case document is not valid JSON: {exc}") from exc
    if not isinstance(document, Mapping):
        raise CaseError("case document must be a JSON object")

    serializer = NetworkCaseSerializer(data=document)
    if not serializer.is_valid():
        raise CaseError("case document failed schema validation", serializer.errors)
    data = serializer.validated_data
    base = data['base_mva']

    lines = tuple(
        Line(number=n, from_bus=item['from'], to_bus=item['to'], x=item['x'], limit=item['limit'])
        for n, item in enumerate(data['lines'], start=1)
    )
    generators = tuple(
        Generator(number=n, **item) for n, item in enumerate(data['generators'], start=1)
    )
    loads = tuple(
        Load(
            bus=item['bus'],
            times=tuple(point[0] for point in item['schedule']),
            values=tuple(point[1] / base for point in item['schedule']),
        )
        for item in data['loads']
    )
    comm = data.get('comm') or {}
    gen_buses = tuple(gen.bus for gen in generators)
    meter_edges = _comm_edges(comm.get('meters'), data['buses'], [(line.from_bus, line.to_bus) for line in lines])
    controller_edges = _comm_edges(comm.get('controllers'), gen_buses, _ring(gen_buses))

    case = NetworkCase(
        base_mva=base,
        buses=tuple(data['buses']),
        lines=lines,
        generators=generators,
        loads=loads,
        controller_edges=tuple(tuple(edge) for edge in controller_edges),
        meter_edges=tuple(tuple(edge) for edge in meter_edges),
        name=name,
    )
    check_case(case)
    logger.debug("Loaded case %s: %d buses, %d lines, %d generators",
                 name or '<inline>', case.n_buses, case.n_lines, case.n_generators)
    return case


def _comm_edges(layout, nodes, default):
    """Explicit pairs, ``'complete'`` over ``nodes``, or ``default`` for the other named layout."""
    if layout == 'complete':
        return tuple(nx.complete_graph(nodes).edges())
    if not layout or isinstance(layout, str):
        return default
    return layout


def _ring(nodes):
    if len(nodes) < 2:
        return ()
    if len(nodes) == 2:
        return (nodes,)
    return tuple(zip(nodes, nodes[1:] + nodes[:1]))


def check_case(case):
    """Raise ``CaseError`` on the first broken structural invariant."""
    buses = case.bus_index
    if len(buses) != case.n_buses:
        raise CaseError("bus ids must be unique")

    for line in case.lines:
        for bus in (line.from_bus, line.to_bus):
            if bus not in buses:
                raise CaseError(f"{line.label}: unknown bus {bus}", {'line': line.number})
        if line.from_bus == line.to_bus:
            raise CaseError(f"{line.label}: both ends on the same bus", {'line': line.number})
        if not line.x > 0:
            raise CaseError(f"{line.label}: reactance must be positive", {'line': line.number, 'x': line.x})
        if not line.limit > 0:
            raise CaseError(f"{line.label}: limit must be positive", {'line': line.number})

    seen = set()
    for gen in case.generators:
        label = f"generator {gen.number} (bus {gen.bus})"
        if gen.bus not in buses:
            raise CaseError(f"{label}: unknown bus", {'generator': gen.number})
        if gen.bus in seen:
            raise CaseError(f"{label}: bus already hosts a generator", {'generator': gen.number})
        seen.add(gen.bus)
        if not gen.gamma > 0:
            raise CaseError(f"{label}: gamma must be positive", {'generator': gen.number})
        if gen.pmin > gen.pmax:
            raise CaseError(f"{label}: pmin exceeds pmax", {'generator': gen.number})
        if not gen.lag_s > 0:
            raise CaseError(f"{label}: lag must be positive", {'generator': gen.number})

    load_buses = set()
    for load in case.loads:
        if load.bus not in buses:
            raise CaseError(f"load at unknown bus {load.bus}", {'bus': load.bus})
        if load.bus in load_buses:
            raise CaseError(f"bus {load.bus} has more than one load", {'bus': load.bus})
        load_buses.add(load.bus)
        if any(b < a for a, b in zip(load.times, load.times[1:])):
            raise CaseError(f"load at bus {load.bus}: schedule times must be non-decreasing", {'bus': load.bus})

    if not nx.is_connected(case.power_graph()):
        islands = [sorted(c) for c in nx.connected_components(case.power_graph())]
        raise CaseError("power network is disconnected", {'islands': islands})
    for kind, graph, nodes in (
        ('controller', case.controller_graph(), set(case.generator_buses)),
        ('meter', case.meter_graph(), set(case.buses)),
    ):
        stray = set(graph.nodes) - nodes
        if stray:
            raise CaseError(f"{kind} graph refers to unknown nodes {sorted(stray)}")
        if graph.number_of_nodes() and not nx.is_connected(graph):
            raise CaseError(f"{kind} communication graph is disconnected")


def build_matrices(case, meter_sigma=0.0, tol=DEFAULT_TOL):
    """DC susceptance, injection-to-angle and angle-to-flow matrices for ``case``."""
    n = case.n_buses
    index = case.bus_index
    bfull = np.zeros((n, n))
    hflow_full = np.zeros((case.n_lines, n))
    for row, line in enumerate(case.lines):
        i, j = index[line.from_bus], index[line.to_bus]
        b = 1.0 / line.x
        bfull[i, i] += b
        bfull[j, j] += b
        bfull[i, j] -= b
        bfull[j, i] -= b
        hflow_full[row, i] += b
        hflow_full[row, j] -= b

    reduced = bfull[:, 1:]
    if np.linalg.matrix_rank(reduced) != n - 1:
        raise CaseError("susceptance matrix is rank deficient; the network is disconnected")
    t = pinv(reduced, tol)
    hflow = hflow_full[:, 1:]

    gen_columns = np.array([index[bus] for bus in case.generator_buses], dtype=int)
    load_columns = np.array([index[bus] for bus in case.load_side_buses], dtype=int)

    # Scalar R cancels out of the estimator, so a noiseless meter model uses identity weights.
    variance = meter_sigma ** 2 if meter_sigma > 0 else 1.0

    return GridMatrices(
        bfull=bfull,
        t=t,
        hflow=hflow,
        tg=t[:, gen_columns],
        tl=t[:, load_columns],
        hobs=reduced.copy(),
        r=variance * np.eye(n),
        gen_columns=gen_columns,
        load_columns=load_columns,
    )


def ptdf(matrices):
    """Line-flow sensitivity to nodal injections, ``Hflow @ T``."""
    return matrices.hflow @ matrices.t


def metropolis_weights(graph, gain=1.0):
    """``{node: {neighbor: weight}}`` with ``w_ij = gain / (1 + max(deg_i, deg_j))``."""
    degree = dict(graph.degree())
    return {
        node: {
            neighbor: gain / (1.0 + max(degree[node], degree[neighbor]))
            for neighbor in graph.neighbors(node)
        }
        for node in graph.nodes
    }
