"""
Synchronous-round simulation of the controller and meter networks around the
plant.

One step runs in a fixed order: meters sample the plant and propagate for
``dse_rounds`` rounds, every controller reads its attached meter and decides a
new reference, the plant advances, the step is recorded. Agents only ever see
messages from earlier rounds; the exchange queues are the barrier between
rounds.
"""
import json
import logging
import time
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .conf import gridflow_settings
from .constraint import ConstraintState, Mode, SensitivityCache, constrain_step, live_overflow
from .ded import (
    ControllerState, GeneratorTable, advance_output_replica, apply_reference_updates,
    consensus_step, predict_gen_updates, recovery_updates,
)
from .dse import MeterNetwork, flows_from_states, gain_matrix
from .exceptions import CaseError, ConfigurationError, InfeasibleDemandError
from .forecast import LoadHistory, check_overflow, predict_line_flows
from .grid import build_matrices, load_case, metropolis_weights
from .oracle import centralized_ed
from .plant import Plant

logger = logging.getLogger(__name__)

FIXTURES_DIR = Path(__file__).resolve().parent / 'fixtures'

MODES = (Mode.NORMAL, Mode.CORRECT, Mode.PENALTY)


@dataclass(frozen=True)
class Switches:
    constraint: bool = True
    penalty: bool = True
    meter_noise: bool = True


@dataclass(frozen=True)
class Scenario:
    case: object
    settings: object
    duration: float
    seed: int = 0
    switches: Switches = field(default_factory=Switches)
    attachments: dict = field(default_factory=dict)
    name: str = ''
    document: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.duration < 0:
            raise ConfigurationError("duration must not be negative")
        buses = set(self.case.buses)
        numbers = {gen.number for gen in self.case.generators}
        for number, bus in self.attachments.items():
            if number not in numbers:
                raise ConfigurationError(f"attachment for unknown generator {number}")
            if bus not in buses:
                raise ConfigurationError(f"generator {number} attached to unknown bus {bus}")

    @property
    def steps(self):
        return int(round(self.duration / self.settings.tau))

    @property
    def meter_sigma(self):
        return self.settings.meter_noise if self.switches.meter_noise else 0.0

    def meter_bus(self, generator):
        return self.attachments.get(generator.number, generator.bus)

    def with_overrides(self, seed=None, duration=None, constraint=None, penalty=None, meter_noise=None):
        """Copy with CLI-level overrides applied; ``None`` leaves a value alone."""
        switches = self.switches
        if constraint is not None:
            switches = replace(switches, constraint=constraint)
        if penalty is not None:
            switches = replace(switches, penalty=penalty)
        settings = self.settings
        if meter_noise is not None:
            settings = settings.override(meter_noise=float(meter_noise))
            switches = replace(switches, meter_noise=True)
        return replace(
            self,
            seed=self.seed if seed is None else int(seed),
            duration=self.duration if duration is None else float(duration),
            switches=switches,
            settings=settings,
        )

    def as_document(self):
        """Scenario document with the effective values, case inline."""
        document = dict(self.document)
        document.update({
            'name': self.name,
            'duration': self.duration,
            'seed': self.seed,
            'settings': self.settings.as_dict(),
            'switches': {
                'constraint': self.switches.constraint,
                'penalty': self.switches.penalty,
                'meter_noise': self.switches.meter_noise,
            },
        })
        return document


def resolve_case_reference(reference, base_dir=None):
    """
    Find the case file a scenario names: next to the scenario first, then
    among the bundled fixtures. Without ``base_dir`` only bundled fixture
    names are accepted.
    """
    candidates = []
    if base_dir is not None:
        candidates.append(Path(base_dir) / reference)
    if Path(reference).name == reference:
        candidates.append(FIXTURES_DIR / reference)
    for candidate in candidates:
        if candidate.is_file():
            return candidate
    raise ConfigurationError(f"case file '{reference}' not found", {'case': reference})


def scenario_from_document(document, base_dir=None):
    """Validate a decoded scenario document and build the ``Scenario``."""
    from .serializers import ScenarioSerializer

    serializer = ScenarioSerializer(data=document)
    if not serializer.is_valid():
        raise ConfigurationError("scenario document failed schema validation", serializer.errors)
    data = serializer.validated_data

    reference = data['case']
    if isinstance(reference, str):
        path = resolve_case_reference(reference, base_dir)
        case_document = json.loads(path.read_text())
        case_name = path.stem
    else:
        case_document, case_name = reference, ''
    case = load_case(case_document, name=case_name)

    case = case.with_line_limits(data['line_limits'])
    for event in data['load_events']:
        case = case.with_load_ramp(event['bus'], event['start'], event['end'], event['delta_mw'])

    resolved = {key: value for key, value in document.items()}
    resolved['case'] = case_document
    return Scenario(
        case=case,
        settings=gridflow_settings(data['settings']),
        duration=data['duration'],
        seed=data['seed'],
        switches=Switches(**data['switches']),
        attachments={int(k): v for k, v in data['attachments'].items()},
        name=data['name'] or case_name,
        document=resolved,
    )


def locate_document(path):
    """``path`` itself, or the bundled fixture of that name when ``path`` is a bare missing file name."""
    path = Path(path)
    if not path.is_file() and Path(path.name) == path and (FIXTURES_DIR / path.name).is_file():
        return FIXTURES_DIR / path.name
    return path


def load_scenario(path):
    """Read a scenario file; a relative ``case`` is resolved next to it."""
    path = locate_document(path)
    try:
        document = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigurationError(f"scenario file '{path}' not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"scenario file '{path}' is not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise ConfigurationError("scenario document must be a JSON object")
    if 'buses' in document:
        raise ConfigurationError(f"'{path}' is a case document, not a scenario")
    return scenario_from_document(document, base_dir=path.parent)


class Exchange:
    """
    Message passing on one communication graph. A message posted in round
    ``k`` is delivered at round ``k + 1 + delay`` unless dropped; per-link
    queues keep delivery order.
    """

    def __init__(self, neighbors, drop_probability=0.0, delay_steps=0, rng=None):
        self.neighbors = {node: list(adjacent) for node, adjacent in neighbors.items()}
        self.drop_probability = drop_probability
        self.delay_steps = delay_steps
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.queues = {
            (sender, receiver): deque()
            for sender, adjacent in self.neighbors.items()
            for receiver in adjacent
        }
        self.round = 0

    def exchange(self, outboxes):
        """Post this round's ``outboxes`` and return the inboxes for the next round."""
        due = self.round + 1 + self.delay_steps
        for sender, payload in outboxes.items():
            for receiver in self.neighbors.get(sender, ()):
                if self.drop_probability and self.rng.random() < self.drop_probability:
                    continue
                self.queues[sender, receiver].append((due, payload))
        self.round += 1

        inboxes = {node: {} for node in self.neighbors}
        for (sender, receiver), queue in self.queues.items():
            while queue and queue[0][0] <= self.round:
                _, payload = queue.popleft()
                inboxes[receiver][sender] = payload
        return inboxes


class BroadcastExchange:
    """
    Matrix form of ``Exchange`` for agents that send one vector to all their
    neighbours. ``exchange`` takes one row per sender and returns the rows due
    this round with a receiver-by-sender delivery mask, ``None`` when every
    link delivered.
    """

    def __init__(self, adjacency, drop_probability=0.0, delay_steps=0, rng=None):
        self.adjacency = np.asarray(adjacency, dtype=bool)
        self.drop_probability = drop_probability
        self.delay_steps = delay_steps
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.pending = deque()

    def exchange(self, payload):
        delivered = None
        if self.drop_probability:
            kept = self.rng.random(self.adjacency.shape) >= self.drop_probability
            delivered = self.adjacency & kept
        self.pending.append((np.array(payload, dtype=float), delivered))
        if len(self.pending) > self.delay_steps:
            return self.pending.popleft()
        return np.zeros(np.shape(payload)), np.zeros_like(self.adjacency)


def _indexed_weights(graph, key, gain=1.0):
    weights = metropolis_weights(graph, gain)
    return {
        key[node]: {key[neighbor]: w for neighbor, w in adjacent.items()}
        for node, adjacent in weights.items()
    }


class GeneratorController:
    """
    One generator's controller: consensus dispatch, load forecast, flow
    prediction and the constraint layer, reading flows from one meter.
    """

    def __init__(self, index, scenario, matrices, table, lam, outputs_mw, weights, meter, sensitivities=None):
        case, s = scenario.case, scenario.settings
        self.index = index
        self.number = case.generators[index].number
        self.meter = meter
        self.base = case.base_mva
        self.settings = s
        self.switches = scenario.switches
        self.matrices = matrices
        self.sensitivities = sensitivities
        self.limits = case.limits()
        self.state = ControllerState(
            index=index,
            lam=lam,
            references=np.array(outputs_mw, dtype=float),
            outputs=np.array(outputs_mw, dtype=float),
            table=table,
            kp=s.kp,
            ki=s.ki,
            tau=s.tau,
            weights=weights,
        )
        self.history = LoadHistory(len(matrices.load_columns), s.ar_window, s.ar_refit_every, s.pinv_tol)
        self.constraint = ConstraintState(case.n_lines, kfp=s.kfp, kfi=s.kfi, deadband=s.penalty_deadband)
        gen_at_column = {column: position for position, column in enumerate(matrices.gen_columns)}
        self.mixed = [
            (position, gen_at_column[column])
            for position, column in enumerate(matrices.load_columns)
            if column in gen_at_column
        ]
        self._last_injections = None
        self._last_outputs = None

    def observe_loads(self, z):
        """Push the latest load-side injection deltas and return the forecast for this step."""
        injections = z[self.matrices.load_columns]
        outputs = self.state.outputs
        if self._last_injections is not None:
            deltas = injections - self._last_injections
            for position, gen in self.mixed:
                deltas[position] -= (outputs[gen] - self._last_outputs[gen]) / self.base
            self.history.push(deltas)
        self._last_injections = injections
        self._last_outputs = outputs.copy()
        return self.history.predict()

    def step(self, inbox, f_meas, z, flows):
        """
        One control round. ``z`` is the attached meter's measurement vector and
        ``flows`` its estimated line flows. Returns ``(mode, flags)``.
        """
        s, state = self.settings, self.state
        lam, dlam = consensus_step(state, inbox, f_meas, s.f0)
        delta = predict_gen_updates(dlam, state.references, state.table)
        delta = delta + recovery_updates(lam, state.references, delta, state.table, s.recovery_gain)

        delta_load = self.observe_loads(z)
        delta_pu = delta / self.base
        predicted = predict_line_flows(flows, delta_pu, delta_load, self.matrices.hflow,
                                       self.matrices.tg, self.matrices.tl)
        predicted_flags = check_overflow(predicted, self.limits, s.activation)

        previous_mode = self.constraint.mode
        if self.switches.constraint:
            corrected, mode, flags = constrain_step(
                delta_pu, predicted_flags, delta_load, flows, self.limits, self.constraint,
                self.matrices, penalty=self.switches.penalty, tol=s.pinv_tol, cache=self.sensitivities,
            )
            delta = corrected * self.base
        else:
            mode = Mode.NORMAL
            flags = predicted_flags.union(live_overflow(flows, self.limits, s.penalty_deadband))
        if mode != previous_mode:
            logger.debug("controller %d: %s -> %s", self.number, previous_mode, mode)

        apply_reference_updates(state, delta)
        advance_output_replica(state)
        return mode, flags


@dataclass
class Trace:
    """Per-step record of a run; MW for powers, p.u. for flows."""
    tau: float
    f0: float
    limits: np.ndarray
    t: np.ndarray
    f: np.ndarray
    lam: np.ndarray
    ref: np.ndarray
    act: np.ndarray
    flow: np.ndarray
    est_flow: np.ndarray
    of: np.ndarray
    controller_modes: np.ndarray
    cost: np.ndarray
    wall_seconds: float = 0.0

    @classmethod
    def allocate(cls, steps, n_generators, n_lines, tau, f0, limits):
        return cls(
            tau=tau,
            f0=f0,
            limits=np.asarray(limits, dtype=float),
            t=np.zeros(steps),
            f=np.zeros(steps),
            lam=np.zeros((steps, n_generators)),
            ref=np.zeros((steps, n_generators)),
            act=np.zeros((steps, n_generators)),
            flow=np.zeros((steps, n_lines)),
            est_flow=np.zeros((steps, n_generators, n_lines)),
            of=np.zeros((steps, n_lines), dtype=bool),
            controller_modes=np.zeros((steps, n_generators), dtype=np.int8),
            cost=np.zeros(steps),
        )

    def __len__(self):
        return len(self.t)

    @property
    def mode_codes(self):
        """Most severe controller mode per step."""
        if not self.controller_modes.shape[1]:
            return np.zeros(len(self), dtype=np.int8)
        return self.controller_modes.max(axis=1)

    @property
    def modes(self):
        return [MODES[code].value for code in self.mode_codes]


def run(scenario):
    """
    Simulate ``scenario`` and return its ``Trace``.

    The run starts warm: generators at the economic dispatch of the initial
    load, every lambda at its incremental cost, frequency at nominal and the
    meter network converged on the initial injections.
    """
    case, s = scenario.case, scenario.settings
    steps = scenario.steps
    base = case.base_mva
    logger.info("Running scenario %s: %d steps of %.4g s, seed %d",
                scenario.name or '<inline>', steps, s.tau, scenario.seed)

    matrices = build_matrices(case, scenario.meter_sigma, s.pinv_tol)
    gain = gain_matrix(matrices.hobs, matrices.r)
    noise_rng, load_rng, control_rng, meter_rng = (
        np.random.default_rng(child) for child in np.random.SeedSequence(scenario.seed).spawn(4)
    )

    table = GeneratorTable.from_case(case)
    try:
        dispatch = centralized_ed(case.generators, case.demand_mw(0.0))
    except InfeasibleDemandError as exc:
        raise ConfigurationError(f"initial load cannot be served: {exc.message}", exc.detail) from exc

    plant = Plant(case, matrices, s, dispatch.outputs / base, load_rng)

    bus_key = case.bus_index
    meter_weights = _indexed_weights(case.meter_graph(), bus_key)
    truth = plant.injections()
    network = MeterNetwork.initial(truth, meter_weights, s.dse_step)
    network.preroll(truth, s.dse_preroll_tol, s.dse_preroll_max)

    gen_key = {gen.bus: position for position, gen in enumerate(case.generators)}
    controller_weights = _indexed_weights(case.controller_graph(), gen_key, s.consensus_gain)
    sensitivities = SensitivityCache(matrices, s.pinv_tol)
    controllers = [
        GeneratorController(
            position, scenario, matrices, table, dispatch.lam, dispatch.outputs,
            controller_weights[position], bus_key[scenario.meter_bus(gen)], sensitivities,
        )
        for position, gen in enumerate(case.generators)
    ]
    attached = sorted({controller.meter for controller in controllers})

    control_exchange = Exchange(
        {key: list(adjacent) for key, adjacent in controller_weights.items()},
        s.drop_probability, s.delay_steps, control_rng,
    )
    meter_exchange = BroadcastExchange(network.adjacency, s.drop_probability, s.delay_steps, meter_rng)
    control_inbox = control_exchange.exchange({c.index: c.state.lam for c in controllers})
    sent, delivered = meter_exchange.exchange(network.z)

    trace = Trace.allocate(steps, case.n_generators, case.n_lines, s.tau, s.f0, case.limits())
    sigma = scenario.meter_sigma
    modes = [Mode.NORMAL] * len(controllers)
    flags = np.zeros(case.n_lines, dtype=bool)
    started = time.perf_counter()

    for k in range(steps):
        if k % s.dse_decimation == 0:
            measured = plant.injections()
            if sigma > 0:
                measured = measured + sigma * noise_rng.standard_normal(case.n_buses)
            for _ in range(s.dse_rounds):
                network.propagate(measured, sent, delivered)
                sent, delivered = meter_exchange.exchange(network.z)

        readings = network.z[attached]
        estimates = dict(zip(attached, flows_from_states(gain @ readings.T, matrices.hflow).T))

        if k % s.control_decimation == 0:
            flags = np.zeros(case.n_lines, dtype=bool)
            for position, controller in enumerate(controllers):
                meter = controller.meter
                modes[position], used = controller.step(
                    control_inbox[controller.index], plant.state.f, network.z[meter], estimates[meter],
                )
                flags |= used.flags
            control_inbox = control_exchange.exchange({c.index: c.state.lam for c in controllers})

        references = np.array([c.state.reference for c in controllers])
        state = plant.advance(references / base)

        trace.t[k] = (k + 1) * s.tau
        trace.f[k] = state.f
        trace.lam[k] = [c.state.lam for c in controllers]
        trace.ref[k] = references
        trace.act[k] = state.outputs * base
        trace.flow[k] = state.flows
        trace.est_flow[k] = [estimates[c.meter] for c in controllers]
        trace.of[k] = flags
        trace.controller_modes[k] = [mode.severity for mode in modes]
        trace.cost[k] = plant.cost()

    trace.wall_seconds = time.perf_counter() - started
    logger.info("Finished scenario %s in %.2f s wall", scenario.name or '<inline>', trace.wall_seconds)
    return trace


def build_scenario(case, duration, seed=0, switches=None, attachments=None, name='', **settings):
    """Scenario straight from a ``NetworkCase``, settings layered over the project defaults."""
    if case is None:
        raise CaseError("a network case is required")
    return Scenario(
        case=case,
        settings=gridflow_settings(settings),
        duration=duration,
        seed=seed,
        switches=switches or Switches(),
        attachments=attachments or {},
        name=name or case.name,
    )
