"""
End-to-end acceptance tests on the bundled scenarios

Tests cover:
- Line 24 overloads on the 39-bus case without the constraint layer and is held
  at its limit with it (one and two limited lines)
- Correction engages during the load ramp and lowers the line 24 peak
- Frequency restoration and lambda agreement at steady state
- Distributed steady state against the brute-force DC-OPF on three buses
- Load tracking on two buses
- Estimation fidelity without noise and linear error growth with noise
- The correction identity on the 39-bus sensitivities

The 39-bus runs simulate up to a minute of plant time and are tagged ``slow``;
skip them with ``python manage.py test --exclude-tag=slow``.
"""
import numpy as np
from django.test import SimpleTestCase, tag

from gridflow.constraint import ConstraintState, Mode, constrain_step
from gridflow.engine import FIXTURES_DIR, load_scenario, run
from gridflow.forecast import OverflowFlags
from gridflow.grid import build_matrices, load_case
from gridflow.oracle import centralized_dcopf_bruteforce, dispatch_cost
from .base import three_bus_scenario

LINE_24 = 23
LINE_31 = 30


def steady_checks(test, trace):
    test.assertLess(abs(trace.f[-1] - 60.0), 0.01)
    test.assertLess(np.ptp(trace.lam[-1]), 1e-3)


@tag('slow')
class UnconstrainedCase39TestCase(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        scenario = load_scenario('case1.json').with_overrides(duration=30.0, constraint=False)
        cls.trace = run(scenario)

    def test_line_24_exceeds_limit(self):
        flow = abs(self.trace.flow[-1, LINE_24])
        self.assertGreater(flow, 0.80)
        self.assertLess(abs(flow - 0.82), 0.02)

    def test_never_leaves_normal_mode(self):
        self.assertEqual(set(self.trace.modes), {Mode.NORMAL.value})
        self.assertTrue(self.trace.of[-1, LINE_24])

    def test_steady_state(self):
        steady_checks(self, self.trace)


@tag('slow')
class CaseOneTestCase(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.trace = run(load_scenario('case1.json'))

    def test_line_24_held_at_limit(self):
        self.assertLessEqual(abs(self.trace.flow[-1, LINE_24]), 0.805)

    def test_constraint_layer_engaged(self):
        modes = set(self.trace.modes)
        self.assertIn(Mode.PENALTY.value, modes)
        # nothing flagged before the load event
        self.assertFalse(self.trace.of[: int(5.0 / self.trace.tau) - 1].any())

    def test_steady_state(self):
        steady_checks(self, self.trace)


@tag('slow')
class CorrectionTimingTestCase(SimpleTestCase):
    """Line 24 during and right after the bus 24 load ramp (5 s to 7 s)"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        scenario = load_scenario('case1.json').with_overrides(duration=15.0)
        cls.constrained = run(scenario)
        cls.unconstrained = run(scenario.with_overrides(constraint=False))

    def test_constraint_acts_before_ramp_ends(self):
        active = np.flatnonzero(self.constrained.mode_codes > 0)
        self.assertTrue(len(active))
        self.assertLess(self.constrained.t[active[0]], 7.0)

    def test_peak_flow_lower_with_constraint(self):
        peak_on = np.abs(self.constrained.flow[:, LINE_24]).max()
        peak_off = np.abs(self.unconstrained.flow[:, LINE_24]).max()
        self.assertLess(peak_on, peak_off)


@tag('slow')
class CaseTwoTestCase(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.trace = run(load_scenario('case2.json'))

    def test_both_lines_within_limits(self):
        self.assertLessEqual(abs(self.trace.flow[-1, LINE_24]), 0.8 + 0.005)
        self.assertLessEqual(abs(self.trace.flow[-1, LINE_31]), 1.2 + 0.005)

    def test_steady_state(self):
        steady_checks(self, self.trace)


class ThreeBusOptimalityTestCase(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.scenario = load_scenario('small3.json')
        cls.trace = run(cls.scenario)

    def test_matches_bruteforce_dispatch(self):
        case = self.scenario.case
        oracle = centralized_dcopf_bruteforce(case, case.demand_mw(self.scenario.duration), step=1.0)
        distributed = self.trace.act[-1]
        np.testing.assert_allclose(distributed, oracle.outputs, atol=2.0)
        cost = dispatch_cost(case.generators, distributed)
        self.assertLess(abs(cost - oracle.cost) / oracle.cost, 0.005)

    def test_line_held(self):
        self.assertLessEqual(abs(self.trace.flow[-1, 1]), 1.0 + 0.01)

    def test_steady_state(self):
        steady_checks(self, self.trace)


class TwoBusTrackingTestCase(SimpleTestCase):

    def test_follows_load_step(self):
        trace = run(load_scenario('two_bus.json'))
        self.assertAlmostEqual(trace.act[-1, 0], 80.0, delta=1.5)
        self.assertAlmostEqual(trace.lam[-1, 0], 11.6, delta=0.05)
        self.assertLess(abs(trace.f[-1] - 60.0), 0.01)


class EstimationFidelityTestCase(SimpleTestCase):

    @tag('slow')
    def test_noiseless_estimates_match_truth_on_39_buses(self):
        trace = run(load_scenario('case1.json').with_overrides(duration=2.0))
        for estimate in trace.est_flow[-1]:
            np.testing.assert_allclose(estimate, trace.flow[-1], atol=1e-6)

    def rms_error(self, sigma):
        scenario = three_bus_scenario(duration=1.0, meter_noise=sigma).with_overrides(constraint=False)
        trace = run(scenario)
        error = trace.est_flow - trace.flow[:, None, :]
        return float(np.sqrt(np.mean(error ** 2)))

    def test_error_grows_linearly_with_noise(self):
        low, high = self.rms_error(1e-3), self.rms_error(1e-2)
        self.assertGreater(low, 0.0)
        slope = np.log10(high / low)
        self.assertAlmostEqual(slope, 1.0, delta=0.2)


class CorrectionIdentityTestCase(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        case = load_case((FIXTURES_DIR / 'case39.json').read_text(), name='case39')
        cls.case = case.with_line_limits({24: 0.8})
        cls.matrices = build_matrices(cls.case)

    def test_flagged_flow_is_unchanged(self):
        rng = np.random.default_rng(24)
        m = self.matrices
        n_lines = self.case.n_lines
        flags = np.zeros(n_lines, dtype=bool)
        flags[LINE_24] = True
        predicted = OverflowFlags(flags=flags, sign=np.where(flags, 1.0, 0.0))
        flows = np.zeros(n_lines)
        for _ in range(20):
            delta_gen = 0.05 * rng.standard_normal(self.case.n_generators)
            delta_load = 0.05 * rng.standard_normal(len(m.load_columns))
            state = ConstraintState(n_lines, kfp=2.0, kfi=0.5, deadband=1e-4)
            out, mode, _ = constrain_step(delta_gen, predicted, delta_load, flows, self.case.limits(),
                                          state, m)
            self.assertEqual(mode, Mode.CORRECT)
            hv = predicted.sign[:, None] * m.hflow
            residual = hv @ (m.tg @ out + m.tl @ delta_load)
            self.assertLess(np.abs(residual).max(), 1e-9)
