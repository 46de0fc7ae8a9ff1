"""
Reference solver tests

Tests cover:
- Economic dispatch by bisection, including limit-bound generators
- Brute-force DC-OPF on the three-bus case with and without a binding line
- The comparison table used by the compare command
"""
import numpy as np
from django.test import SimpleTestCase

from gridflow.exceptions import EmptyFeasibleSetError, InfeasibleDemandError
from gridflow.grid import Generator
from gridflow.oracle import centralized_dcopf_bruteforce, centralized_ed, compare_dispatch, dispatch_cost
from .base import three_bus_case, two_bus_case


class EconomicDispatchTestCase(SimpleTestCase):

    def test_three_bus(self):
        solution = centralized_ed(three_bus_case().generators, 200.0)
        np.testing.assert_allclose(solution.outputs, [150.0, 50.0], atol=1e-6)
        self.assertAlmostEqual(solution.lam, 8.4, places=8)
        self.assertEqual(solution.binding, [])

    def test_limit_binding(self):
        generators = (
            Generator(number=1, bus=1, alpha=0, beta=5.0, gamma=0.01, pmin=0, pmax=40),
            Generator(number=2, bus=2, alpha=0, beta=6.0, gamma=0.01, pmin=0, pmax=200),
        )
        solution = centralized_ed(generators, 100.0)
        np.testing.assert_allclose(solution.outputs, [40.0, 60.0], atol=1e-6)
        self.assertAlmostEqual(solution.lam, 7.2, places=6)
        self.assertIn("generator 1 at pmax", solution.binding)

    def test_infeasible_demand(self):
        with self.assertRaises(InfeasibleDemandError):
            centralized_ed(three_bus_case().generators, 700.0)

    def test_cost(self):
        generators = three_bus_case().generators
        self.assertAlmostEqual(dispatch_cost(generators, [150.0, 50.0]), 100 + 1170 + 45 + 120 + 410 + 5)


class BruteForceTestCase(SimpleTestCase):

    def test_unconstrained_matches_dispatch(self):
        solution = centralized_dcopf_bruteforce(three_bus_case(), 200.0, step=1.0)
        np.testing.assert_allclose(solution.outputs, [150.0, 50.0])

    def test_binding_line(self):
        solution = centralized_dcopf_bruteforce(three_bus_case(limit_13=1.0), 200.0, step=1.0)
        np.testing.assert_allclose(solution.outputs, [100.0, 100.0])
        self.assertIn("line 2 (1-3) at limit", solution.binding)

    def test_single_generator(self):
        solution = centralized_dcopf_bruteforce(two_bus_case(), 50.0)
        np.testing.assert_allclose(solution.outputs, [50.0])

    def test_empty_feasible_set(self):
        with self.assertRaises(EmptyFeasibleSetError):
            centralized_dcopf_bruteforce(two_bus_case().with_line_limits({1: 0.1}), 50.0)

    def test_rejects_bad_step(self):
        with self.assertRaises(ValueError):
            centralized_dcopf_bruteforce(three_bus_case(), 200.0, step=0.0)


class CompareDispatchTestCase(SimpleTestCase):

    def test_table(self):
        table = compare_dispatch(three_bus_case(limit_13=1.0), [99.0, 101.0], 200.0)
        self.assertEqual(table['demand_mw'], 200.0)
        self.assertEqual(len(table['generators']), 2)
        row = table['generators'][0]
        self.assertEqual(row['dcopf_mw'], 100.0)
        self.assertAlmostEqual(row['deviation_mw'], -1.0)
        self.assertAlmostEqual(row['ed_mw'], 150.0, places=5)
        self.assertGreater(table['distributed_cost'], table['ed']['cost'])

    def test_infeasible_grid_leaves_dcopf_empty(self):
        with self.assertLogs('gridflow.oracle', level='WARNING'):
            table = compare_dispatch(two_bus_case().with_line_limits({1: 0.1}), [50.0], 50.0)
        self.assertIsNone(table['dcopf'])
        self.assertNotIn('dcopf_mw', table['generators'][0])
