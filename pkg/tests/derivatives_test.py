#!/usr/bin/env python3

import inspect
import optparse
import os
import sys
import unittest

import numpy as np

localmodule = os.path.realpath(
    os.path.join(os.path.dirname(inspect.getfile(inspect.currentframe())), '..'))
print('localmodule: ' + localmodule)
if localmodule not in sys.path:
    sys.path.insert(0, localmodule)

import lbamm.common
import lbamm.derivatives
from lbamm.derivatives import CALL, DIGITAL_CALL, DIGITAL_PUT, PUT, LognormalGrid, OptionTrade
from lbamm.exception import ValidationException
from lbamm.measure import DensityVector, expect


class BlackScholesTest(unittest.TestCase):
    '''closed-form reference prices'''

    def test_at_the_money(self):
        self.assertAlmostEqual(10.450583572185565,
                               lbamm.derivatives.black_scholes_call(100, 100, 0.2, 0.05, 1.0))
        self.assertAlmostEqual(5.573526022256971,
                               lbamm.derivatives.black_scholes_put(100, 100, 0.2, 0.05, 1.0))

    def test_in_the_money(self):
        self.assertAlmostEqual(4.759422392871532,
                               lbamm.derivatives.black_scholes_call(42, 40, 0.2, 0.1, 0.5))
        self.assertAlmostEqual(0.8085993729000922,
                               lbamm.derivatives.black_scholes_put(42, 40, 0.2, 0.1, 0.5))

    def test_parity_and_limits(self):
        call = lbamm.derivatives.black_scholes_call(1.0, 1.1, 0.3, 0.02, 0.75)
        put = lbamm.derivatives.black_scholes_put(1.0, 1.1, 0.3, 0.02, 0.75)
        self.assertAlmostEqual(call - put, 1.0 - 1.1 * np.exp(-0.02 * 0.75))
        self.assertEqual(1.0, lbamm.derivatives.black_scholes_call(1.0, 0.0, 0.3, 0.0, 1.0))
        self.assertAlmostEqual(0.2, lbamm.derivatives.black_scholes_put(1.0, 1.2, 0.0, 0.0, 1.0))


class GridTest(unittest.TestCase):
    '''LognormalGrid and OptionTrade'''

    def setUp(self):
        self.grid = LognormalGrid(atoms=401)

    def test_grid(self):
        self.assertEqual(401, self.grid.space.size)
        self.assertTrue(np.all(np.diff(self.grid.prices) > 0))
        self.assertAlmostEqual(1.0, float(np.sum(self.grid.space.weights)))
        # the discretized terminal price keeps the forward
        self.assertAlmostEqual(1.0, expect(self.grid.payoff(self.grid.prices)), places=6)
        k = self.grid.strike_index(1.0)
        self.assertLess(self.grid.prices[k - 1], 1.0)
        self.assertGreaterEqual(self.grid.prices[k], 1.0)
        with self.assertRaises(ValidationException):
            LognormalGrid(atoms=2)
        with self.assertRaises(ValidationException):
            LognormalGrid(sigma=0)

    def test_grid_from_config(self):
        thisconfig = {}
        lbamm.common.fill_config_defaults(thisconfig)
        thisconfig['grid_atoms'] = 101
        grid = LognormalGrid.from_config(thisconfig)
        self.assertEqual(101, grid.space.size)
        self.assertEqual(0.25, grid.sigma)

    def test_payoffs(self):
        put = OptionTrade(PUT, 1.0, 2).payoff(self.grid).values
        np.testing.assert_allclose(2 * np.maximum(1.0 - self.grid.prices, 0.0), put)
        call = OptionTrade(CALL, 1.0, 1, cap=0.1).payoff(self.grid).values
        self.assertEqual(0.1, call.max())
        self.assertEqual(0.0, call.min())
        digital = OptionTrade(DIGITAL_CALL, 1.0, 3).payoff(self.grid).values
        self.assertEqual({0.0, 3.0}, set(digital))
        digital_put = OptionTrade(DIGITAL_PUT, 1.0, 3).payoff(self.grid).values
        np.testing.assert_array_equal(3.0 * (self.grid.prices < 1.0), digital_put)
        np.testing.assert_array_equal(np.full(401, 3.0), digital + digital_put)
        self.assertEqual({'kind': 'call', 'strike': 1.0, 'size': 1.0, 'cap': 0.1},
                         OptionTrade(CALL, 1.0, 1, cap=0.1).as_dict())

    def test_trade_rejects(self):
        with self.assertRaises(ValidationException):
            OptionTrade(CALL, 1.0, 10)
        with self.assertRaises(ValidationException):
            OptionTrade('straddle', 1.0, 10)
        with self.assertRaises(ValidationException):
            OptionTrade(PUT, -1.0, 10)


class DerivativesMarketTest(unittest.TestCase):
    '''option markets in lbamm/derivatives.py'''

    def setUp(self):
        self.grid = LognormalGrid(atoms=401)

    def test_initial_density(self):
        utility = lbamm.derivatives.derivatives_utility(1e-6)
        state = lbamm.derivatives.initial_state(self.grid, 100.0, utility)
        np.testing.assert_allclose(np.full(401, 100.0), state.pi.values)
        density = lbamm.derivatives.density_snapshot(state)
        np.testing.assert_allclose(np.ones(401), density.values, rtol=1e-12)

    def test_put_study(self):
        unit = OptionTrade(PUT, 1.0, 1).payoff(self.grid)
        fair = expect(unit)
        self.assertAlmostEqual(lbamm.derivatives.black_scholes_put(1.0, 1.0, 0.25, 0.0, 0.25),
                               fair, delta=1e-3)
        per_size = []
        for size in (50, 100):
            costs, per_contract, snapshots = lbamm.derivatives.derivatives_market(
                self.grid, 100.0, 1e-6, [OptionTrade(PUT, 1.0, size)])
            self.assertEqual(2, len(snapshots))
            self.assertGreater(per_contract[0], fair)
            self.assertAlmostEqual(costs[0] / size, per_contract[0])
            before = lbamm.derivatives.density_stats(self.grid, snapshots[0])
            after = lbamm.derivatives.density_stats(self.grid, snapshots[1])
            self.assertLess(after['mean'], before['mean'])
            kink = lbamm.derivatives.kink_diagnostic(self.grid, snapshots[0], snapshots[1], 1.0)
            self.assertTrue(kink['kink'])
            self.assertLess(kink['slope_left'], 0.0)
            self.assertAlmostEqual(0.0, kink['slope_right'], places=8)
            per_size.append(per_contract[0])
        self.assertGreaterEqual(per_size[1], per_size[0])

    def test_empty_order(self):
        costs, per_contract, snapshots = lbamm.derivatives.derivatives_market(
            self.grid, 100.0, 1e-6, [OptionTrade(PUT, 1.0, 0)])
        self.assertEqual([0.0], costs)
        self.assertEqual([0.0], per_contract)
        np.testing.assert_allclose(snapshots[0].values, snapshots[1].values)

    def test_trades_in_sequence(self):
        costs, per_contract, snapshots = lbamm.derivatives.derivatives_market(
            self.grid, 100.0, 1e-6,
            [OptionTrade(PUT, 1.0, 20), OptionTrade(DIGITAL_CALL, 1.1, 10)])
        self.assertEqual(2, len(costs))
        self.assertEqual(3, len(snapshots))
        self.assertTrue(all(isinstance(s, DensityVector) for s in snapshots))

    def test_digital_put(self):
        unit = OptionTrade(DIGITAL_PUT, 1.0, 1).payoff(self.grid)
        fair = expect(unit)
        costs, per_contract, snapshots = lbamm.derivatives.derivatives_market(
            self.grid, 100.0, 1e-6, [OptionTrade(DIGITAL_PUT, 1.0, 40)])
        self.assertGreater(per_contract[0], fair)
        self.assertLess(per_contract[0], 1.0)
        before = lbamm.derivatives.density_stats(self.grid, snapshots[0])
        after = lbamm.derivatives.density_stats(self.grid, snapshots[1])
        self.assertLess(after['mean'], before['mean'])

    def test_kink_near_edge(self):
        flat = DensityVector.uniform(self.grid.space)
        with self.assertRaises(ValidationException):
            lbamm.derivatives.kink_diagnostic(self.grid, flat, flat, 100.0)

    def test_capped_calls(self):
        caps = [0.0, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4, 12.8]
        fixed = lbamm.derivatives.capped_call_study(self.grid, 1.0, caps,
                                                    lbamm.derivatives.FIXED)
        self.assertEqual(0.0, fixed[0])
        self.assertTrue(np.all(np.diff(fixed) >= -1e-9 * fixed.max()))
        proportional = lbamm.derivatives.capped_call_study(self.grid, 1.0, caps,
                                                           lbamm.derivatives.PROPORTIONAL)
        self.assertEqual(len(caps), len(proportional))
        self.assertGreater(proportional.max(), proportional[-1])
        with self.assertRaises(ValidationException):
            lbamm.derivatives.capped_call_study(self.grid, 1.0, caps, 'doubling')

    def test_capped_call_cost_grows_linearly_in_the_cap(self):
        # the top price is near 245, so every cap here binds on the upper atoms
        grid = LognormalGrid(sigma=1.0, tau=1.0, atoms=401)
        caps = np.array([2.0, 4.0, 8.0, 16.0])
        fixed = lbamm.derivatives.capped_call_study(grid, 1.0, caps, lbamm.derivatives.FIXED)
        self.assertTrue(np.all(np.isfinite(fixed)))
        # between the domain edge 100 T - 100 and the largest payout 100 T
        self.assertTrue(np.all(fixed >= 100.0 * caps - 100.0))
        self.assertTrue(np.all(fixed <= 100.0 * caps))
        np.testing.assert_allclose(np.diff(fixed) / np.diff(caps), 100.0, rtol=0.01)


if __name__ == "__main__":
    parser = optparse.OptionParser()
    parser.add_option("-v", "--verbose", action="store_true", default=False,
                      help="Spew out even more information than normal")
    (lbamm.common.options, args) = parser.parse_args(['--verbose'])

    newSuite = unittest.TestSuite()
    newSuite.addTest(unittest.makeSuite(BlackScholesTest))
    newSuite.addTest(unittest.makeSuite(GridTest))
    newSuite.addTest(unittest.makeSuite(DerivativesMarketTest))
    unittest.main()
