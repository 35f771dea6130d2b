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
import lbamm.engine
import lbamm.pool
from lbamm.engine import MarketState
from lbamm.exception import DomainException, ValidationException
from lbamm.measure import OutcomeSpace, Payoff
from lbamm.utilities import UtilitySpec
from testcommon import random_bet, random_market

UTILITIES = [UtilitySpec.log(), UtilitySpec.stableswap(2.0), UtilitySpec.essinf_mix(0.5)]


class PoolShareTest(unittest.TestCase):
    '''pooling operations in lbamm/pool.py'''

    def test_proportional_share(self):
        rng = np.random.default_rng(4)
        for spec in UTILITIES:
            state = random_market(rng, 6, spec)
            for t in (-0.5, -0.1, 0.1, 1.0, 10.0):
                share = lbamm.pool.pool_liquidity(state, state.pi * t)
                self.assertAlmostEqual(t, share.alpha, delta=1e-10 * max(1.0, abs(t)))
                self.assertTrue(lbamm.pool.oracle_invariance_check(
                    state, t, [random_bet(rng, state), state.space.indicator('w2')]))

    def test_non_proportional_share(self):
        rng = np.random.default_rng(8)
        for spec in UTILITIES:
            state = random_market(rng, 5, spec)
            ell = Payoff(state.space, rng.uniform(1.0, 50.0, 5))
            share = lbamm.pool.pool_liquidity(state, ell)
            self.assertGreater(share.alpha, 0.0)
            self.assertAlmostEqual(0.0, lbamm.pool.pooled_cost_gap(state, ell, share.alpha),
                                   delta=1e-9 * state.pi.sup_norm())
            # Π* = (Π+ℓ)/(1+α*)
            np.testing.assert_allclose((state.pi + ell).values / (1 + share.alpha),
                                       share.pi_star.values)

    def test_withdrawal_share(self):
        space = OutcomeSpace.uniform(3)
        state = MarketState(space, 'log', [40.0, 60.0, 80.0])
        share = lbamm.pool.pool_liquidity(state, Payoff(space, [-30.0, -5.0, -5.0]))
        self.assertTrue(-1.0 < share.alpha < 0.0)
        self.assertAlmostEqual(0.0, lbamm.pool.pooled_cost_gap(
            state, Payoff(space, [-30.0, -5.0, -5.0]), share.alpha), delta=1e-9)

    def test_pooled_cost_is_increasing(self):
        rng = np.random.default_rng(15)
        for spec in UTILITIES:
            state = random_market(rng, 7, spec)
            ell = Payoff(state.space, rng.uniform(0.0, 20.0, 7))
            gaps = [lbamm.pool.pooled_cost_gap(state, ell, a) for a in np.linspace(-0.9, 9, 25)]
            self.assertTrue(np.all(np.diff(gaps) > 0))

    def test_cost_with_share_is_the_fixed_point(self):
        rng = np.random.default_rng(16)
        for spec in UTILITIES:
            state = random_market(rng, 4, spec)
            x = random_bet(rng, state)
            for alpha in (-0.5, 0.25, 3.0):
                self.assertAlmostEqual(lbamm.pool.cost_with_share(state, alpha, x),
                                       lbamm.pool.rebalanced_fixed_point(state, alpha, x),
                                       delta=1e-9 * x.sup_norm())

    def test_non_proportional_moves_quotes(self):
        space = OutcomeSpace.uniform(['A', 'B'])
        state = MarketState(space, 'log', [50.0, 200.0])
        self.assertFalse(lbamm.pool.oracle_invariance_for(
            state, space.constant(10.0), [space.indicator('A')]))

    def test_rejects(self):
        space = OutcomeSpace.uniform(2)
        state = MarketState(space, 'log', [10.0, 20.0])
        with self.assertRaises(ValidationException):
            lbamm.pool.pool_liquidity(state, space.zeros())
        with self.assertRaises(ValidationException):
            lbamm.pool.pool_liquidity(state, Payoff(space, [1.0, -1.0]))
        with self.assertRaises(DomainException):
            lbamm.pool.pool_liquidity(state, Payoff(space, [-10.0, 0.0]))
        with self.assertRaises(ValidationException):
            lbamm.pool.pool_liquidity(MarketState(space, UtilitySpec.hanson(1.0), [10.0, 20.0]),
                                      space.ones())
        with self.assertRaises(DomainException):
            lbamm.pool.cost_with_share(state, -1.0, space.ones())
        with self.assertRaises(ValidationException):
            lbamm.pool.oracle_invariance_check(state, -2.0, [space.ones()])


class LiquidityPoolTest(unittest.TestCase):
    '''LiquidityPool in lbamm/pool.py'''

    def setUp(self):
        self.space = OutcomeSpace.uniform(['A', 'B'])

    def tearDown(self):
        lbamm.common.warnings_action = None

    def test_provide_trade_withdraw(self):
        pool = lbamm.pool.LiquidityPool(self.space, 'log', 100.0, fee_level=0.01)
        share = pool.provide('bob', self.space.constant(100.0))
        self.assertEqual(1.0, share.alpha)
        self.assertEqual({'founder': 0.5, 'bob': 0.5}, pool.fractions)
        np.testing.assert_allclose([200.0, 200.0], pool.liquidity.values)

        x = self.space.indicator('A') * 30.0
        direct = MarketState(self.space, 'log', pool.liquidity.values)
        self.assertAlmostEqual(lbamm.engine.cost(direct, x), pool.cost(x), places=10)
        charged, fee = pool.trade(x)
        self.assertGreater(fee, 0.0)
        self.assertAlmostEqual(fee / 2, pool.fees_paid['bob'])
        self.assertAlmostEqual(fee / 2, pool.fees_paid['founder'])
        np.testing.assert_allclose(direct.pi.values - x.values + (charged - fee),
                                   pool.liquidity.values)

        payout = pool.payout('bob')
        pool.withdraw('bob', -payout)
        self.assertAlmostEqual(1.0, pool.fractions['founder'])
        self.assertAlmostEqual(0.0, pool.fractions['bob'])
        np.testing.assert_allclose((direct.pi.values - x.values + (charged - fee)) / 2,
                                   pool.liquidity.values)
        self.assertEqual(['open', 'provide', 'trade', 'withdraw'],
                         [h['event'] for h in pool.history])

    def test_quotes_survive_proportional_provision(self):
        pool = lbamm.pool.LiquidityPool(self.space, 'stableswap:lambda=1', 100.0)
        pool.trade(self.space.indicator('B') * 20.0)
        before = pool.quote(self.space.indicator('A'))
        pool.provide('carol', pool.liquidity * 0.5)
        after = pool.quote(self.space.indicator('A'))
        self.assertAlmostEqual(before.ask, after.ask, places=12)
        self.assertAlmostEqual(1.0 / 3.0, pool.fractions['carol'])

    def test_non_proportional_provision_is_flagged(self):
        pool = lbamm.pool.LiquidityPool(self.space, 'log', 100.0)
        pool.trade(self.space.indicator('B') * 20.0)
        lbamm.common.warnings_action = 'error'
        with self.assertRaises(ValidationException):
            pool.provide('dave', self.space.constant(10.0))

    def test_overdrawn(self):
        pool = lbamm.pool.LiquidityPool(self.space, 'log', 100.0)
        pool.provide('bob', self.space.constant(50.0))
        with self.assertRaises(ValidationException):
            pool.withdraw('bob', self.space.constant(-100.0))
        with self.assertRaises(ValidationException):
            pool.withdraw('eve', self.space.constant(-1.0))
        with self.assertRaises(ValidationException):
            pool.provide('bob', self.space.constant(-1.0))

    def test_run_events(self):
        pool = lbamm.pool.LiquidityPool(self.space, 'log', 100.0)
        lbamm.pool.run_events(pool, [
            {'provide': {'name': 'bob', 'amount': '100,100'}},
            {'bet': 'A=10,B=0'},
            {'bet': [0, 5]},
        ])
        self.assertEqual(2, pool.trades)
        self.assertIn('bob', pool.as_dict()['fractions'])
        with self.assertRaises(ValidationException):
            lbamm.pool.run_events(pool, [{'swap': '1,1'}])
        with self.assertRaises(ValidationException):
            lbamm.pool.run_events(pool, [{'provide': {'name': 'bob'}}])


if __name__ == "__main__":
    parser = optparse.OptionParser()
    parser.add_option("-v", "--verbose", action="store_true", default=False,
                      help="Spew out even more information than normal")
    (lbamm.common.options, args) = parser.parse_args(['--verbose'])

    newSuite = unittest.TestSuite()
    newSuite.addTest(unittest.makeSuite(PoolShareTest))
    newSuite.addTest(unittest.makeSuite(LiquidityPoolTest))
    unittest.main()
