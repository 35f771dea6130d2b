#!/usr/bin/env python3
#
# selftest.py - part of the lbamm tools
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Affero General Public License for more details.
#
# You should have received a copy of the GNU Affero General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

"""Check the market maker invariants on seeded random markets

Every check_* function takes an Instance and yields one message per
violated property, the way lint checks yield warnings.
"""

import logging
import sys
import time
from argparse import ArgumentParser

import numpy as np

from . import _
from . import common
from . import engine
from . import fees
from . import pool
from . import utilities
from .exception import LBAMMException, ValidationException
from .measure import DensityVector, OutcomeSpace, Payoff, ess_inf, ess_sup, expect
from .utilities import UtilitySpec

options = None
config = None

TOLERANCE = 1e-9
RADICAL_TOLERANCE = 1e-10
MEASURE_TOLERANCE = 1e-8
# intermediate liquidity below this, relative to the instance scale, is too coarse to price on
RESOLUTION = 1e-6
POOL_PROPORTIONS = (-0.5, -0.1, 0.1, 1.0, 10.0)
ALPHA_GRID = np.linspace(-0.9, 9.0, 12)
FEE_GRID = (0.0, 0.001, 0.01, 0.1, 0.5, 1.0)
MAX_ATOMS = 50


class Instance:
    """A random market with two random bets on it"""

    def __init__(self, number, state, x, y):
        self.number = number
        self.state = state
        self.x = x
        self.y = y

    @property
    def scale(self):
        return max(1.0, self.state.pi.sup_norm(), self.x.sup_norm(), self.y.sup_norm())

    def __str__(self):
        return '#%d %s N=%d' % (self.number, self.state.utility, self.state.space.size)


def random_utility(rng):
    pick = rng.integers(4)
    if pick == 0:
        return UtilitySpec.log()
    if pick == 1:
        return UtilitySpec.stableswap(float(rng.uniform(0.0, 5.0)))
    base = UtilitySpec.log() if pick == 2 else UtilitySpec.stableswap(float(rng.uniform(0.0, 5.0)))
    return UtilitySpec.essinf_mix(float(rng.uniform(0.01, 0.99)), base)


def random_instance(rng, number, max_atoms=MAX_ATOMS):
    n = int(rng.integers(2, max_atoms + 1))
    space = OutcomeSpace.from_unnormalized(['w%d' % (i + 1) for i in range(n)],
                                           rng.uniform(0.05, 1.0, n))
    pi = Payoff(space, rng.uniform(1.0, 100.0, n))
    state = engine.MarketState(space, random_utility(rng), pi)
    # each outcome pays between -Π and 0.9 Π
    x = Payoff(space, pi.values * rng.uniform(-1.0, 0.9, n))
    y = Payoff(space, pi.values * rng.uniform(-1.0, 0.9, n))
    return Instance(number, state, x, y)


def generate_instances(count, seed=None, max_atoms=MAX_ATOMS):
    children = np.random.SeedSequence(seed).spawn(count)
    for number, child in enumerate(children):
        yield random_instance(np.random.default_rng(child), number, max_atoms)


def log_cost_two_atoms(pi, x):
    """Closed-form log-utility cost on two equally likely outcomes

    Solves (a + c)(b + c) = Π₁Π₂ with a = Π₁ - x₁, b = Π₂ - x₂.
    """
    a = pi[0] - x[0]
    b = pi[1] - x[1]
    root = np.sqrt((a - b) ** 2 + 4.0 * pi[0] * pi[1])
    if a + b > 0:
        return 2.0 * (pi[0] * pi[1] - a * b) / (a + b + root)
    return 0.5 * (root - (a + b))


def check_no_arbitrage(instance):
    c = engine.cost(instance.state, instance.x)
    tol = TOLERANCE * instance.scale
    if not ess_inf(instance.x) - tol <= c <= ess_sup(instance.x) + tol:
        yield _('cost {c} outside [essinf x, esssup x]').format(c=c)


def check_indifference(instance):
    state = instance.state
    c = engine.cost(state, instance.x)
    if not engine.is_indifferent(state, instance.x, c, TOLERANCE):
        level = state.level()
        after = utilities.utility_eval(state.utility, state.pi - instance.x + c)
        yield _('utility moved from {before} to {after}').format(before=level, after=after)


def check_path_independence(instance):
    state = instance.state
    first, c1, _fee = engine.apply_bet(state, instance.x)
    if ess_inf(first.pi) < RESOLUTION * instance.scale:
        logging.debug('%s: first leg leaves %g liquidity, sequential cost not resolved',
                      instance, ess_inf(first.pi))
        return
    c2 = engine.cost(first, instance.y)
    together = engine.cost(state, instance.x + instance.y)
    if abs(c1 + c2 - together) > TOLERANCE * instance.scale:
        yield _('sequential cost {split} differs from joint cost {joint}').format(
            split=c1 + c2, joint=together)


def check_lipschitz(instance):
    state = instance.state
    gap = abs(engine.cost(state, instance.x) - engine.cost(state, instance.y))
    bound = (instance.x - instance.y).sup_norm()
    if gap > bound + TOLERANCE * instance.scale:
        yield _('cost difference {gap} exceeds sup distance {bound}').format(gap=gap, bound=bound)


def check_convexity(instance):
    state = instance.state
    middle = engine.cost(state, (instance.x + instance.y) * 0.5)
    chord = 0.5 * (engine.cost(state, instance.x) + engine.cost(state, instance.y))
    if middle > chord + TOLERANCE * instance.scale:
        yield _('cost of the midpoint {middle} above the chord {chord}').format(
            middle=middle, chord=chord)


def check_sandwich(instance):
    state = instance.state
    x = instance.x
    q = engine.quote(state, x)
    measure = engine.supergradient_measure(state)
    price = expect(x, measure)
    tol = TOLERANCE * instance.scale
    if not q.bid - tol <= price <= q.ask + tol:
        yield _('E^Q[x] = {price} outside [{bid}, {ask}]').format(price=price, bid=q.bid,
                                                                  ask=q.ask)
    if q.ask > engine.cost(state, x) + tol:
        yield _('marginal ask {ask} above the cost of the whole bet').format(ask=q.ask)


def check_fees(instance):
    state = instance.state
    x = instance.x
    if not x.is_constant() and not fees.fee_monotonicity_check(state, x, FEE_GRID):
        yield _('charged amount is not increasing in the fee level')
    for gamma in FEE_GRID:
        charged, fee = fees.cost_with_fees(state, gamma, state.space.constant(3.5))
        if charged != 3.5 or fee != 0.0:
            yield _('constant bet charged {charged} at fee level {gamma}').format(
                charged=charged, gamma=gamma)


def check_pooling(instance):
    state = instance.state
    for t in POOL_PROPORTIONS:
        share = pool.pool_liquidity(state, state.pi * t)
        if abs(share.alpha - t) > RADICAL_TOLERANCE * max(1.0, abs(t)):
            yield _('proportional provision t={t} bought share {alpha}').format(
                t=t, alpha=share.alpha)
        if not pool.oracle_invariance_check(state, t, [instance.x, instance.y]):
            yield _('quotes moved under proportional provision t={t}').format(t=t)
    ell = Payoff(state.space, state.pi.values * np.linspace(0.1, 1.0, state.space.size))
    gaps = [pool.pooled_cost_gap(state, ell, a) for a in ALPHA_GRID]
    if np.any(np.diff(gaps) <= 0):
        yield _('pooled cost is not increasing in the share')


def check_radical_formula(instance):
    """Log utility on two equally likely outcomes against its closed form"""
    rng = np.random.default_rng(instance.number)
    pi = rng.uniform(1.0, 100.0, 2)
    x = pi * rng.uniform(-1.0, 0.9, 2)
    space = OutcomeSpace.uniform(2)
    state = engine.MarketState(space, UtilitySpec.log(), pi)
    c = engine.cost(state, x)
    expected = log_cost_two_atoms(pi, x)
    if abs(c - expected) > RADICAL_TOLERANCE * max(abs(expected), np.ptp(x)):
        yield _('log cost {c} differs from the closed form {expected}').format(
            c=c, expected=expected)


def check_optimal_bet(instance):
    """Log utility on at most ten atoms, the maximizer must price at q"""
    rng = np.random.default_rng(instance.number)
    n = int(rng.integers(2, 11))
    space = OutcomeSpace.from_unnormalized(['w%d' % (i + 1) for i in range(n)],
                                           rng.uniform(0.05, 1.0, n))
    state = engine.MarketState(space, UtilitySpec.log(), rng.uniform(1.0, 100.0, n))
    q = DensityVector.normalized(space, rng.uniform(0.05, 1.0, n))
    x, value = engine.optimal_bet(state, q)
    after, _charged, _fee = engine.apply_bet(state, x)
    measure = engine.pricing_measure(after)
    if np.max(np.abs(measure.values - q.values)) > MEASURE_TOLERANCE:
        yield _('post-trade measure misses the target by {gap}').format(
            gap=np.max(np.abs(measure.values - q.values)))
    scale = max(1.0, x.sup_norm())
    for _i in range(5):
        bump = Payoff(space, x.values + 0.01 * scale * rng.standard_normal(n))
        profit = expect(bump, q) - engine.cost(state, bump)
        if profit > value + MEASURE_TOLERANCE * scale:
            yield _('perturbed bet earns {profit}, more than {value}').format(
                profit=profit, value=value)


CHECKS = [
    check_no_arbitrage,
    check_indifference,
    check_path_independence,
    check_lipschitz,
    check_convexity,
    check_sandwich,
    check_fees,
    check_radical_formula,
    check_optimal_bet,
]

# pooling solves many roots, so it runs on every POOLING_STRIDE-th instance
POOLING_STRIDE = 10


def run_checks(instances):
    """Run CHECKS on every instance, returning the list of violation messages"""
    violations = []
    for instance in instances:
        checks = list(CHECKS)
        if instance.number % POOLING_STRIDE == 0:
            checks.append(check_pooling)
        for check in checks:
            try:
                found = list(check(instance))
            except LBAMMException as e:
                found = [_('raised {error}').format(error=e)]
            for message in found:
                violations.append('%s %s: %s' % (instance, check.__name__, message))
    return violations


def main():

    global options, config

    parser = ArgumentParser()
    common.setup_global_opts(parser)
    parser.add_argument("--instances", type=int, default=None,
                        help=_("Number of random markets to check"))
    parser.add_argument("--seed", type=int, default=None,
                        help=_("Random seed"))
    options = parser.parse_args()

    config = common.read_config(options)
    common.merge_options(config, options, {'instances': 'selftest_instances', 'seed': 'seed'})
    common.fill_config_defaults(config)

    count = int(config['selftest_instances'])
    if count < 1:
        raise ValidationException(_('Need at least one instance'))
    start = time.time()
    violations = run_checks(generate_instances(count, config['seed']))
    for message in violations:
        print(message)
    logging.info(_('Checked {count} markets in {seconds:.1f}s, {violations} violations')
                 .format(count=count, seconds=time.time() - start, violations=len(violations)))
    if violations:
        sys.exit(1)


if __name__ == "__main__":
    main()
