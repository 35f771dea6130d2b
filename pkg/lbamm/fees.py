#!/usr/bin/env python3
#
# fees.py - part of the lbamm tools
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

"""Explicit fees charged on the cost of a bet

With fee level γ the trader pays C_γ(x;Π) = (1+γ)C(x;Π) - γ essinf x
while the pool moves exactly as without fees; the difference is paid
straight out to the liquidity providers.
"""

import numpy as np

from . import _
from . import common
from . import engine
from .exception import ValidationException
from .measure import ess_inf, ess_sup


class FeeSchedule:
    """A market-level constant fee level γ in [0, 1]"""

    def __init__(self, gamma=0.0):
        self.gamma = check_fee_level(gamma)

    def charge(self, state, x):
        return cost_with_fees(state, self.gamma, x)

    def quote(self, state, x):
        return oracle_with_fees(state, self.gamma, x)

    def __repr__(self):
        return 'FeeSchedule(γ=%g)' % self.gamma


def check_fee_level(gamma):
    return common.check_range('fee level', gamma, low=0.0, high=1.0)


def split_cost(c, x, gamma):
    """Split the no-fee cost c of bet x into (charged, fee) at fee level γ

    The fee is γ C(x - essinf x·1), which by translativity is
    γ (c - essinf x) and never negative.
    """
    fee = gamma * (c - ess_inf(x))
    if fee < 0:
        # c sits at essinf x up to rounding
        fee = 0.0
    return c + fee, fee


def cost_with_fees(state, gamma, x):
    """(charged, fee) for bet x at fee level γ"""
    gamma = check_fee_level(gamma)
    x = engine.check_bet(state, x)
    return split_cost(engine.cost(state, x), x, gamma)


def oracle_with_fees(state, gamma, x):
    """Fee-inclusive quote: ask_γ = (1+γ)ask - γ essinf x, bid_γ = (1+γ)bid - γ esssup x"""
    gamma = check_fee_level(gamma)
    q = engine.quote(state, x)
    x = engine.check_bet(state, x)
    ask = (1 + gamma) * q.ask - gamma * ess_inf(x)
    bid = (1 + gamma) * q.bid - gamma * ess_sup(x)
    return engine.Quote(bid, ask, q.measure)


def effective_bounds(x, gamma):
    """Largest no-fee ask and smallest no-fee bid keeping fee quotes inside [essinf x, esssup x]"""
    gamma = check_fee_level(gamma)
    lo, hi = ess_inf(x), ess_sup(x)
    return (hi + gamma * lo) / (1 + gamma), (lo + gamma * hi) / (1 + gamma)


def fee_slope(state, x):
    """d C_γ(x) / dγ, the no-fee cost of x - essinf x"""
    x = engine.check_bet(state, x)
    return engine.cost(state, x - ess_inf(x))


def fee_monotonicity_check(state, x, gamma_grid):
    """True iff the charged amount strictly increases along the sorted fee grid"""
    x = engine.check_bet(state, x)
    if x.is_constant():
        raise ValidationException(_('Fee monotonicity needs a non-constant bet'))
    grid = sorted(check_fee_level(g) for g in gamma_grid)
    c = engine.cost(state, x)
    charged = np.array([split_cost(c, x, g)[0] for g in grid])
    return bool(np.all(np.diff(charged) > 0))
