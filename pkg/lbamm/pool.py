#!/usr/bin/env python3
#
# pool.py - part of the lbamm tools
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

"""Liquidity provision and withdrawal after the market has opened

Adding ℓ to Π buys the provider the share α* solving
C((α*Π - ℓ)/(1+α*); Π) = 0.  The pool then trades as
x ↦ (1+α*) C(x/(1+α*); Π*) with Π* = (Π+ℓ)/(1+α*).
"""

import io
import json
import logging
import time
from argparse import ArgumentParser

import numpy as np
import yaml
from scipy import optimize

from . import _
from . import common
from . import engine
from . import fees
from .exception import ConvergenceException, DomainException, ValidationException
from .measure import ess_inf, ess_sup

options = None
config = None

ALPHA_XTOL = 1e-14
MAX_DOUBLINGS = 200
PROPORTION_ULPS = 4


class PoolShare:
    """The share α bought by a provision and the resulting effective liquidity Π*"""

    def __init__(self, alpha, pi_star):
        if not alpha > -1:
            raise DomainException(_('Pool share must exceed -1, got {alpha}').format(alpha=alpha))
        if not ess_inf(pi_star) > 0:
            raise DomainException(_('Pooled liquidity must stay strictly positive'))
        self.alpha = float(alpha)
        self.pi_star = pi_star

    def as_dict(self):
        return {'alpha': self.alpha, 'pi_star': self.pi_star.as_dict()}

    def __repr__(self):
        return 'PoolShare(α=%.12g)' % self.alpha


def _check_pooling(state):
    if not state.utility.is_liquidity_based:
        raise ValidationException(_('Pooling needs a liquidity-based utility, not {utility}')
                                  .format(utility=state.utility))


def pooled_cost_gap(state, ell, alpha):
    """C̄(α) = C((αΠ - ℓ)/(1+α); Π), strictly increasing in α"""
    return engine.cost(state, (state.pi * alpha - ell) / (1.0 + alpha))


def _proportion(pi, ell):
    ratio = ell.values / pi.values
    # tΠ/Π may be off from t by a few ulps
    if np.all(np.abs(ratio - ratio[0]) <= PROPORTION_ULPS * np.finfo(float).eps * abs(ratio[0])):
        return float(np.median(ratio))
    return None


def pool_liquidity(state, ell):
    """Solve for the share α* bought by provision ℓ (or sold by withdrawal ℓ ≤ 0)"""
    _check_pooling(state)
    ell = engine.check_bet(state, ell)
    if np.all(ell.values == 0):
        raise ValidationException(_('Liquidity provision must not be zero'))
    if np.all(ell.values >= 0):
        withdrawal = False
    elif np.all(ell.values <= 0):
        withdrawal = True
        if not ess_inf(state.pi + ell) > 0:
            raise DomainException(_('Withdrawal would leave an outcome without liquidity'))
    else:
        raise ValidationException(_('A provision must be all nonnegative or all nonpositive'))

    t = _proportion(state.pi, ell)
    if t is not None:
        logging.debug('pool_liquidity: proportional provision t=%g', t)
        return PoolShare(t, state.pi)

    def gap(alpha):
        return pooled_cost_gap(state, ell, alpha)

    doublings = 0
    if withdrawal:
        lo, hi = -0.5, 0.0
        while gap(lo) >= 0:
            doublings += 1
            if doublings > MAX_DOUBLINGS:
                raise ConvergenceException(_('Could not bracket the withdrawal share'))
            lo = -1.0 + 0.5 * (1.0 + lo)
    else:
        lo, hi = 0.0, 1.0
        while gap(hi) <= 0:
            doublings += 1
            if doublings > MAX_DOUBLINGS:
                raise ConvergenceException(_('Could not bracket the provision share'))
            lo, hi = hi, 2.0 * hi
    alpha = optimize.brentq(gap, lo, hi, xtol=ALPHA_XTOL, maxiter=engine.MAX_ITERATIONS)
    logging.debug('pool_liquidity: α*=%.15g after %d bracket steps', alpha, doublings)
    return PoolShare(alpha, (state.pi + ell) / (1.0 + alpha))


def cost_with_share(state, alpha, x):
    """(1+α) C(x/(1+α); Π*), the cost of x to a pool whose state is Π*"""
    _check_pooling(state)
    if not alpha > -1:
        raise DomainException(_('Pool share must exceed -1, got {alpha}').format(alpha=alpha))
    x = engine.check_bet(state, x)
    return (1.0 + alpha) * engine.cost(state, x / (1.0 + alpha))


def rebalanced_fixed_point(state, alpha, x):
    """Solve C̃ = C((x + αC̃)/(1+α); Π*) directly

    This is the equilibrium cost of trading against the pooled market
    while the provider's holding is rebalanced.  The residual is strictly
    decreasing in C̃, so the root is unique within [essinf x, esssup x].
    """
    _check_pooling(state)
    x = engine.check_bet(state, x)
    lo, hi = ess_inf(x), ess_sup(x)
    if lo == hi:
        return lo

    def residual(c):
        return engine.cost(state, (x + alpha * c) / (1.0 + alpha)) - c

    return optimize.brentq(residual, lo, hi, xtol=1e-15, maxiter=engine.MAX_ITERATIONS)


def _quotes_match(before, after, bets, tolerance):
    for x in bets:
        a = engine.quote(before, x)
        b = engine.quote(after, x)
        scale = max(1.0, engine.check_bet(before, x).sup_norm())
        if abs(a.bid - b.bid) > tolerance * scale or abs(a.ask - b.ask) > tolerance * scale:
            logging.debug('oracle moved on %r: %r -> %r', x, a, b)
            return False
    return True


def oracle_invariance_for(state, ell, sample_bets, tolerance=1e-9):
    """True iff bid and ask of every sample bet survive pooling ℓ"""
    share = pool_liquidity(state, ell)
    return _quotes_match(state, state.replace(pi=share.pi_star), sample_bets, tolerance)


def oracle_invariance_check(state, t, sample_bets, tolerance=1e-9):
    """True iff quotes are unchanged by the proportional provision ℓ = tΠ"""
    if not t > -1:
        raise ValidationException(_('Proportional provision needs t > -1'))
    if t == 0:
        return True
    return oracle_invariance_for(state, state.pi * t, sample_bets, tolerance)


class LiquidityPool:
    """A live pool shared by named providers

    The pool trades on the effective state Π* scaled by `scale`, so the
    actual liquidity is scale·Π*.  Each provider owns a fraction of it
    and receives the same fraction of every fee at trade time.
    """

    def __init__(self, space, utility, cash, founder='founder', fee_level=0.0):
        self.state = engine.MarketState.initial(space, utility, cash)
        _check_pooling(self.state)
        self.fee_schedule = fees.FeeSchedule(fee_level)
        self.scale = 1.0
        self.fractions = {founder: 1.0}
        self.fees_paid = {founder: 0.0}
        self.trades = 0
        self.history = [{'event': 'open', 'provider': founder, 'amount': cash}]

    @property
    def space(self):
        return self.state.space

    @property
    def liquidity(self):
        return self.state.pi * self.scale

    def _check_proportional(self, ell):
        if self.trades == 0 and self.liquidity.is_constant() and ell.is_constant():
            return
        if _proportion(self.liquidity, ell) is None:
            common.warn_or_exception(_('Non-proportional provision after the market opened '
                                       'moves the quoted prices'))

    def provide(self, name, ell):
        """Add ℓ ≥ 0 for provider name, returning the share bought"""
        ell = engine.check_bet(self.state, ell)
        if np.any(ell.values < 0):
            raise ValidationException(_('Provisions must be nonnegative, use withdraw'))
        self._check_proportional(ell)
        share = pool_liquidity(self.state, ell / self.scale)
        alpha = share.alpha
        for k in self.fractions:
            self.fractions[k] /= 1.0 + alpha
        self.fractions[name] = self.fractions.get(name, 0.0) + alpha / (1.0 + alpha)
        self.fees_paid.setdefault(name, 0.0)
        self._rebalance(share)
        self.history.append({'event': 'provide', 'provider': name, 'amount': ell.values,
                             'alpha': alpha})
        return share

    def withdraw(self, name, ell):
        """Remove -ℓ for provider name (ℓ ≤ 0), paid out of their fraction"""
        ell = engine.check_bet(self.state, ell)
        if np.any(ell.values > 0):
            raise ValidationException(_('Withdrawals must be nonpositive'))
        if name not in self.fractions:
            raise ValidationException(_("'{name}' holds no share of this pool").format(name=name))
        self._check_proportional(ell)
        share = pool_liquidity(self.state, ell / self.scale)
        alpha = share.alpha
        if self.fractions[name] < -alpha - 1e-15:
            raise ValidationException(_("'{name}' owns {owned:.6g} of the pool, cannot withdraw "
                                        "{wanted:.6g}").format(name=name, owned=self.fractions[name],
                                                               wanted=-alpha))
        self.fractions[name] += alpha
        for k in self.fractions:
            self.fractions[k] = max(self.fractions[k], 0.0) / (1.0 + alpha)
        self._rebalance(share)
        self.history.append({'event': 'withdraw', 'provider': name, 'amount': ell.values,
                             'alpha': alpha})
        return share

    def _rebalance(self, share):
        self.scale *= 1.0 + share.alpha
        self.state = self.state.replace(pi=share.pi_star)

    def cost(self, x):
        """No-fee cost of x, (1+α)C(x/(1+α);Π*) in the aggregate"""
        x = engine.check_bet(self.state, x)
        return self.scale * engine.cost(self.state, x / self.scale)

    def quote(self, x):
        return self.fee_schedule.quote(self.state, x)

    def trade(self, x):
        """Sell bet x to a trader, returning (charged, fee)"""
        x = engine.check_bet(self.state, x)
        y = x / self.scale
        c = engine.cost(self.state, y)
        charged, fee = fees.split_cost(self.scale * c, x, self.fee_schedule.gamma)
        self.state = self.state.replace(pi=self.state.pi - y + c)
        for k, f in self.fractions.items():
            self.fees_paid[k] += f * fee
        self.trades += 1
        self.history.append({'event': 'trade', 'bet': x.values, 'charged': charged, 'fee': fee})
        return charged, fee

    def payout(self, name):
        """Provider's claim on the liquidity, per outcome"""
        return self.liquidity * self.fractions.get(name, 0.0)

    def as_dict(self):
        return {
            'liquidity': self.liquidity.as_dict(),
            'scale': self.scale,
            'fractions': dict(self.fractions),
            'fees': dict(self.fees_paid),
            'payouts': {k: self.payout(k).as_dict() for k in self.fractions},
            'history': self.history,
        }


def run_events(pool, events):
    """Replay provide/withdraw/trade events, as read from a YAML events file"""
    for event in events:
        if not isinstance(event, dict) or len(event) != 1:
            raise ValidationException(_('Each event must be a single provide, withdraw or bet'))
        kind, body = next(iter(event.items()))
        if kind == 'bet':
            pool.trade(common.read_payoff(pool.space, body))
        elif kind in ('provide', 'withdraw'):
            if not isinstance(body, dict) or 'name' not in body or 'amount' not in body:
                raise ValidationException(_('{kind} needs a name and an amount').format(kind=kind))
            amount = common.read_payoff(pool.space, body['amount'])
            getattr(pool, kind)(body['name'], amount)
        else:
            raise ValidationException(_("Unknown pool event '{kind}'").format(kind=kind))
    return pool


def main():

    global options, config

    parser = ArgumentParser()
    common.setup_global_opts(parser)
    common.setup_market_opts(parser)
    parser.add_argument("--provision", default=None,
                        help=_("Liquidity to add (or remove, if nonpositive) per outcome"))
    parser.add_argument("--proportional", type=float, default=None,
                        help=_("Check oracle invariance for the provision t·Π"))
    parser.add_argument("--bet", action='append', default=[],
                        help=_("Bet to price against the pooled market, may be repeated"))
    parser.add_argument("--events", default=None,
                        help=_("YAML list of provide/withdraw/bet events to replay"))
    options = parser.parse_args()

    config = common.read_config(options)
    common.merge_options(config, options, common.MARKET_OPTIONS)
    state = common.read_market(config)
    start = time.localtime()
    output = common.setup_status_output(start)
    output['utility'] = state.utility.to_dict()

    bets = [common.read_payoff(state.space, b) for b in options.bet]
    if options.provision:
        ell = common.read_payoff(state.space, options.provision)
        share = pool_liquidity(state, ell)
        pooled = state.replace(pi=share.pi_star)
        output['share'] = share.as_dict()
        output['bets'] = [{'bet': x.values,
                           'cost': engine.cost(state, x),
                           'cost_with_share': cost_with_share(pooled, share.alpha, x)}
                          for x in bets]
    if options.proportional is not None:
        samples = bets or [state.space.indicator(a) for a in state.space.atoms]
        output['oracle_invariant'] = oracle_invariance_check(state, options.proportional, samples)
    if options.events:
        with io.open(options.events, 'r', encoding='utf-8') as fp:
            events = yaml.safe_load(fp) or []
        cash = state.pi.values[0] if state.pi.is_constant() else config['initial_cash']
        pool = LiquidityPool(state.space, state.utility, cash, fee_level=state.fee_level)
        output['pool'] = run_events(pool, events).as_dict()

    common.finish_status_output(output)
    print(json.dumps(output, sort_keys=True, indent=2, cls=common.Encoder))


if __name__ == "__main__":
    main()
