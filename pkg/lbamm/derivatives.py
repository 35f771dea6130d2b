#!/usr/bin/env python3
#
# derivatives.py - part of the lbamm tools
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

"""Option markets on a discretized lognormal terminal price"""

import logging
import os
import time
from argparse import ArgumentParser

import numpy as np
import pandas as pd
from scipy.stats import norm

from . import _
from . import common
from . import engine
from . import utilities
from .exception import ValidationException
from .measure import OutcomeSpace, Payoff, expect

options = None
config = None

PUT = 'put'
CALL = 'call'
DIGITAL_PUT = 'digital_put'
DIGITAL_CALL = 'digital_call'
OPTION_KINDS = (PUT, CALL, DIGITAL_PUT, DIGITAL_CALL)

FIXED = 'fixed'
PROPORTIONAL = 'proportional'

# atoms on each side of the strike used for the kink slopes
KINK_WINDOW = 10


class LognormalGrid:
    """Terminal prices on a uniform grid in log space with normal weights renormalized"""

    def __init__(self, spot=1.0, sigma=0.25, rate=0.0, tau=0.25, atoms=2001, width=6.0):
        spot = common.check_range('spot', spot, low=0.0, low_open=True)
        sigma = common.check_range('sigma', sigma, low=0.0, low_open=True)
        tau = common.check_range('tau', tau, low=0.0, low_open=True)
        if int(atoms) < 3:
            raise ValidationException(_('A lognormal grid needs at least three atoms'))
        z = np.linspace(-width, width, int(atoms))
        self.prices = spot * np.exp((rate - 0.5 * sigma ** 2) * tau + sigma * np.sqrt(tau) * z)
        labels = ['s%05d' % i for i in range(len(z))]
        self.space = OutcomeSpace.from_unnormalized(labels, norm.pdf(z))
        self.spot, self.sigma, self.rate, self.tau = spot, sigma, rate, tau

    @classmethod
    def from_config(cls, thisconfig):
        return cls(thisconfig['spot'], thisconfig['bs_sigma'], thisconfig['rate'],
                   thisconfig['tau'], thisconfig['grid_atoms'], thisconfig['grid_width'])

    def payoff(self, values):
        return Payoff(self.space, values)

    def strike_index(self, strike):
        return int(np.searchsorted(self.prices, strike))


class OptionTrade:
    """size contracts of a put, capped call or digital at strike"""

    def __init__(self, kind, strike, size, cap=None):
        if kind not in OPTION_KINDS:
            raise ValidationException(_("Unknown option kind '{kind}'").format(kind=kind))
        if kind == CALL and cap is None:
            raise ValidationException(_('Calls are unbounded, give them a cap'))
        self.kind = kind
        self.strike = common.check_range('strike', strike, low=0.0)
        self.size = float(size)
        self.cap = None if cap is None else common.check_range('cap', cap, low=0.0)

    def payoff(self, grid):
        s = grid.prices
        k = self.strike
        if self.kind == PUT:
            values = np.maximum(k - s, 0.0)
        elif self.kind == CALL:
            values = np.minimum(np.maximum(s - k, 0.0), self.cap)
        elif self.kind == DIGITAL_PUT:
            values = (s < k).astype(float)
        else:
            values = (s > k).astype(float)
        return grid.payoff(self.size * values)

    def as_dict(self):
        result = {'kind': self.kind, 'strike': self.strike, 'size': self.size}
        if self.cap is not None:
            result['cap'] = self.cap
        return result


def derivatives_utility(epsilon):
    return utilities.UtilitySpec.essinf_mix(epsilon, utilities.UtilitySpec.log())


def initial_state(grid, cash, utility):
    """Market whose pricing measure is the lognormal of the grid"""
    pi = engine.initial_liquidity(grid.space, np.ones(grid.space.size), cash, utility)
    return engine.MarketState(grid.space, utility, pi)


def density_snapshot(state):
    return engine.supergradient_measure(state)


def derivatives_market(grid, cash, epsilon, trades):
    """Sell the trades in order, returning (costs, per-contract costs, density snapshots)

    The first snapshot is the initial density, then one per trade.
    """
    state = initial_state(grid, cash, derivatives_utility(epsilon))
    snapshots = [density_snapshot(state)]
    costs = []
    per_contract = []
    for trade in trades:
        state, charged, _fee = engine.apply_bet(state, trade.payoff(grid))
        costs.append(charged)
        per_contract.append(charged / trade.size if trade.size else 0.0)
        snapshots.append(density_snapshot(state))
        logging.debug('derivatives: %s %g @ %g costs %.10g', trade.kind, trade.size,
                      trade.strike, charged)
    return costs, per_contract, snapshots


def density_stats(grid, density):
    """Mean and standard deviation of the terminal price under a density"""
    s = grid.payoff(grid.prices)
    mean = expect(s, density)
    var = expect(grid.payoff((grid.prices - mean) ** 2), density)
    return {'mean': mean, 'std': float(np.sqrt(var))}


def kink_diagnostic(grid, before, after, strike, window=KINK_WINDOW):
    """Slopes of the density ratio after/before just left and right of the strike

    A purchase with a payoff kinked at the strike bends the ratio there;
    `kink` holds when the left slope is negative and below the right one.
    """
    k = grid.strike_index(strike)
    if k - window < 0 or k + window > grid.space.size:
        raise ValidationException(_('Strike {strike} is too close to the grid edge')
                                  .format(strike=strike))
    ratio = after.values / before.values
    left = slice(k - window, k)
    right = slice(k, k + window)
    slope_left = float(np.polyfit(grid.prices[left], ratio[left], 1)[0])
    slope_right = float(np.polyfit(grid.prices[right], ratio[right], 1)[0])
    return {
        'strike': strike,
        'slope_left': slope_left,
        'slope_right': slope_right,
        'kink': bool(slope_left < 0 and slope_left < slope_right),
    }


def capped_call_study(grid, strike, caps, mode=FIXED, cash=100.0, contracts=100, epsilon=1e-6):
    """Cost of `contracts` capped calls for every cap

    With mode fixed the market holds `cash` whatever the cap; with mode
    proportional it holds cash·cap, so liquidity grows with the largest
    possible payout.
    """
    if mode not in (FIXED, PROPORTIONAL):
        raise ValidationException(_("Mode must be '{fixed}' or '{proportional}'")
                                  .format(fixed=FIXED, proportional=PROPORTIONAL))
    utility = derivatives_utility(epsilon)
    costs = []
    for cap in caps:
        if cap == 0:
            costs.append(0.0)
            continue
        liquidity = cash if mode == FIXED else cash * cap
        state = initial_state(grid, liquidity, utility)
        trade = OptionTrade(CALL, strike, contracts, cap=cap)
        costs.append(engine.cost(state, trade.payoff(grid)))
    return np.array(costs)


def black_scholes_call(S0, K, sigma, r, tau):
    if K <= 0:
        return float(S0)
    if sigma <= 0 or tau <= 0:
        return float(max(S0 - K * np.exp(-r * tau), 0.0))
    d1 = (np.log(S0 / K) + (r + 0.5 * sigma ** 2) * tau) / (sigma * np.sqrt(tau))
    d2 = d1 - sigma * np.sqrt(tau)
    return float(S0 * norm.cdf(d1) - K * np.exp(-r * tau) * norm.cdf(d2))


def black_scholes_put(S0, K, sigma, r, tau):
    """European put value, the reference price for the put study"""
    if K <= 0:
        return 0.0
    if sigma <= 0 or tau <= 0:
        return float(max(K * np.exp(-r * tau) - S0, 0.0))
    d1 = (np.log(S0 / K) + (r + 0.5 * sigma ** 2) * tau) / (sigma * np.sqrt(tau))
    d2 = d1 - sigma * np.sqrt(tau)
    return float(K * np.exp(-r * tau) * norm.cdf(-d2) - S0 * norm.cdf(-d1))


def main():

    global options, config

    parser = ArgumentParser()
    common.setup_global_opts(parser)
    parser.add_argument("--strike", type=float, default=None,
                        help=_("Strike of the puts and capped calls"))
    parser.add_argument("--puts", default=None,
                        help=_("Comma-separated put order sizes, each on a fresh market"))
    parser.add_argument("--caps", default=None,
                        help=_("Comma-separated caps for the capped-call sweep"))
    parser.add_argument("--contracts", type=int, default=None,
                        help=_("Number of capped calls bought at each cap"))
    parser.add_argument("--epsilon", type=float, default=None,
                        help=_("Weight of the essential infimum in the utility"))
    parser.add_argument("--cash", type=float, default=None,
                        help=_("Initial cash of the market maker"))
    parser.add_argument("--atoms", type=int, default=None,
                        help=_("Number of grid atoms"))
    parser.add_argument("--output", default=None,
                        help=_("Directory for report.json, density.csv and table.csv"))
    options = parser.parse_args()

    config = common.read_config(options)
    common.merge_options(config, options, {
        'strike': 'strike', 'puts': 'put_sizes', 'caps': 'call_caps',
        'contracts': 'call_contracts', 'epsilon': 'epsilon', 'cash': 'initial_cash',
        'atoms': 'grid_atoms', 'output': 'output',
    })
    common.fill_config_defaults(config)

    start = time.localtime()
    output = common.setup_status_output(start)
    grid = LognormalGrid.from_config(config)
    strike = config['strike']
    cash = config['initial_cash']
    epsilon = config['epsilon']
    outdir = common.ensure_output_dir(config['output'])

    density = pd.DataFrame({'price': grid.prices})
    initial = density_snapshot(initial_state(grid, cash, derivatives_utility(epsilon)))
    density['initial'] = initial.probabilities()
    puts = []
    for size in config['put_sizes']:
        trade = OptionTrade(PUT, strike, size)
        costs, per_contract, snapshots = derivatives_market(grid, cash, epsilon, [trade])
        after = snapshots[-1]
        density['after_%g_puts' % size] = after.probabilities()
        puts.append({
            'trade': trade.as_dict(),
            'cost': costs[0],
            'per_contract': per_contract[0],
            'density_before': density_stats(grid, initial),
            'density_after': density_stats(grid, after),
            'kink': kink_diagnostic(grid, initial, after, strike),
        })
    output['puts'] = puts
    output['black_scholes_put'] = black_scholes_put(grid.spot, strike, grid.sigma,
                                                    grid.rate, grid.tau)
    output['black_scholes_call'] = black_scholes_call(grid.spot, strike, grid.sigma,
                                                      grid.rate, grid.tau)

    caps = config['call_caps']
    table = pd.DataFrame({
        'cap': caps,
        'cost_fixed': capped_call_study(grid, strike, caps, FIXED, cash,
                                        config['call_contracts'], epsilon),
        'cost_proportional': capped_call_study(grid, strike, caps, PROPORTIONAL, cash,
                                               config['call_contracts'], epsilon),
    })
    output['capped_calls'] = table.to_dict(orient='records')
    logging.info(_('Priced {puts} put orders and {caps} capped calls')
                 .format(puts=len(puts), caps=len(caps)))

    common.write_csv(density, os.path.join(outdir, 'density.csv'))
    common.write_csv(table, os.path.join(outdir, 'table.csv'))
    common.finish_status_output(output)
    common.write_json(output, os.path.join(outdir, 'report.json'))


if __name__ == "__main__":
    main()
