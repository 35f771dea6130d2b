#!/usr/bin/env python3
#
# backtest.py - part of the lbamm tools
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

"""Backtests of a two-outcome market against sports-book prices

The deterministic backtest replicates every quoted mid-price with the
market maker and books the fees.  The stochastic backtest lets a
reflected Brownian price wander inside the book's spread and trades
only when the fee-inclusive quotes leave room for arbitrage.
"""

import logging
import os
import time
from argparse import ArgumentParser
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd
from scipy import optimize

from . import _
from . import common
from . import engine
from . import fees
from . import ingest
from . import utilities
from .exception import ValidationException
from .measure import OutcomeSpace, Payoff
from .utilities import ESSINF, HANSON, LOG, STABLESWAP

options = None
config = None

OUTCOMES = ('A', 'B')
SECONDS_PER_YEAR = 365.25 * 24 * 3600
# relative size below which a replicating bet is skipped
NO_TRADE_TOLERANCE = 1e-12
PATHS_PER_CHUNK = 50


def two_outcome_space(weight_a=0.5):
    return OutcomeSpace(OUTCOMES, [weight_a, 1.0 - weight_a])


def implied_liquidity_log(L, mid):
    """Two-outcome liquidity whose log-utility pricing measure is (mid, 1 - mid)

    Π(A) = L·√((1-mid)/mid), Π(B) = L·√(mid/(1-mid)), so Π(A)Π(B) = L².
    """
    if not 0 < mid < 1:
        raise ValidationException(_('Mid price {mid} is outside (0, 1)').format(mid=mid))
    if not L > 0:
        raise ValidationException(_('Liquidity scale must be positive'))
    ratio = np.sqrt((1.0 - mid) / mid)
    return Payoff(two_outcome_space(), [L * ratio, L / ratio])


def stableswap_ratio(q, p, lam):
    """Π(A)/Π(B) at which StableSwap(λ) with reference weight q prices A at p

    The positive root of p(1-q)q r² + [p(1-q)(1-q+λ) - q(1-p)(q+λ)] r
    - q(1-p)(1-q) = 0.  Works elementwise on arrays.
    """
    a = p * (1 - q) * q
    b = p * (1 - q) * (1 - q + lam) - q * (1 - p) * (q + lam)
    c = -q * (1 - p) * (1 - q)
    root = np.sqrt(b * b - 4 * a * c)
    # cancellation-free form of the positive root
    return np.where(b >= 0, -2 * c / (b + root), (root - b) / (2 * a))


def stableswap_level(q, pi_a, pi_b, lam):
    """u(Π) = E log Π + λ log E Π under weights (q, 1 - q), elementwise"""
    return (q * np.log(pi_a) + (1 - q) * np.log(pi_b)
            + lam * np.log(q * pi_a + (1 - q) * pi_b))


def stableswap_target(q, p, lam, level):
    """(Π(A), Π(B)) pricing A at p with u(Π) = level, elementwise"""
    r = stableswap_ratio(q, p, lam)
    log_kappa = (level - stableswap_level(q, r, 1.0, lam)) / (1.0 + lam)
    kappa = np.exp(log_kappa)
    return kappa * r, kappa


def _measure_of(state):
    return engine.supergradient_measure(state).probabilities()[0]


def _target_by_search(state, mid):
    """Liquidity after the indicator bet that moves the price of A to mid"""
    space = state.space

    def bet(s):
        return Payoff(space, [max(s, 0.0), max(-s, 0.0)])

    def gap(s):
        after = state.pi - bet(s) + engine.cost(state, bet(s))
        return _measure_of(state.replace(pi=after)) - mid

    g0 = gap(0.0)
    if g0 == 0:
        return state.pi
    step = float(np.min(state.pi.values))
    if g0 < 0:
        lo, hi = 0.0, step
        while gap(hi) < 0:
            lo, hi = hi, 2 * hi
    else:
        lo, hi = -step, 0.0
        while gap(lo) > 0:
            lo, hi = 2 * lo, lo
    s = optimize.brentq(gap, lo, hi, xtol=1e-13 * step, maxiter=engine.MAX_ITERATIONS)
    return state.pi - bet(s) + engine.cost(state, bet(s))


def target_liquidity(state, mid):
    """Liquidity at the current utility level whose price for A is mid"""
    spec = state.utility
    space = state.space
    level = state.level()
    if spec.kind == LOG:
        scale = np.exp(level)
        return Payoff(space, implied_liquidity_log(scale, mid).values)
    if spec.kind == STABLESWAP:
        pi_a, pi_b = stableswap_target(space.weights[0], mid, spec.lam, level)
        return Payoff(space, [float(pi_a), float(pi_b)])
    if spec.kind == ESSINF and utilities.mix_weight(spec, space) == 0.0:
        q = np.array([mid, 1.0 - mid]) / space.weights
        return engine.liquidity_with_measure(spec, space, q, level)
    return _target_by_search(state, mid)


class BacktestReport:
    """Everything a deterministic run produces, in fractions of initial cash"""

    def __init__(self, cash, utility, gamma, outcome):
        self.cash = float(cash)
        self.utility = utility
        self.gamma = float(gamma)
        self.outcome = outcome
        self.rows = []
        self.ledger = []
        self.opening = None
        self.terminal_pnl_per_outcome = {}
        self.fees_collected = 0.0
        self.final_liquidity = None

    @property
    def trade_count(self):
        return len(self.ledger)

    def record(self, timestamp, price_row, state, quote):
        bid, ask, mid = price_row
        self.rows.append({
            'timestamp': timestamp,
            'book_bid': bid,
            'book_ask': ask,
            'mid': mid,
            'liquidity_A': state.pi.values[0] / self.cash,
            'liquidity_B': state.pi.values[1] / self.cash,
            'fees': state.fees_collected / self.cash,
            'amm_bid': quote.bid,
            'amm_ask': quote.ask,
        })

    def series_frame(self):
        return pd.DataFrame(self.rows)

    @property
    def fee_pnl_series(self):
        return [(r['timestamp'], r['fees']) for r in self.rows]

    @property
    def liquidity_series(self):
        return [(r['timestamp'], {'A': r['liquidity_A'], 'B': r['liquidity_B']}) for r in self.rows]

    def as_dict(self):
        return {
            'initial_cash': self.cash,
            'utility': self.utility.to_dict(),
            'fee_level': self.gamma,
            'outcome': self.outcome,
            'trade_count': self.trade_count,
            'fees_collected': self.fees_collected / self.cash,
            'terminal_pnl_per_outcome': self.terminal_pnl_per_outcome,
            'realized_pnl': self.terminal_pnl_per_outcome.get(self.outcome),
            'final_liquidity': self.final_liquidity,
            'opening': self.opening,
            'ledger': self.ledger,
        }


def backtest_deterministic(prices, spec, gamma, outcome='A', cash=100.0):
    """Replicate every mid price of the series and account for fees and payouts

    The market opens at the liquidity pricing A at the first mid, at the
    utility level of cash·1.  Each later row is matched by the unique bet
    x = Δ - min Δ with Δ = Π - Π_target, sold fee-inclusive.  Terminal
    PnL per outcome is final liquidity plus fees minus opening liquidity.
    """
    spec = utilities.UtilitySpec.parse(spec)
    if spec.kind == HANSON:
        raise ValidationException(_('Backtests need a liquidity-based utility'))
    if outcome not in OUTCOMES:
        raise ValidationException(_("Outcome must be one of {outcomes}")
                                  .format(outcomes=', '.join(OUTCOMES)))
    gamma = fees.check_fee_level(gamma)
    mids = prices.mid
    if not np.all((mids > 0) & (mids < 1)):
        raise ValidationException(_('Mid prices must lie in (0, 1)'))
    space = two_outcome_space()
    report = BacktestReport(cash, spec, gamma, outcome)

    state = engine.MarketState.initial(space, spec, cash, fee_level=gamma)
    opening = target_liquidity(state, mids[0])
    report.opening = {'bet': (state.pi - opening).values, 'charged': 0.0, 'fee': 0.0}
    state = state.replace(pi=opening)
    indicator = space.indicator(OUTCOMES[0])
    timestamps = prices.timestamps
    book = np.column_stack([prices.bid, prices.ask, mids])
    report.record(timestamps[0], book[0], state, fees.oracle_with_fees(state, gamma, indicator))

    for i in range(1, len(mids)):
        target = target_liquidity(state, mids[i])
        delta = state.pi.values - target.values
        if np.max(np.abs(delta)) > NO_TRADE_TOLERANCE * cash:
            x = Payoff(space, delta - np.min(delta))
            slope = fees.fee_slope(state, x)
            state, charged, fee = engine.apply_bet(state, x)
            report.ledger.append({'timestamp': timestamps[i], 'bet': x.values,
                                  'charged': charged, 'fee': fee, 'fee_slope': slope})
        report.record(timestamps[i], book[i], state, fees.oracle_with_fees(state, gamma, indicator))

    report.fees_collected = state.fees_collected
    report.final_liquidity = state.pi.as_dict()
    # against the opening position, not the initial cash
    report.terminal_pnl_per_outcome = {
        a: (state.pi.values[k] + state.fees_collected - opening.values[k]) / cash
        for k, a in enumerate(OUTCOMES)
    }
    logging.info(_('Deterministic backtest: {trades} trades, fees {fees:.6g} of initial cash')
                 .format(trades=report.trade_count, fees=state.fees_collected / cash))
    return report


def reconcile(report):
    """Largest ledger residual, as a fraction of initial cash

    fees + Π_final(ω) must equal cash + Σ charged - Σ x(ω), the
    opening bet included.
    """
    cash = report.cash
    bets = [np.asarray(report.opening['bet'])] + [np.asarray(t['bet']) for t in report.ledger]
    charged = sum(t['charged'] for t in report.ledger)
    paid = np.sum(bets, axis=0)
    final = np.array([report.final_liquidity[a] for a in OUTCOMES])
    residual = report.fees_collected + final - (cash + charged - paid)
    return float(np.max(np.abs(residual)) / cash)


def breakeven_fee(prices, spec, outcome='A', cash=100.0):
    """Smallest fee level at which the providers do not lose in the given outcome

    Liquidity ignores fees and fees are affine in γ, so this is
    -PnL(ω; γ=0)·cash / Σ fee slopes.  Zero if there is no loss,
    infinite if no trade happens.
    """
    report = backtest_deterministic(prices, spec, 0.0, outcome, cash)
    loss = -report.terminal_pnl_per_outcome[outcome] * cash
    if loss <= 0:
        return 0.0
    slope = sum(t['fee_slope'] for t in report.ledger)
    if slope <= 0:
        return float('inf')
    return loss / slope


def spread_covering_fee(prices):
    """Smallest γ whose fee band around the mid covers the whole book spread"""
    mid = prices.mid
    return float(np.max(np.maximum((prices.ask - mid) / mid, (mid - prices.bid) / (1 - mid))))


class StochasticRunConfig:
    """Parameters of one Monte-Carlo study at a single volatility"""

    def __init__(self, sigma, gammas, n_paths=500, dt=60.0, seed=None, lam=2.0,
                 workers=1, cash=100.0):
        self.sigma = common.check_range('sigma', sigma, low=0.0, low_open=True)
        self.gammas = np.array([fees.check_fee_level(g) for g in gammas], dtype=float)
        if len(self.gammas) == 0:
            raise ValidationException(_('Need at least one fee level'))
        if int(n_paths) < 1:
            raise ValidationException(_('Need at least one path'))
        self.n_paths = int(n_paths)
        self.dt = common.check_range('dt', dt, low=0.0, low_open=True)
        self.seed = seed
        self.lam = common.check_range('lambda', lam, low=0.0)
        self.workers = max(1, int(workers))
        self.cash = common.check_range('cash', cash, low=0.0, low_open=True)


def _step_rows(prices, dt):
    """Book row in force at every simulation step"""
    timestamps = prices.timestamps.astype(float)
    n_steps = int(np.floor((timestamps[-1] - timestamps[0]) / dt))
    times = timestamps[0] + dt * np.arange(n_steps + 1)
    return np.searchsorted(timestamps, times, side='right') - 1


def reflected_paths(start, bids, asks, sigma, dt, normals):
    """Arithmetic Brownian paths in probability units reflected into [bid, ask]

    normals holds one row of standard normal increments per path; bids
    and asks give the band at every step, the first entry included.
    """
    n_paths, n_steps = normals.shape
    scale = sigma * np.sqrt(dt / SECONDS_PER_YEAR)
    paths = np.empty((n_paths, n_steps + 1))
    x = np.full(n_paths, float(start))
    paths[:, 0] = x
    for k in range(n_steps):
        lo, hi = bids[k + 1], asks[k + 1]
        x = x + scale * normals[:, k]
        x = np.where(x > hi, 2 * hi - x, x)
        x = np.where(x < lo, 2 * lo - x, x)
        x = np.clip(x, lo, hi)
        paths[:, k + 1] = x
    return paths


def _stableswap_price_a(q, pi_a, pi_b, lam):
    mean = q * pi_a + (1 - q) * pi_b
    g_a = 1.0 / pi_a + lam / mean
    g_b = 1.0 / pi_b + lam / mean
    return q * g_a / (q * g_a + (1 - q) * g_b)


def _simulate_chunk(cfg, prices, rows, seeds):
    """Run the paths of one chunk against every fee level at once"""
    n_steps = len(rows) - 1
    normals = np.vstack([np.random.default_rng(s).standard_normal(n_steps) for s in seeds])
    bids = prices.bid[rows]
    asks = prices.ask[rows]
    mids = prices.mid[rows]
    paths = reflected_paths(mids[0], bids, asks, cfg.sigma, cfg.dt, normals)

    shape = (len(cfg.gammas), len(seeds))
    gamma = cfg.gammas[:, None] * np.ones(shape)
    pi_a = np.full(shape, cfg.cash)
    pi_b = np.full(shape, cfg.cash)
    collected = np.zeros(shape)
    trades = np.zeros(shape, dtype=int)
    lam = cfg.lam
    for k in range(1, n_steps + 1):
        q = mids[k]
        price = paths[:, k][None, :]
        quoted = _stableswap_price_a(q, pi_a, pi_b, lam)
        low = price / (1 + gamma)
        high = (price + gamma) / (1 + gamma)
        move = (quoted < low) | (quoted > high)
        if not np.any(move):
            continue
        target = np.where(quoted < low, low, high)
        level = stableswap_level(q, pi_a, pi_b, lam)
        new_a, new_b = stableswap_target(q, target, lam, level)
        # the trade costs c = max(Π' - Π) and carries the fee γc
        c = np.maximum(new_a - pi_a, new_b - pi_b)
        collected = np.where(move, collected + gamma * c, collected)
        trades += move
        pi_a = np.where(move, new_a, pi_a)
        pi_b = np.where(move, new_b, pi_b)

    final_mid = prices.mid[rows[-1]]
    fee_profit = collected / cfg.cash
    mtm_profit = (collected + final_mid * pi_a + (1 - final_mid) * pi_b - cfg.cash) / cfg.cash
    return fee_profit, mtm_profit, trades


def _mean_ci(values):
    n = values.shape[1]
    mean = values.mean(axis=1)
    if n < 2:
        return mean, np.zeros_like(mean)
    return mean, 1.96 * values.std(axis=1, ddof=1) / np.sqrt(n)


def backtest_stochastic(prices, cfg):
    """Mean fee and mark-to-market profit per fee level, with 95% intervals

    Paths draw their increments from independent streams spawned from
    the seed by path index and are reduced in path order, so the table
    does not depend on the number of workers.
    """
    rows = _step_rows(prices, cfg.dt)
    if len(rows) < 2:
        raise ValidationException(_('Price series is shorter than one time step'))
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_paths)
    chunks = [seeds[i:i + PATHS_PER_CHUNK] for i in range(0, cfg.n_paths, PATHS_PER_CHUNK)]
    logging.info(_('Simulating {paths} paths of {steps} steps at σ={sigma}')
                 .format(paths=cfg.n_paths, steps=len(rows) - 1, sigma=cfg.sigma))
    with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
        results = list(executor.map(lambda c: _simulate_chunk(cfg, prices, rows, c), chunks))
    fee_profit = np.hstack([r[0] for r in results])
    mtm_profit = np.hstack([r[1] for r in results])
    trades = np.hstack([r[2] for r in results])

    fee_mean, fee_ci = _mean_ci(fee_profit)
    mtm_mean, mtm_ci = _mean_ci(mtm_profit)
    return pd.DataFrame({
        'sigma': cfg.sigma,
        'gamma': cfg.gammas,
        'fee_profit': fee_mean,
        'fee_profit_ci': fee_ci,
        'mtm_profit': mtm_mean,
        'mtm_profit_ci': mtm_ci,
        'trades': trades.mean(axis=1),
    })


def stochastic_table(prices, sigmas, gammas, **kwargs):
    """backtest_stochastic over several volatilities, stacked into one table"""
    tables = []
    for sigma in sigmas:
        tables.append(backtest_stochastic(prices, StochasticRunConfig(sigma, gammas, **kwargs)))
    return pd.concat(tables, ignore_index=True)


def best_fee_levels(table):
    """Fee level with the highest mean fee profit at each volatility"""
    best = table.loc[table.groupby('sigma')['fee_profit'].idxmax()]
    return dict(zip(best['sigma'], best['gamma']))


def main():

    global options, config

    parser = ArgumentParser()
    common.setup_global_opts(parser)
    parser.add_argument("--mode", choices=['det', 'stoch'], default='det',
                        help=_("Deterministic replication or stochastic Monte-Carlo"))
    parser.add_argument("--data", default=None,
                        help=_("CSV of timestamp,ml_a,ml_b money lines"))
    parser.add_argument("--synth", default=None,
                        help=_("Synthetic fixture spec, e.g. seed=42,rows=2016,spread=476"))
    parser.add_argument("--utility", default=None,
                        help=_("Market maker utility for the deterministic run"))
    parser.add_argument("--gamma", type=float, default=None,
                        help=_("Fee level for the deterministic run"))
    parser.add_argument("--outcome", choices=OUTCOMES, default=None,
                        help=_("Realized outcome"))
    parser.add_argument("--cash", type=float, default=None,
                        help=_("Initial cash of the market maker"))
    parser.add_argument("--sigma", default=None,
                        help=_("Comma-separated annualized volatilities"))
    parser.add_argument("--gammas", default=None,
                        help=_("Comma-separated fee levels for the stochastic run"))
    parser.add_argument("--paths", type=int, default=None,
                        help=_("Number of Monte-Carlo paths"))
    parser.add_argument("--dt", type=float, default=None,
                        help=_("Simulation time step in seconds"))
    parser.add_argument("--lambda", dest='lam', type=float, default=None,
                        help=_("StableSwap weight of the dynamic market maker"))
    parser.add_argument("--seed", type=int, default=None,
                        help=_("Random seed"))
    parser.add_argument("--workers", type=int, default=None,
                        help=_("Worker threads for the Monte-Carlo paths"))
    parser.add_argument("--output", default=None,
                        help=_("Directory for report.json, series.csv and table.csv"))
    options = parser.parse_args()

    config = common.read_config(options)
    common.merge_options(config, options, {
        'data': 'data', 'utility': 'utility', 'gamma': 'fee_level', 'outcome': 'outcome',
        'cash': 'initial_cash', 'sigma': 'sigmas', 'gammas': 'gammas', 'paths': 'paths',
        'dt': 'dt', 'lam': 'stableswap_lambda', 'seed': 'seed', 'workers': 'workers',
        'output': 'output',
    })
    common.fill_config_defaults(config)

    start = time.localtime()
    output = common.setup_status_output(start)
    synth = common.parse_key_values(options.synth)
    prices = ingest.load_prices(config['data'], synth, config)
    outdir = common.ensure_output_dir(config['output'])

    if options.mode == 'det':
        report = backtest_deterministic(prices, config['utility'], config['fee_level'],
                                        config['outcome'], config['initial_cash'])
        output.update(report.as_dict())
        output['reconciliation_residual'] = reconcile(report)
        output['breakeven_fee'] = breakeven_fee(prices, config['utility'], config['outcome'],
                                                config['initial_cash'])
        output['spread_covering_fee'] = spread_covering_fee(prices)
        common.write_csv(report.series_frame(), os.path.join(outdir, 'series.csv'))
    else:
        table = stochastic_table(prices, config['sigmas'], config['gammas'],
                                 n_paths=config['paths'], dt=config['dt'], seed=config['seed'],
                                 lam=config['stableswap_lambda'], workers=config['workers'],
                                 cash=config['initial_cash'])
        output['seed'] = config['seed']
        output['spread_covering_fee'] = spread_covering_fee(prices)
        output['best_fee_levels'] = {str(k): v for k, v in best_fee_levels(table).items()}
        output['table'] = table.to_dict(orient='records')
        common.write_csv(table, os.path.join(outdir, 'table.csv'))

    common.finish_status_output(output)
    common.write_json(output, os.path.join(outdir, 'report.json'))


if __name__ == "__main__":
    main()
