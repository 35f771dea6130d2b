#!/usr/bin/env python3
#
# ingest.py - part of the lbamm tools
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

"""Sports-book money lines and the bid/ask/mid probabilities they imply

A negative money line m means staking |m| to win 100, a positive one
staking 100 to win m.  Archives are CSV files with the header
``timestamp,ml_a,ml_b``, one row per quote change.
"""

import logging
import math
import os

import numpy as np
import pandas as pd
from scipy.special import expit, logit

from . import _
from .exception import MoneyLineException

MONEYLINE_COLUMNS = ['timestamp', 'ml_a', 'ml_b']
PRICE_COLUMNS = ['timestamp', 'bid', 'ask', 'mid']

OVERROUND_TOLERANCE = 1e-12

# synthetic mid-price: mean reversion per step and step volatility, in logit units
SYNTH_REVERSION = 0.02
SYNTH_VOLATILITY = 0.04
SYNTH_MID_RANGE = (0.05, 0.95)


def moneyline_to_ask_prob(m):
    """Implied ask probability (-m·1{m<0} + 100·1{m≥0}) / (|m| + 100)"""
    try:
        if isinstance(m, float) and not m.is_integer():
            raise ValueError
        m = int(m)
    except (TypeError, ValueError):
        raise MoneyLineException(_("Money line must be an integer, not '{m}'").format(m=m))
    if abs(m) < 100:
        raise MoneyLineException(_('Money line {m} lies strictly between -100 and 100').format(m=m))
    if m < 0:
        return -m / (-m + 100.0)
    return 100.0 / (m + 100.0)


def ask_prob_to_moneyline(p, against_bettor=False):
    """The integer money line whose implied ask probability is closest to p

    With against_bettor the line is rounded so that its probability is
    at least p, as a book quoting a spread would.
    """
    if not 0 < p < 1:
        raise MoneyLineException(_('Probability {p} is outside (0, 1)').format(p=p))
    if p > 0.5:
        value = 100.0 * p / (1.0 - p)
        return -int(math.ceil(value - 1e-9)) if against_bettor else -int(round(value))
    value = 100.0 * (1.0 - p) / p
    if against_bettor:
        return max(100, int(math.floor(value + 1e-9)))
    return int(round(value))


class MoneyLineSeries:
    """Validated rows of (timestamp, ml_a, ml_b)"""

    def __init__(self, frame):
        missing = [c for c in MONEYLINE_COLUMNS if c not in frame.columns]
        if missing:
            raise MoneyLineException(_('Money line data lacks column(s): {columns}')
                                     .format(columns=', '.join(missing)))
        frame = frame[MONEYLINE_COLUMNS].reset_index(drop=True)
        if len(frame) == 0:
            raise MoneyLineException(_('Money line data has no rows'))
        timestamps = frame['timestamp'].to_numpy(dtype=float)
        if np.any(np.diff(timestamps) <= 0):
            raise MoneyLineException(_('Timestamps must be strictly increasing'))
        ask_a = frame['ml_a'].map(moneyline_to_ask_prob).to_numpy(dtype=float)
        ask_b = frame['ml_b'].map(moneyline_to_ask_prob).to_numpy(dtype=float)
        short = np.nonzero(ask_a + ask_b < 1.0 - OVERROUND_TOLERANCE)[0]
        if len(short):
            raise MoneyLineException(_('Row {row}: implied probabilities sum to less than 1')
                                     .format(row=int(short[0])))
        self.frame = frame.astype({'ml_a': int, 'ml_b': int})
        self.ask_a = ask_a
        self.ask_b = ask_b

    def __len__(self):
        return len(self.frame)

    @property
    def timestamps(self):
        return self.frame['timestamp'].to_numpy()


class PriceSeries:
    """Rows of (timestamp, bid, ask, mid) for the first outcome"""

    def __init__(self, frame):
        frame = frame[PRICE_COLUMNS].reset_index(drop=True)
        for column in PRICE_COLUMNS[1:]:
            values = frame[column].to_numpy(dtype=float)
            if not np.all((values > 0) & (values < 1)):
                raise MoneyLineException(_("Column '{column}' leaves (0, 1)").format(column=column))
        bid = frame['bid'].to_numpy(dtype=float)
        ask = frame['ask'].to_numpy(dtype=float)
        mid = frame['mid'].to_numpy(dtype=float)
        if np.any(bid > mid + OVERROUND_TOLERANCE) or np.any(mid > ask + OVERROUND_TOLERANCE):
            raise MoneyLineException(_('Every row needs bid <= mid <= ask'))
        self.frame = frame

    @classmethod
    def from_mids(cls, mids, timestamps=None, spread=0.0):
        """Prices without a book, bid and ask a relative spread around mid"""
        mids = np.asarray(mids, dtype=float)
        if timestamps is None:
            timestamps = np.arange(len(mids)) * 600
        frame = pd.DataFrame({'timestamp': timestamps,
                              'bid': mids * (1 - spread),
                              'ask': np.minimum(mids * (1 + spread), 1 - 1e-12),
                              'mid': mids})
        return cls(frame)

    def __len__(self):
        return len(self.frame)

    @property
    def timestamps(self):
        return self.frame['timestamp'].to_numpy()

    @property
    def bid(self):
        return self.frame['bid'].to_numpy(dtype=float)

    @property
    def ask(self):
        return self.frame['ask'].to_numpy(dtype=float)

    @property
    def mid(self):
        return self.frame['mid'].to_numpy(dtype=float)


def series_to_prices(series):
    """ask_A from m_A, bid_A = 1 - ask_B, mid_A = ask_A/(ask_A + ask_B)"""
    ask = series.ask_a
    bid = 1.0 - series.ask_b
    mid = ask / (ask + series.ask_b)
    # zero-spread rows agree up to rounding
    flat = np.abs(ask - bid) <= OVERROUND_TOLERANCE
    mid = np.where(flat, ask, mid)
    bid = np.where(flat, ask, bid)
    return PriceSeries(pd.DataFrame({'timestamp': series.timestamps,
                                     'bid': bid, 'ask': ask, 'mid': mid}))


def prices_to_series(prices):
    """Money lines quoting the given asks for A and 1 - bid for B"""
    ml_a = [ask_prob_to_moneyline(p) for p in prices.ask]
    ml_b = [ask_prob_to_moneyline(1.0 - p) for p in prices.bid]
    return MoneyLineSeries(pd.DataFrame({'timestamp': prices.timestamps,
                                         'ml_a': ml_a, 'ml_b': ml_b}))


def synth_fixture(seed, n_rows=2016, spread_bps=476.0, cadence=600, mid=0.5,
                  start=1674864000):
    """A reproducible money-line fixture with a mean-reverting mid and constant overround

    The mid follows a discretized Ornstein-Uhlenbeck process in logit
    space around logit(mid), clamped to SYNTH_MID_RANGE.  Both asks carry
    the relative overround spread_bps/1e4 and are rounded against the
    bettor to integer money lines.
    """
    if n_rows < 2:
        raise MoneyLineException(_('A fixture needs at least two rows'))
    if spread_bps < 0:
        raise MoneyLineException(_('Spread cannot be negative'))
    rng = np.random.default_rng(seed)
    centre = logit(mid)
    shocks = rng.standard_normal(n_rows - 1)
    path = np.empty(n_rows)
    path[0] = centre
    for i, z in enumerate(shocks):
        path[i + 1] = path[i] + SYNTH_REVERSION * (centre - path[i]) + SYNTH_VOLATILITY * z
    mids = np.clip(expit(path), *SYNTH_MID_RANGE)
    overround = spread_bps / 1e4
    ml_a = []
    ml_b = []
    for p in mids:
        if overround == 0:
            m = ask_prob_to_moneyline(p)
            ml_a.append(m)
            ml_b.append(100 if abs(m) == 100 else -m)
        else:
            ml_a.append(ask_prob_to_moneyline(min(p * (1 + overround), 0.999), True))
            ml_b.append(ask_prob_to_moneyline(min((1 - p) * (1 + overround), 0.999), True))
    timestamps = start + cadence * np.arange(n_rows)
    logging.debug('synth_fixture: seed=%s rows=%d spread=%gbps', seed, n_rows, spread_bps)
    return MoneyLineSeries(pd.DataFrame({'timestamp': timestamps, 'ml_a': ml_a, 'ml_b': ml_b}))


def read_moneylines(path):
    if not os.path.isfile(path):
        raise MoneyLineException(_("Money line file '{path}' does not exist").format(path=path))
    try:
        frame = pd.read_csv(path, encoding='utf-8', skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise MoneyLineException(_("Could not parse '{path}'").format(path=path), str(e))
    return MoneyLineSeries(frame)


def write_moneylines(series, path):
    series.frame.to_csv(path, index=False, columns=MONEYLINE_COLUMNS)
    return path


def load_prices(data=None, synth=None, defaults=None):
    """PriceSeries from a CSV archive or a synth spec dict (seed, rows, spread, cadence, mid)"""
    if data:
        return series_to_prices(read_moneylines(data))
    defaults = defaults or {}
    synth = dict(synth or {})
    series = synth_fixture(synth.get('seed', defaults.get('seed')),
                           n_rows=int(synth.get('rows', defaults.get('synth_rows', 2016))),
                           spread_bps=float(synth.get('spread', defaults.get('synth_spread_bps', 476.0))),
                           cadence=float(synth.get('cadence', defaults.get('synth_cadence', 600))),
                           mid=float(synth.get('mid', defaults.get('synth_mid', 0.5))),
                           start=int(synth.get('start', defaults.get('synth_start', 1674864000))))
    return series_to_prices(series)
