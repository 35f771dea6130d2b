#!/usr/bin/env python3
#
# quote.py - part of the lbamm tools
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

import json
import time
from argparse import ArgumentParser

from . import _
from . import common
from . import engine
from . import fees
from .measure import expect

options = None
config = None


def quote_bet(state, x):
    """Everything a trader wants to know about bet x against state, as a dict"""
    x = engine.check_bet(state, x)
    c = engine.cost(state, x)
    charged, fee = fees.split_cost(c, x, state.fee_level)
    plain = engine.quote(state, x)
    with_fees = fees.oracle_with_fees(state, state.fee_level, x)
    if plain.measure is None:
        common.warn_or_exception(
            _('The utility is not differentiable here, prices are one-sided limits'))
    result = {
        'bet': x.as_dict(),
        'cost': c,
        'charged': charged,
        'fee': fee,
        'quote': plain.as_dict(),
        'quote_with_fees': {'bid': with_fees.bid, 'ask': with_fees.ask},
    }
    if plain.measure is not None:
        result['expectation'] = expect(x, plain.measure)
    return result


def main():

    global options, config

    parser = ArgumentParser()
    common.setup_global_opts(parser)
    common.setup_market_opts(parser)
    parser.add_argument("bet", nargs='+',
                        help=_("Payoff per outcome, e.g. 1,0 or A=1,B=0"))
    options = parser.parse_args()

    config = common.read_config(options)
    common.merge_options(config, options, common.MARKET_OPTIONS)
    state = common.read_market(config)

    output = common.setup_status_output(time.localtime())
    output['utility'] = state.utility.to_dict()
    output['liquidity'] = state.pi.as_dict()
    output['fee_level'] = state.fee_level
    output['quotes'] = [quote_bet(state, common.read_payoff(state.space, b))
                        for b in options.bet]
    common.finish_status_output(output)
    print(json.dumps(output, sort_keys=True, indent=2, cls=common.Encoder))


if __name__ == "__main__":
    main()
