#!/usr/bin/env python3
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

import os

import numpy as np
from hypothesis import strategies as st


class TmpCwd():
    """Context-manager for temporarily changing the current working
    directory.
    """

    def __init__(self, new_cwd):
        self.new_cwd = new_cwd

    def __enter__(self):
        self.orig_cwd = os.getcwd()
        os.chdir(self.new_cwd)

    def __exit__(self, a, b, c):
        os.chdir(self.orig_cwd)


def mock_options(**kwargs):
    """An argparse-like namespace with the global options set to their defaults"""
    options = type('', (), {})()
    options.verbose = False
    options.quiet = False
    options.W = 'warn'
    options.config = None
    for k, v in kwargs.items():
        setattr(options, k, v)
    return options


def reset_config():
    import lbamm.common
    lbamm.common.config = None
    lbamm.common.options = None
    lbamm.common.warnings_action = None


def random_market(rng, n, utility):
    """A MarketState on n randomly weighted atoms with random liquidity"""
    from lbamm.engine import MarketState
    from lbamm.measure import OutcomeSpace

    space = OutcomeSpace.from_unnormalized(['w%d' % (i + 1) for i in range(n)],
                                           rng.uniform(0.05, 1.0, n))
    return MarketState(space, utility, rng.uniform(1.0, 100.0, n))


def random_bet(rng, state):
    """A bet paying between -Π and 0.9 Π in every outcome"""
    from lbamm.measure import Payoff

    return Payoff(state.space, state.pi.values * rng.uniform(-1.0, 0.9, state.space.size))


@st.composite
def markets(draw, min_atoms=2, max_atoms=8):
    """hypothesis strategy for (liquidity, bet) value pairs on uniform spaces"""
    n = draw(st.integers(min_atoms, max_atoms))
    pi = draw(st.lists(st.floats(1.0, 100.0), min_size=n, max_size=n))
    share = draw(st.lists(st.floats(-1.0, 0.9), min_size=n, max_size=n))
    pi = np.array(pi)
    return pi, pi * np.array(share)
