#!/usr/bin/env python3
#
# engine.py - part of the lbamm tools
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

"""The market core: indifference cost, trades, pricing oracles, optimal bets"""

import logging

import numpy as np
from scipy import optimize

from . import _
from . import utilities
from .exception import ConvergenceException, DomainException, ValidationException
from .measure import DensityVector, Payoff, check_same_space, ess_inf, ess_sup, expect
from .utilities import HANSON, LOG, STABLESWAP, ESSINF, NOT_DIFFERENTIABLE

# brentq stops once |b - a| < COST_XTOL + COST_RTOL·|c|
COST_RTOL = 4 * np.finfo(float).eps
COST_XTOL = 4 * np.finfo(float).eps
# |u(Π - x + c) - u(Π)| above this, relative to max(1, |u(Π)|), gets polished
INDIFFERENCE_RTOL = 1e-12
# enough halvings to walk any double interval down to adjacent floats
MAX_ULP_BISECTIONS = 2200
MAX_ITERATIONS = 500

# first Richardson step t₀, so that ‖t₀x‖∞ = RICHARDSON_STEP·essinf Π
RICHARDSON_STEP = 1e-4


class MarketState:
    """Immutable snapshot of a market: utility, liquidity Π, fees and fee level"""

    def __init__(self, space, utility, pi, fees_collected=0.0, fee_level=0.0):
        if not isinstance(pi, Payoff):
            pi = Payoff(space, pi)
        if pi.space is not space and pi.space != space:
            raise ValidationException(_('Liquidity lives on a different outcome space'))
        if not ess_inf(pi) > 0:
            raise DomainException(_('Liquidity must be strictly positive in every outcome, '
                                    'lowest is {lowest}').format(lowest=ess_inf(pi)))
        if not fees_collected >= 0:
            raise ValidationException(_('Collected fees cannot be negative'))
        if not 0.0 <= fee_level <= 1.0:
            raise ValidationException(_('Fee level {gamma} is outside [0, 1]').format(gamma=fee_level))
        self.space = space
        self.utility = utilities.UtilitySpec.parse(utility)
        self.pi = pi
        self.fees_collected = float(fees_collected)
        self.fee_level = float(fee_level)

    @classmethod
    def initial(cls, space, utility, cash, fee_level=0.0):
        """A fresh market holding cash in every outcome"""
        if not cash > 0:
            raise ValidationException(_('Initial cash must be positive'))
        return cls(space, utility, space.constant(cash), fee_level=fee_level)

    def replace(self, **kwargs):
        fields = {
            'space': self.space,
            'utility': self.utility,
            'pi': self.pi,
            'fees_collected': self.fees_collected,
            'fee_level': self.fee_level,
        }
        fields.update(kwargs)
        return MarketState(**fields)

    def level(self):
        """u(Π), the utility level every trade preserves"""
        return utilities.utility_eval(self.utility, self.pi)

    def __repr__(self):
        return 'MarketState(%s, Π=%r, fees=%g, γ=%g)' % (self.utility, self.pi,
                                                         self.fees_collected, self.fee_level)


class Quote:
    """Marginal bid and ask of a bet, with the implied pricing measure when unique"""

    def __init__(self, bid, ask, measure=None):
        self.bid = float(bid)
        self.ask = float(ask)
        self.measure = measure

    def as_dict(self):
        result = {'bid': self.bid, 'ask': self.ask}
        if self.measure is not None:
            result['measure'] = self.measure.as_dict()
        else:
            result['measure'] = None
        return result

    def __repr__(self):
        return 'Quote(bid=%.10g, ask=%.10g)' % (self.bid, self.ask)


def check_bet(state, x):
    if not isinstance(x, Payoff):
        x = Payoff(state.space, x)
    check_same_space(state.pi, x)
    return x


def _bisect_to_ulp(excess, a, b):
    """Smallest float in (a, b] found with excess >= 0, given excess(a) < 0 <= excess(b)"""
    steps = 0
    while np.nextafter(a, b) < b:
        m = a + 0.5 * (b - a)
        if not a < m < b:
            break
        if excess(m) >= 0:
            b = m
        else:
            a = m
        steps += 1
        if steps > MAX_ULP_BISECTIONS:
            raise ConvergenceException(_('Cost bisection did not reach float resolution'))
    return b


def cost(state, x):
    """Cost C(x;Π): the cash c leaving the maker indifferent to taking bet x

    The root of u(Π - x + c) = u(Π) on [essinf x, esssup x].  Below the
    domain boundary u is -inf, which bisection treats as below target
    until a finite lower bracket is found; brentq refines from there.
    When the root is closer to the boundary than float resolution, or u
    is too steep for brentq to meet the indifference bound, the result is
    the smallest float c with u(Π - x + c) >= u(Π).
    """
    x = check_bet(state, x)
    if state.utility.kind == HANSON:
        return utilities.hanson_cost(state.utility.gamma, -state.pi, x)
    lo = ess_inf(x)
    hi = ess_sup(x)
    if lo == hi:
        return lo

    spec = state.utility
    weights = state.space.weights
    remaining = state.pi.values - x.values
    target = utilities.eval_values(spec, state.pi.values, weights)

    def excess(c):
        return utilities.eval_values(spec, remaining + c, weights) - target

    f_hi = excess(hi)
    if f_hi <= 0:
        return hi
    a, f_a = lo, excess(lo)
    b = hi
    bisections = 0
    while not np.isfinite(f_a):
        if not np.nextafter(a, b) < b:
            logging.debug('cost: root within one ulp of the domain edge %.17g', b)
            return float(b)
        if bisections >= MAX_ULP_BISECTIONS:
            raise ConvergenceException(_('Could not bracket the cost of {x}').format(x=x))
        m = a + 0.5 * (b - a)
        f_m = excess(m)
        if f_m >= 0:
            b = m
        else:
            a, f_a = m, f_m
        bisections += 1
    if f_a >= 0:
        return a
    c, r = optimize.brentq(excess, a, b, xtol=COST_XTOL, rtol=COST_RTOL,
                           maxiter=MAX_ITERATIONS, full_output=True, disp=False)
    if not r.converged:
        raise ConvergenceException(_('Cost root-finding did not converge: {flag}')
                                   .format(flag=r.flag))
    f_c = excess(c)
    if abs(f_c) > INDIFFERENCE_RTOL * max(1.0, abs(target)):
        if f_c >= 0:
            c = _bisect_to_ulp(excess, a, c)
        else:
            c = _bisect_to_ulp(excess, c, b)
        logging.debug('cost: steep utility, residual %g polished to %.17g', f_c, c)
    logging.debug('cost: %d bisections, %d brentq iterations', bisections, r.iterations)
    return float(c)


def is_indifferent(state, x, c, rtol):
    """Whether c prices x: u(Π - x + c) = u(Π) within rtol, or c is the
    smallest float reaching u(Π) when u jumps past it between adjacent floats
    """
    x = check_bet(state, x)
    spec = state.utility
    weights = state.space.weights
    remaining = state.pi.values - x.values
    level = utilities.eval_values(spec, state.pi.values, weights)
    after = utilities.eval_values(spec, remaining + c, weights)
    if abs(after - level) <= rtol * max(1.0, abs(level)):
        return True
    below = utilities.eval_values(spec, remaining + np.nextafter(c, -np.inf), weights)
    return bool(after >= level and not below >= level)


def apply_bet(state, x):
    """Accept bet x, returning (new state, charged, fee)

    The trader pays charged = C_γ(x;Π); the pool moves to Π - x + C(x;Π)
    and the fee is booked to fees_collected.
    """
    from . import fees

    x = check_bet(state, x)
    c = cost(state, x)
    charged, fee = fees.split_cost(c, x, state.fee_level)
    new_pi = state.pi.values - x.values + c
    if not np.min(new_pi) > 0:
        if state.utility.kind == HANSON:
            raise DomainException(_('Hanson market maker would default on this bet'))
        # rounding at the domain edge for huge bets
        raise DomainException(_('Trade would exhaust the liquidity of an outcome'))
    new_state = state.replace(pi=Payoff(state.space, new_pi),
                              fees_collected=state.fees_collected + fee)
    return new_state, charged, fee


def pricing_measure(state):
    """The unique pricing measure Q, or None when the utility is not differentiable here"""
    if state.utility.kind == HANSON:
        return utilities.hanson_density(state.utility.gamma, -state.pi)
    g = utilities.utility_gradient(state.utility, state.pi)
    if g is NOT_DIFFERENTIABLE:
        return None
    return DensityVector.normalized(state.space, g.values)


def supergradient_measure(state):
    """A pricing measure from the superdifferential, defined in every state"""
    measure = pricing_measure(state)
    if measure is not None:
        return measure
    g = utilities.utility_supergradient(state.utility, state.pi)
    return DensityVector.normalized(state.space, g.values)


def _richardson_ask(state, x):
    t0 = RICHARDSON_STEP * ess_inf(state.pi) / x.sup_norm()
    d = [cost(state, x * t) / t for t in (t0, t0 / 2, t0 / 4)]
    r1 = 2 * d[1] - d[0]
    r2 = 2 * d[2] - d[1]
    return (4 * r2 - r1) / 3


def _prices(state, x):
    if x.is_constant():
        return float(x.values[0]), float(x.values[0])
    measure = pricing_measure(state)
    if measure is not None:
        price = expect(x, measure)
        return price, price
    ask = _richardson_ask(state, x)
    bid = -_richardson_ask(state, -x)
    if bid > ask:
        logging.debug('price: extrapolated bid %.17g above ask %.17g', bid, ask)
        bid = ask = 0.5 * (bid + ask)
    return bid, ask


def price_ask(state, x):
    """Marginal cost of buying an infinitesimal amount of x"""
    return _prices(state, check_bet(state, x))[1]


def price_bid(state, x):
    """Marginal proceeds of selling an infinitesimal amount of x, -price_ask(-x)"""
    return _prices(state, check_bet(state, x))[0]


def quote(state, x):
    x = check_bet(state, x)
    bid, ask = _prices(state, x)
    return Quote(bid, ask, pricing_measure(state))


def _check_measure(state, q):
    if isinstance(q, DensityVector):
        check_same_space(state.pi, q)
        values = q.values
    else:
        values = np.asarray(q.values if isinstance(q, Payoff) else q, dtype=float)
    if values.shape != (state.space.size,) or not np.all(np.isfinite(values)):
        raise ValidationException(_('Target measure must have one finite value per atom'))
    if np.any(values <= 0):
        raise ValidationException(_('Target measure must be strictly positive on every atom'))
    return DensityVector.normalized(state.space, values)


def _stableswap_shape(lam, q, weights):
    """z with 1/z + λ/E[z] ∝ q, that is z = 1/(q - s) with s E[1/(q - s)] = λ"""
    if lam == 0:
        return 1.0 / q
    qmin = np.min(q)

    def h(s):
        return s * np.dot(weights, 1.0 / (q - s)) - lam

    upper = 0.5 * qmin
    while h(upper) <= 0:
        upper = qmin - 0.5 * (qmin - upper)
        if upper >= qmin:
            raise ConvergenceException(_('Could not bracket the StableSwap multiplier'))
    s = optimize.brentq(h, 0.0, upper, xtol=1e-15, rtol=1e-15, maxiter=MAX_ITERATIONS)
    return 1.0 / (q - s)


def _scale_to_level(spec, space, z, level):
    """κ z with u(κ z) = level

    u(κ z) = u(z) + d log κ, with d = 1 + λ for StableSwap, 1 for log and
    (1 - w) d_base + w for an essinf mix of weight w.
    """
    weights = space.weights
    base = spec.base if spec.kind == ESSINF else spec
    degree = 1.0 + (base.lam if base.kind == STABLESWAP else 0.0)
    w = utilities.mix_weight(spec, space)
    degree = (1.0 - w) * degree + w
    log_kappa = (level - utilities.eval_values(spec, z, weights)) / degree
    return np.exp(log_kappa) * z


def liquidity_with_measure(spec, space, q, level):
    """Liquidity whose pricing measure is q at utility level `level`

    For an essinf mix this is the shape of its base utility, which only
    carries q exactly while the mix weight is zero.
    """
    q = np.asarray(q.values if isinstance(q, Payoff) else q, dtype=float)
    weights = space.weights
    if spec.kind == HANSON:
        shape = -np.log(q) / spec.gamma

        def gap(c):
            return utilities.eval_values(spec, shape + c, weights) - level

        hi, step = -np.min(shape) + 1.0, 1.0
        while not gap(hi) > 0:
            hi, step = hi + step, 2.0 * step
        lo, step = hi - 1.0, 1.0
        while gap(lo) >= 0:
            lo, step = lo - step, 2.0 * step
        # -inf below the point where E[1 - exp(-γΠ)] reaches zero
        while not np.isfinite(gap(lo)):
            m = 0.5 * (lo + hi)
            if gap(m) >= 0:
                hi = m
            else:
                lo = m
        c = optimize.brentq(gap, lo, hi, xtol=1e-14, maxiter=MAX_ITERATIONS)
        return Payoff(space, shape + c)
    base = spec.base if spec.kind == ESSINF else spec
    if base.kind == STABLESWAP:
        z = _stableswap_shape(base.lam, q, weights)
    else:
        z = 1.0 / q
    return Payoff(space, _scale_to_level(spec, space, z, level))


def initial_liquidity(space, target, cash, utility):
    """Π whose pricing measure is the target distribution, at the utility level of cash·1"""
    utility = utilities.UtilitySpec.parse(utility)
    fresh = MarketState.initial(space, utility, cash)
    q = _check_measure(fresh, target)
    return liquidity_with_measure(utility, space, q.values, fresh.level())


def _essinf_optimal_liquidity(state, q):
    spec = state.utility
    weights = state.space.weights
    level = state.level()
    start = liquidity_with_measure(spec, state.space, q.values, level).values
    pq = weights * q.values

    def objective(z):
        y = np.exp(z)
        return float(np.dot(pq, y)), pq * y

    def constraint(z):
        return utilities.eval_values(spec, np.exp(z), weights) - level

    def constraint_jac(z):
        y = Payoff(state.space, np.exp(z))
        g = utilities.utility_supergradient(spec, y).values
        return weights * g * y.values

    result = optimize.minimize(objective, np.log(start), jac=True, method='SLSQP',
                               constraints=[{'type': 'ineq', 'fun': constraint,
                                             'jac': constraint_jac}],
                               options={'ftol': 1e-14, 'maxiter': MAX_ITERATIONS})
    slack = constraint(result.x)
    if not result.success and slack < -1e-8 * max(1.0, abs(level)):
        raise ConvergenceException(_('Optimal bet search failed: {message}')
                                   .format(message=result.message))
    logging.debug('optimal_bet: SLSQP %d iterations, slack %g', result.nit, slack)
    return np.exp(result.x)


def optimal_bet(state, q):
    """The bet maximizing E^q[x - C(x;Π)], returned as (x*, value)

    Solves the first order condition: the post-trade liquidity has
    pricing measure q at the current utility level.
    """
    q = _check_measure(state, q)
    spec = state.utility
    if spec.kind == HANSON:
        current = utilities.hanson_density(spec.gamma, -state.pi)
        x = Payoff(state.space, (np.log(q.values) - np.log(current.values)) / spec.gamma)
    elif spec.kind in (LOG, STABLESWAP) or utilities.mix_weight(spec, state.space) == 0.0:
        target = liquidity_with_measure(spec, state.space, q.values, state.level())
        x = state.pi - target
    else:
        x = Payoff(state.space, state.pi.values - _essinf_optimal_liquidity(state, q))
    value = expect(x, q) - cost(state, x)
    return x, value
