#!/usr/bin/env python3
#
# utilities.py - part of the lbamm tools
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

"""Market maker utility functions over remaining liquidity

Every liquidity-based market maker is defined by a utility u of the
per-outcome liquidity Π.  Log, StableSwap and the essential-infimum
mix are liquidity based; Hanson's exponential utility is kept as the
reference design and priced through its own closed form.
"""

import json
import logging

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from . import _
from . import common
from .exception import DomainException, ValidationException
from .measure import DensityVector, Payoff, check_same_space

LOG = 'log'
STABLESWAP = 'stableswap'
ESSINF = 'essinf'
HANSON = 'hanson'

KINDS = (LOG, STABLESWAP, ESSINF, HANSON)

KIND_ALIASES = {
    'log': LOG,
    'logarithmic': LOG,
    'constant-product': LOG,
    'stableswap': STABLESWAP,
    'stable-swap': STABLESWAP,
    'essinf': ESSINF,
    'essinfmix': ESSINF,
    'essinf-mix': ESSINF,
    'hanson': HANSON,
    'lmsr': HANSON,
}

# relative tolerance deciding whether the smallest liquidity is attained twice
TIE_TOLERANCE = 1e-12


class _NotDifferentiable:
    """Marker returned instead of a gradient"""

    def __repr__(self):
        return 'NOT_DIFFERENTIABLE'

    def __bool__(self):
        return False


NOT_DIFFERENTIABLE = _NotDifferentiable()


class UtilitySpec:
    """Tagged description of a market maker utility

    kind is one of KINDS; lam is the StableSwap weight, epsilon and base
    describe the essential-infimum mix, gamma the Hanson risk aversion.
    """

    def __init__(self, kind, lam=0.0, epsilon=None, base=None, gamma=None):
        kind = KIND_ALIASES.get(str(kind).lower())
        if kind is None:
            raise ValidationException(_("Unknown utility kind, choose from: {kinds}")
                                      .format(kinds=', '.join(KINDS)))
        self.kind = kind
        self.lam = 0.0
        self.epsilon = None
        self.base = None
        self.gamma = None
        if kind == STABLESWAP:
            self.lam = common.check_range('lambda', lam, low=0.0)
        elif kind == ESSINF:
            self.epsilon = common.check_range('epsilon', epsilon, low=0.0, high=1.0,
                                              low_open=True, high_open=True)
            if base is None:
                base = UtilitySpec(LOG)
            if not isinstance(base, UtilitySpec):
                base = UtilitySpec.parse(base)
            if base.kind not in (LOG, STABLESWAP):
                raise ValidationException(_('The base of an essinf mix must be log or stableswap'))
            self.base = base
        elif kind == HANSON:
            self.gamma = common.check_range('gamma', gamma, low=0.0, low_open=True)

    @classmethod
    def log(cls):
        return cls(LOG)

    @classmethod
    def stableswap(cls, lam):
        return cls(STABLESWAP, lam=lam)

    @classmethod
    def essinf_mix(cls, epsilon, base=None):
        return cls(ESSINF, epsilon=epsilon, base=base)

    @classmethod
    def hanson(cls, gamma):
        return cls(HANSON, gamma=gamma)

    @classmethod
    def parse(cls, value):
        """Read a spec from a dict, a JSON object string or the compact flag form

        The compact form is the kind followed by optional key=value
        parameters: ``log``, ``stableswap:lambda=2``,
        ``essinf:base=log,epsilon=0.4``, ``hanson:gamma=0.7``.
        """
        if isinstance(value, UtilitySpec):
            return value
        if isinstance(value, dict):
            return cls.from_dict(value)
        if not isinstance(value, str) or not value.strip():
            raise ValidationException(_('Cannot read a utility from {value!r}').format(value=value))
        text = value.strip()
        if text.startswith('{'):
            try:
                return cls.from_dict(json.loads(text))
            except json.JSONDecodeError as e:
                raise ValidationException(_('Utility is not valid JSON'), str(e))
        kind, _sep, rest = text.partition(':')
        params = common.parse_key_values(rest)
        params['kind'] = kind
        return cls.from_dict(params)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if 'kind' not in data:
            raise ValidationException(_('A utility needs a "kind"'))
        kind = KIND_ALIASES.get(str(data.pop('kind')).lower())
        lam = data.pop('lambda', data.pop('lam', 0.0))
        if kind == ESSINF:
            base = data.pop('base', LOG)
            epsilon = data.pop('epsilon', data.pop('eps', None))
            if isinstance(base, str) and base.lower() in KIND_ALIASES \
               and KIND_ALIASES[base.lower()] == STABLESWAP:
                base = cls(STABLESWAP, lam=lam)
            spec = cls(ESSINF, epsilon=epsilon, base=base)
        else:
            spec = cls(kind if kind else 'unknown', lam=lam, gamma=data.pop('gamma', None))
        for key in data:
            logging.warning(_("Ignoring unknown utility parameter '{key}'").format(key=key))
        return spec

    def to_dict(self):
        if self.kind == STABLESWAP:
            return {'kind': STABLESWAP, 'lambda': self.lam}
        if self.kind == ESSINF:
            return {'kind': ESSINF, 'epsilon': self.epsilon, 'base': self.base.to_dict()}
        if self.kind == HANSON:
            return {'kind': HANSON, 'gamma': self.gamma}
        return {'kind': LOG}

    @property
    def is_liquidity_based(self):
        return self.kind != HANSON

    def __eq__(self, other):
        return isinstance(other, UtilitySpec) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True))

    def __str__(self):
        if self.kind == STABLESWAP:
            return 'stableswap:lambda=%g' % self.lam
        if self.kind == ESSINF:
            if self.base.kind == STABLESWAP:
                return 'essinf:base=stableswap,lambda=%g,epsilon=%g' % (self.base.lam, self.epsilon)
            return 'essinf:base=log,epsilon=%g' % self.epsilon
        if self.kind == HANSON:
            return 'hanson:gamma=%g' % self.gamma
        return LOG

    __repr__ = __str__


def mix_weight(spec, space):
    """Weight on log(essinf Π) in an essinf mix on a finite space"""
    if spec.kind != ESSINF:
        return 0.0
    return max(spec.epsilon - space.min_weight, 0.0)


def eval_values(spec, values, weights):
    """utility_eval on bare numpy arrays, -inf outside the domain"""
    if spec.kind == HANSON:
        mass = np.dot(weights, -np.expm1(-spec.gamma * values))
        return float(np.log(mass)) if mass > 0 else -np.inf
    lowest = np.min(values)
    if not lowest > 0:
        return -np.inf
    logs = np.dot(weights, np.log(values))
    if spec.kind == LOG:
        return float(logs)
    if spec.kind == STABLESWAP:
        return float(logs + spec.lam * np.log(np.dot(weights, values)))
    w = max(spec.epsilon - float(np.min(weights)), 0.0)
    base = eval_values(spec.base, values, weights)
    if w == 0.0:
        return base
    return float((1.0 - w) * base + w * np.log(lowest))


def utility_eval(spec, pi):
    """u(Π), or -inf when Π leaves the utility's domain"""
    return eval_values(spec, pi.values, pi.space.weights)


def _smooth_gradient(spec, values, weights):
    if spec.kind == LOG:
        return 1.0 / values
    return 1.0 / values + spec.lam / np.dot(weights, values)


def _tied_minimum(values):
    lowest = np.min(values)
    return np.abs(values - lowest) <= TIE_TOLERANCE * abs(lowest)


def utility_gradient(spec, pi):
    """Density-form gradient of u at Π: ∂u/∂Π_i divided by the weight of atom i

    Returns NOT_DIFFERENTIABLE for Hanson and for an essinf mix with
    positive mix weight whose smallest liquidity is shared by two or
    more atoms.
    """
    values = pi.values
    weights = pi.space.weights
    if not np.min(values) > 0:
        raise DomainException(_('Liquidity must be strictly positive in every outcome'))
    if spec.kind == HANSON:
        return NOT_DIFFERENTIABLE
    if spec.kind in (LOG, STABLESWAP):
        return Payoff(pi.space, _smooth_gradient(spec, values, weights))
    w = mix_weight(spec, pi.space)
    g = _smooth_gradient(spec.base, values, weights)
    if w == 0.0:
        return Payoff(pi.space, g)
    tied = _tied_minimum(values)
    if np.count_nonzero(tied) > 1:
        return NOT_DIFFERENTIABLE
    k = int(np.argmin(values))
    g = (1.0 - w) * g
    g[k] += w / (values[k] * weights[k])
    return Payoff(pi.space, g)


def utility_supergradient(spec, pi):
    """A density-form element of the superdifferential of u at Π

    Equals utility_gradient where that exists.  For a tied essinf the
    mass of the log(essinf) term is spread over the tied atoms in
    proportion to their weights.
    """
    g = utility_gradient(spec, pi)
    if g is not NOT_DIFFERENTIABLE:
        return g
    if spec.kind == HANSON:
        return Payoff(pi.space, np.exp(-spec.gamma * pi.values))
    values = pi.values
    weights = pi.space.weights
    w = mix_weight(spec, pi.space)
    tied = _tied_minimum(values)
    g = (1.0 - w) * _smooth_gradient(spec.base, values, weights)
    g[tied] += w / (np.min(values) * weights[tied].sum())
    return Payoff(pi.space, g)


def hanson_cost(gamma, pi, x):
    """Cost of bet x to Hanson's market maker holding outstanding bets pi

    (1/γ) log(E[exp(γ(π + x))] / E[exp(γπ)]), independent of the cash
    reserves.
    """
    check_same_space(pi, x)
    gamma = common.check_range('gamma', gamma, low=0.0, low_open=True)
    if x.is_constant():
        return float(x.values[0])
    w = pi.space.weights
    # shift by the max of each exponent inside logsumexp
    return float((logsumexp(gamma * (pi.values + x.values), b=w)
                  - logsumexp(gamma * pi.values, b=w)) / gamma)


def hanson_density(gamma, pi):
    """Pricing measure of Hanson's market maker, dQ/dP ∝ exp(γπ)"""
    z = gamma * pi.values
    return DensityVector.normalized(pi.space, np.exp(z - np.max(z)))


def hanson_liquidity_check(gamma, L0, N):
    """True iff γ ≥ log(N)/L0, enough for solvency from the start"""
    if L0 <= 0 or N < 1:
        raise ValidationException(_('Need L0 > 0 and N >= 1'))
    return bool(gamma >= np.log(N) / L0)


def hanson_solvency_margin(gamma, pi, L):
    """Cash left over after the worst-case payout from the current bets

    Positive margin means every further bet can be covered: the
    remaining exposure of Hanson's maker is bounded by log(N)/γ.
    """
    return float(L - np.log(pi.space.size) / gamma - np.max(pi.values))


def hanson_marginal_cost(gamma, pi, atom, size):
    """Cost of size units of the indicator of atom, integrating marginal prices"""
    space = pi.space
    k = space.index(atom)
    w = space.weights
    values = gamma * pi.values

    def price(t):
        z = values.copy()
        z[k] += gamma * t
        z -= np.max(z)
        e = w * np.exp(z)
        return e[k] / e.sum()

    result, abserr = integrate.quad(price, 0.0, float(size), epsabs=1e-13, epsrel=1e-12)
    logging.debug('hanson_marginal_cost: quad error estimate %g', abserr)
    return float(result)
