#!/usr/bin/env python3
#
# measure.py - part of the lbamm tools
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

"""Finite outcome spaces and the payoff vectors living on them"""

import numpy as np

from . import _
from .exception import ValidationException

WEIGHT_SUM_TOLERANCE = 1e-12
DENSITY_TOLERANCE = 1e-10


def _frozen(values):
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


class OutcomeSpace:
    """A finite probability space: ordered atom labels with positive weights"""

    def __init__(self, atoms, weights):
        atoms = tuple(str(a) for a in atoms)
        weights = np.asarray(weights, dtype=float)
        if len(atoms) == 0:
            raise ValidationException(_('An outcome space needs at least one atom'))
        if weights.ndim != 1 or len(weights) != len(atoms):
            raise ValidationException(_('Got {w} weights for {n} atoms')
                                      .format(w=weights.size, n=len(atoms)))
        if len(set(atoms)) != len(atoms):
            raise ValidationException(_('Atom labels must be unique: {atoms}')
                                      .format(atoms=', '.join(atoms)))
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise ValidationException(_('All atom weights must be strictly positive'))
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise ValidationException(_('Atom weights sum to {total}, not 1')
                                      .format(total=repr(weights.sum())))
        self._atoms = atoms
        self._weights = _frozen(weights)
        self._index = {a: i for i, a in enumerate(atoms)}

    @classmethod
    def uniform(cls, atoms):
        """Build an equally weighted space from labels or an atom count"""
        if isinstance(atoms, int):
            atoms = ['w%d' % (i + 1) for i in range(atoms)]
        atoms = list(atoms)
        return cls(atoms, np.full(len(atoms), 1.0 / len(atoms)))

    @classmethod
    def from_unnormalized(cls, atoms, raw):
        """Build a space from positive raw weights, renormalized to sum to 1"""
        raw = np.asarray(raw, dtype=float)
        if np.any(raw <= 0) or not np.all(np.isfinite(raw)):
            raise ValidationException(_('All atom weights must be strictly positive'))
        return cls(atoms, raw / raw.sum())

    @property
    def atoms(self):
        return self._atoms

    @property
    def weights(self):
        return self._weights

    @property
    def size(self):
        return len(self._atoms)

    @property
    def min_weight(self):
        return float(self._weights.min())

    def index(self, atom):
        try:
            return self._index[str(atom)]
        except KeyError:
            raise ValidationException(_("'{atom}' is not an atom of this space").format(atom=atom))

    def payoff(self, values):
        return Payoff(self, values)

    def constant(self, c):
        return Payoff(self, np.full(self.size, float(c)))

    def ones(self):
        return self.constant(1.0)

    def zeros(self):
        return self.constant(0.0)

    def indicator(self, atoms):
        """Payoff paying 1 on the given atom label(s) and 0 elsewhere"""
        if isinstance(atoms, str):
            atoms = [atoms]
        values = np.zeros(self.size)
        for a in atoms:
            values[self.index(a)] = 1.0
        return Payoff(self, values)

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, OutcomeSpace):
            return NotImplemented
        return self._atoms == other._atoms and np.array_equal(self._weights, other._weights)

    def __hash__(self):
        return hash((self._atoms, self._weights.tobytes()))

    def __repr__(self):
        return 'OutcomeSpace(%d atoms)' % self.size


class Payoff:
    """A random variable on a finite OutcomeSpace, one finite value per atom

    Depending on context this is a bet x, a liquidity state or a
    provision.  Instances are immutable, arithmetic returns new ones.
    """

    def __init__(self, space, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or len(values) != space.size:
            raise ValidationException(_('Payoff has {got} values, space has {n} atoms')
                                      .format(got=values.size, n=space.size))
        if not np.all(np.isfinite(values)):
            raise ValidationException(_('Payoff values must all be finite'))
        self.space = space
        self.values = _frozen(values)

    def _other(self, other):
        if isinstance(other, Payoff):
            check_same_space(self, other)
            return other.values
        return float(other)

    def __add__(self, other):
        return Payoff(self.space, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Payoff(self.space, self.values - self._other(other))

    def __rsub__(self, other):
        return Payoff(self.space, self._other(other) - self.values)

    def __mul__(self, other):
        return Payoff(self.space, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Payoff(self.space, self.values / self._other(other))

    def __neg__(self):
        return Payoff(self.space, -self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, atom):
        if isinstance(atom, str):
            return float(self.values[self.space.index(atom)])
        return float(self.values[atom])

    def is_constant(self):
        return bool(np.all(self.values == self.values[0]))

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def as_dict(self):
        return dict(zip(self.space.atoms, self.values.tolist()))

    def __repr__(self):
        return 'Payoff(%s)' % np.array2string(self.values, precision=6)


class DensityVector(Payoff):
    """A Radon-Nikodym density dQ/dP with respect to the space weights"""

    def __init__(self, space, values):
        super().__init__(space, values)
        if np.any(self.values < 0):
            raise ValidationException(_('Density values must be nonnegative'))
        total = float(np.dot(space.weights, self.values))
        if abs(total - 1.0) > DENSITY_TOLERANCE:
            raise ValidationException(_('Density integrates to {total}, not 1')
                                      .format(total=repr(total)))

    @classmethod
    def normalized(cls, space, raw):
        """Scale nonnegative raw values so their expectation is 1"""
        raw = np.asarray(raw, dtype=float)
        total = float(np.dot(space.weights, raw))
        if not np.isfinite(total) or total <= 0:
            raise ValidationException(_('Cannot normalize a density with mass {total}')
                                      .format(total=total))
        return cls(space, raw / total)

    @classmethod
    def from_probabilities(cls, space, probabilities):
        """Density of the measure giving each atom the given probability"""
        probabilities = np.asarray(probabilities, dtype=float)
        return cls.normalized(space, probabilities / space.weights)

    @classmethod
    def uniform(cls, space):
        return cls(space, np.ones(space.size))

    def probabilities(self):
        return self.values * self.space.weights

    def is_strictly_positive(self):
        return bool(np.all(self.values > 0))


def check_same_space(x, y):
    if x.space is not y.space and x.space != y.space:
        raise ValidationException(_('Payoffs live on different outcome spaces'))


def ess_inf(x):
    """Smallest value over the (all positively weighted) atoms"""
    return float(np.min(x.values))


def ess_sup(x):
    return float(np.max(x.values))


def expect(x, density=None):
    """E[x], or E^Q[x] when the density dQ/dP is given"""
    if density is None:
        return float(np.dot(x.space.weights, x.values))
    check_same_space(x, density)
    return float(np.dot(x.space.weights, density.values * x.values))
