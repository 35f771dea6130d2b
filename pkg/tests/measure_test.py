#!/usr/bin/env python3

import inspect
import optparse
import os
import sys
import unittest

import numpy as np

localmodule = os.path.realpath(
    os.path.join(os.path.dirname(inspect.getfile(inspect.currentframe())), '..'))
print('localmodule: ' + localmodule)
if localmodule not in sys.path:
    sys.path.insert(0, localmodule)

import lbamm.common
from lbamm.exception import ValidationException
from lbamm.measure import (DensityVector, OutcomeSpace, Payoff, ess_inf, ess_sup,
                           expect)


class MeasureTest(unittest.TestCase):
    '''lbamm/measure.py'''

    def test_uniform_space(self):
        space = OutcomeSpace.uniform(4)
        self.assertEqual(('w1', 'w2', 'w3', 'w4'), space.atoms)
        self.assertEqual(4, space.size)
        self.assertAlmostEqual(0.25, space.min_weight)
        self.assertEqual(2, space.index('w3'))
        space = OutcomeSpace.uniform(['A', 'B'])
        self.assertEqual(('A', 'B'), space.atoms)

    def test_space_validation(self):
        with self.assertRaises(ValidationException):
            OutcomeSpace([], [])
        with self.assertRaises(ValidationException):
            OutcomeSpace(['a', 'b'], [0.5, 0.6])
        with self.assertRaises(ValidationException):
            OutcomeSpace(['a', 'b'], [1.0, 0.0])
        with self.assertRaises(ValidationException):
            OutcomeSpace(['a', 'a'], [0.5, 0.5])
        with self.assertRaises(ValidationException):
            OutcomeSpace(['a', 'b', 'c'], [0.5, 0.5])
        with self.assertRaises(ValidationException):
            OutcomeSpace.uniform(2).index('w9')

    def test_from_unnormalized(self):
        space = OutcomeSpace.from_unnormalized(['a', 'b', 'c'], [1, 2, 1])
        np.testing.assert_allclose([0.25, 0.5, 0.25], space.weights)
        with self.assertRaises(ValidationException):
            OutcomeSpace.from_unnormalized(['a', 'b'], [1, -1])

    def test_spaces_compare_by_value(self):
        a = OutcomeSpace(['x', 'y'], [0.3, 0.7])
        b = OutcomeSpace(['x', 'y'], [0.3, 0.7])
        c = OutcomeSpace(['x', 'y'], [0.7, 0.3])
        self.assertEqual(a, b)
        self.assertEqual(hash(a), hash(b))
        self.assertNotEqual(a, c)
        # payoffs from equal spaces mix
        self.assertEqual(2.0, (a.ones() + b.ones())['x'])
        with self.assertRaises(ValidationException):
            a.ones() + c.ones()

    def test_payoff_arithmetic(self):
        space = OutcomeSpace.uniform(['A', 'B', 'C'])
        x = Payoff(space, [1, 2, 3])
        y = space.indicator('B')
        np.testing.assert_array_equal([1, 3, 3], (x + y).values)
        np.testing.assert_array_equal([0, 1, 2], (x - 1).values)
        np.testing.assert_array_equal([2, 1, 0], (3 - x).values)
        np.testing.assert_array_equal([2, 4, 6], (2 * x).values)
        np.testing.assert_array_equal([0.5, 1, 1.5], (x / 2).values)
        np.testing.assert_array_equal([-1, -2, -3], (-x).values)
        self.assertEqual(3.0, x['C'])
        self.assertEqual(1.0, x[0])
        self.assertEqual({'A': 1.0, 'B': 2.0, 'C': 3.0}, x.as_dict())
        self.assertEqual(3.0, (-x).sup_norm())

    def test_payoff_is_immutable(self):
        x = OutcomeSpace.uniform(2).ones()
        with self.assertRaises(ValueError):
            x.values[0] = 5.0

    def test_payoff_validation(self):
        space = OutcomeSpace.uniform(2)
        with self.assertRaises(ValidationException):
            Payoff(space, [1, 2, 3])
        with self.assertRaises(ValidationException):
            Payoff(space, [1, np.inf])
        with self.assertRaises(ValidationException):
            Payoff(space, [np.nan, 1])

    def test_indicator_and_constant(self):
        space = OutcomeSpace.uniform(['A', 'B', 'C'])
        np.testing.assert_array_equal([1, 0, 1], space.indicator(['A', 'C']).values)
        self.assertTrue(space.constant(4).is_constant())
        self.assertFalse(space.indicator('A').is_constant())
        self.assertEqual(0.0, space.zeros().sup_norm())

    def test_ess_bounds_and_expectation(self):
        space = OutcomeSpace(['a', 'b', 'c'], [0.2, 0.3, 0.5])
        x = Payoff(space, [4.0, -1.0, 2.0])
        self.assertEqual(-1.0, ess_inf(x))
        self.assertEqual(4.0, ess_sup(x))
        self.assertAlmostEqual(0.8 - 0.3 + 1.0, expect(x))
        q = DensityVector.from_probabilities(space, [0.0, 0.0, 1.0])
        self.assertAlmostEqual(2.0, expect(x, q))
        self.assertAlmostEqual(expect(x), expect(x, DensityVector.uniform(space)))

    def test_density_validation(self):
        space = OutcomeSpace(['a', 'b'], [0.25, 0.75])
        with self.assertRaises(ValidationException):
            DensityVector(space, [1.0, 2.0])
        with self.assertRaises(ValidationException):
            DensityVector(space, [-1.0, 5.0 / 3.0])
        with self.assertRaises(ValidationException):
            DensityVector.normalized(space, [0.0, 0.0])
        q = DensityVector.normalized(space, [2.0, 2.0])
        np.testing.assert_allclose([1.0, 1.0], q.values)
        np.testing.assert_allclose([0.25, 0.75], q.probabilities())
        self.assertTrue(q.is_strictly_positive())
        q = DensityVector.from_probabilities(space, [0.5, 0.5])
        np.testing.assert_allclose([2.0, 2.0 / 3.0], q.values)


if __name__ == "__main__":
    parser = optparse.OptionParser()
    parser.add_option("-v", "--verbose", action="store_true", default=False,
                      help="Spew out even more information than normal")
    (lbamm.common.options, args) = parser.parse_args(['--verbose'])

    newSuite = unittest.TestSuite()
    newSuite.addTest(unittest.makeSuite(MeasureTest))
    unittest.main()
