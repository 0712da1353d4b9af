import unittest

import numpy as np

from crjet.errors import BudgetError, StageError
from crjet.catalog import load_catalog_model, load_catalog_jet
from crjet.jets import MapJet
from crjet.invariants import *


# Hörmander numbers and degeneracy of the catalog models
_DATA = {'quadric':         {'mu': [2],    'nu': 2, 'l': 1},
         'quadric3':        {'mu': [2],    'nu': 2, 'l': 1},
         'quadric_quartic': {'mu': [2],    'nu': 2, 'l': 1},
         'quartic':         {'mu': [4],    'nu': 4, 'l': None},
         'codim2':          {'mu': [2, 3], 'nu': 3, 'l': None},
         'light_cone':      {'mu': [2],    'nu': 2, 'l': 2},
        }


class invariants_tests(unittest.TestCase):
    def test_levi(self):
        """Test the Levi form of strongly pseudoconvex and flat models"""

        form = levi_form(load_catalog_model('quadric'))
        self.assertTrue(form.is_hermitian())
        self.assertEqual(form.rank(), 1)
        self.assertTrue(levi_nondegenerate(form))

        form = levi_form(load_catalog_model('quadric3'))
        self.assertEqual((form.n, form.d), (2, 1))
        self.assertTrue(levi_nondegenerate(form))

        for name in ('quartic', 'hyperplane', 'light_cone'):
            with self.subTest(model=name):
                self.assertFalse(levi_nondegenerate(levi_form(load_catalog_model(name))))

    def test_hoermander(self):
        """Test the Hörmander numbers"""

        for name,expected in _DATA.items():
            with self.subTest(model=name):
                data = hoermander_numbers(load_catalog_model(name), 6)
                self.assertTrue(data.finite_type)
                self.assertEqual(data.mu, expected['mu'])
                self.assertEqual(data.nu, expected['nu'])
                self.assertEqual(data.dims[-1], data.dims[0] + len(expected['mu']))

        flat = hoermander_numbers(load_catalog_model('hyperplane'), 6)
        self.assertFalse(flat.finite_type)
        self.assertIsNone(flat.nu)
        self.assertEqual(flat.as_dict()['finite_type'], False)

        with self.assertRaises(BudgetError):
            hoermander_numbers(load_catalog_model('light_cone', kappa_trunc=4), 6)

    def test_finite_nondegeneracy(self):
        """Test the degeneracy l of the catalog models"""

        for name,expected in _DATA.items():
            if name == 'codim2':
                continue
            with self.subTest(model=name):
                report = finite_nondegeneracy(load_catalog_model(name), 4)
                self.assertEqual(report.l, expected['l'])
                self.assertEqual(report.span_dims[-1] == report.target_dim, expected['l'] is not None)

    def test_stabilized(self):
        """Test the absolute negative verdict for |z|^4"""

        report = finite_nondegeneracy(load_catalog_model('quartic'), 6)
        self.assertIsNone(report.l)
        self.assertTrue(report.absolute)
        self.assertEqual(report.verdict(), "none ≤ 6 (stabilized: absolute)")

        Q = load_catalog_model('quartic')
        moved = Q.translate(Q.point_from_real([1, 0, 0]))
        self.assertEqual(finite_nondegeneracy(moved, 3).l, 1)
        self.assertTrue(levi_nondegenerate(levi_form(moved)))

    def test_jet_nondegeneracy(self):
        """Test the degeneracy of CR jets"""

        jet = load_catalog_jet('identity')
        self.assertEqual(jet_nondegeneracy(jet.source, jet.target, jet, 2).l, 1)

        jet = load_catalog_jet('embedding')
        self.assertEqual(jet_nondegeneracy(jet.source, jet.target, jet, 3).l, 2)

        M = jet.target
        bad = MapJet.from_expressions(jet.source, M, ["z1", "2*z1**2", "w1"], 8)
        with self.assertRaises(StageError):
            jet_nondegeneracy(jet.source, M, bad, 3)
        with self.assertRaises(BudgetError):
            jet_nondegeneracy(jet.source, M, jet.truncated(2), 3)

    def test_dimension_1(self):
        """Test nondegeneracy in dimension 1"""

        report = nondeg_in_dimension_1(load_catalog_model('ex1_10'), 4)
        self.assertIs(report.verdict, True)
        self.assertEqual(report.l, 3)

        report = nondeg_in_dimension_1(load_catalog_model('quadric3'), 3)
        self.assertIs(report.verdict, False)

        report = nondeg_in_dimension_1(load_catalog_model('hyperplane3'), 3)
        self.assertIs(report.verdict, False)

        with self.assertRaises(ValueError):
            nondeg_in_dimension_1(load_catalog_model('quadric'), 3)

    def test_bounds(self):
        """Test the jet order bounds"""

        b = bounds(1, 1, hoermander_numbers(load_catalog_model('quadric'), 4))
        self.assertEqual(b.as_dict(), {'r': 4, 'k': 19, 'm_bound': 2})
        self.assertEqual(bounds(2, 1, hoermander_numbers(load_catalog_model('codim2'), 4)).m_bound, 6)

        rng = np.random.default_rng(5)
        for trial in range(20):
            nu, l = int(rng.integers(2, 8)), int(rng.integers(1, 6))
            with self.subTest(nu=nu, l=l):
                b = bounds(1, l, nu)
                self.assertEqual(b.k, 8*nu*l + 2*nu - 1)
                self.assertEqual(b.r, 4*l)
                self.assertEqual(b.m_bound, 2*(nu - 1))
        self.assertEqual(bounds(1, 2, 2).r, 8)

        with self.assertRaises(ValueError):
            bounds(1, 1, 1)
        with self.assertRaises(ValueError):
            bounds(1, 0, 2)
        with self.assertRaises(ValueError):
            bounds(1, 1, hoermander_numbers(load_catalog_model('hyperplane'), 4))


class invariants_test_suite(unittest.TestSuite):
    def __init__(self):
        unittest.TestSuite.__init__(self)

        loader = unittest.TestLoader()
        self.addTests(loader.loadTestsFromTestCase(invariants_tests))


if __name__ == '__main__':
    unittest.main()
