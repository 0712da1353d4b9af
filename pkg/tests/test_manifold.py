import unittest

import numpy as np
from sympy.polys.domains import QQ_I

from crjet.errors import ModelError, StageError
from crjet.series import TruncSeries, gauss, random_gauss
from crjet.catalog import load_catalog_model
from crjet.manifold import *


_INVALID = {'not real': 'model "x" {\n ambient 2;\n codim 1;\n rho 1: (w - tau1)/(2*I) - I*z*chi1;\n}\n',
            'not generic': 'model "x" {\n ambient 2;\n codim 1;\n rho 1: (w - tau1)^2;\n}\n',
            'origin not on M': 'model "x" {\n ambient 2;\n codim 1;\n im w = 1 + z*conj(z);\n}\n',
           }


class manifold_tests(unittest.TestCase):
    def assertSeriesEqual(self, a, b):
        self.assertTrue((a - b).is_zero(), msg=f"{a} != {b}")

    def test_parse(self):
        """Test parsing of a catalog model"""

        M = load_catalog_model('quadric')
        self.assertEqual((M.N, M.n, M.d), (2, 1, 1))
        self.assertEqual(M.vars, ('z1', 'w1', 'chi1', 'tau1'))
        self.assertTrue(M.exact)
        self.assertTrue(M.graph)
        self.assertTrue(M.is_real())
        self.assertTrue(M.is_generic())
        self.assertSeriesEqual(M.rho[0], TruncSeries.from_expr(M.vars, "(w1 - tau1)/(2*I) - z1*chi1"))

        C = load_catalog_model('codim2')
        self.assertEqual((C.N, C.n, C.d), (3, 1, 2))
        self.assertEqual(C.real_dimension, 4)

    def test_invalid(self):
        """Test rejection of invalid defining functions"""

        for name,text in _INVALID.items():
            with self.subTest(case=name):
                with self.assertRaises(ModelError):
                    parse_model(text)

    def test_points(self):
        """Test membership and real coordinates"""

        M = load_catalog_model('quadric')
        self.assertTrue(M.contains(["1/2", "I/4"]))
        self.assertFalse(M.contains([1, 0]))
        with self.assertRaises(ValueError):
            M.contains([0])

        Q = load_catalog_model('quartic')
        p = Q.point_from_real([1, 0, 0])
        self.assertEqual(p, [gauss(1), gauss("I")])
        self.assertTrue(Q.contains(p))

        L = load_catalog_model('light_cone')
        with self.assertRaises(ModelError):
            L.point_from_real([0, 0, 0, 0, 0])

    def test_translate(self):
        """Test moving a point of M to the origin"""

        Q = load_catalog_model('quartic')
        moved = Q.translate(Q.point_from_real([1, 0, 0]))
        self.assertTrue(moved.is_real())
        self.assertTrue(moved.contains([0, 0]))
        self.assertTrue(moved.graph)
        with self.assertRaises(ModelError):
            Q.translate([1, 0])

    def test_linear_change(self):
        """Test that the dilation (z, w) -> (2z, 4w) preserves the quadric"""

        M = load_catalog_model('quadric')
        image = M.linear_change([[2, 0], [0, 4]]).rescale([["1/4"]])
        self.assertSeriesEqual(image.rho[0], M.rho[0])
        with self.assertRaises(ValueError):
            M.linear_change([[1, 0], [1, 0]])
        with self.assertRaises(ValueError):
            M.rescale([["I"]])

    def test_rescale_constant(self):
        """Test that frame changes have to be constant"""

        M = load_catalog_model('quadric')
        quarter = TruncSeries.from_expr(M.vars, "1/4")
        self.assertSeriesEqual(M.rescale([[quarter]]).rho[0], M.rescale([["1/4"]]).rho[0])
        for entry in (TruncSeries.from_expr(M.vars, "1 + z1*chi1"), "1 + w1"):
            with self.subTest(entry=entry):
                with self.assertRaises(ValueError) as cm:
                    M.rescale([[entry]])
                self.assertIn('constant', str(cm.exception))
        with self.assertRaises(ValueError):
            M.rescale([[1, 0]])

    def test_tangential_fields(self):
        """Test the tangential CR vector fields"""

        M = load_catalog_model('quadric')
        basis = tangential_fields(M)
        self.assertEqual((basis.free, basis.solved), ((0,), (1,)))
        self.assertSeriesEqual(basis.fields[0][1], TruncSeries.from_expr(M.vars, "2*I*chi1"))
        self.assertSeriesEqual(basis.conj_fields[0][1], TruncSeries.from_expr(M.vars, "-2*I*z1"))
        for name in ('quadric', 'ex1_10', 'codim2', 'light_cone'):
            model = load_catalog_model(name)
            with self.subTest(model=name):
                for row in tangential_fields(model).residuals():
                    for r in row:
                        self.assertTrue(r.is_zero())

    def test_bracket(self):
        """Test the Levi bracket of the quadric fields"""

        M = load_catalog_model('quadric')
        basis = tangential_fields(M)
        L, Lbar = basis.holomorphic()[0], basis.antiholomorphic()[0]
        B = bracket(L, Lbar, M.vars)
        self.assertSeriesEqual(B[1], TruncSeries.constant(M.vars, QQ_I(0, -2)))
        self.assertTrue(B[0].is_zero())
        self.assertSeriesEqual(B[3], TruncSeries.constant(M.vars, QQ_I(0, -2)))

    def test_solved_form(self):
        """Test the exact solved form of the quadric"""

        M = load_catalog_model('quadric')
        Q, = solved_form(M)
        self.assertTrue(Q.exact)
        self.assertSeriesEqual(Q, TruncSeries.from_expr(('z1', 'chi1', 'tau1'), "tau1 + 2*I*z1*chi1"))
        self.assertTrue(is_normal(M))

    def test_normal_coordinates(self):
        """Test normal coordinates at a translated point"""

        M = load_catalog_model('quadric')
        moved = M.translate(["1/2", "I/4"])
        self.assertFalse(is_normal(moved))
        change, normal = normal_coordinates(moved)
        self.assertTrue(is_normal(normal))
        self.assertSeriesEqual(change[0], TruncSeries.variable(M.Z, 'z1'))
        self.assertSeriesEqual(change[1], TruncSeries.from_expr(M.Z, "w1 - I*z1"))
        self.assertSeriesEqual(normal.rho[0], M.rho[0])

    def test_invert_change(self):
        """Test inversion of a polynomial change of coordinates"""

        Z = ('z1', 'w1')
        change = [TruncSeries.from_expr(Z, "z1 + w1**2"), TruncSeries.variable(Z, 'w1')]
        inv = invert_change(change, Z, order=4)
        self.assertSeriesEqual(inv[0], TruncSeries.from_expr(Z, "z1 - w1**2"))
        self.assertSeriesEqual(inv[1], TruncSeries.variable(Z, 'w1'))

    def test_straighten_order(self):
        """Test the residual order of approximately straightened fields"""

        rng = np.random.default_rng(11)
        vars = ('z1', 'z2', 'w1')
        one, zero = TruncSeries.constant(vars, 1), TruncSeries.zero(vars)
        for k in range(0, 4):
            for trial in range(5):
                c = random_gauss(rng)
                if not c:
                    c = QQ_I.one
                tail = TruncSeries.from_expr(vars, f"z1**{k+2}")*c + TruncSeries.from_expr(vars, f"z1**{k+3}*w1")
                fields = [[one, zero, zero], [zero, one, tail]]
                with self.subTest(k=k, trial=trial):
                    result = straighten_approx(fields, k)
                    self.assertEqual(result.residual_order, k + 1)
                    self.assertFalse(result.residual_zero)
                    self.assertSeriesEqual(result.chi[0], TruncSeries.variable(vars, 'w1'))

    def test_straighten_errors(self):
        """Test frames that cannot be straightened"""

        vars = ('z1', 'z2', 'w1')
        one, zero = TruncSeries.constant(vars, 1), TruncSeries.zero(vars)
        k = 2
        twisted = TruncSeries.from_expr(vars, f"z1**{k+1}")
        with self.assertRaises(StageError):
            straighten_approx([[one, zero, zero], [zero, one, twisted]], k)
        with self.assertRaises(StageError):
            straighten_approx([[one, zero, zero], [one, zero, zero]], k)
        with self.assertRaises(ValueError):
            straighten_approx([[one, zero, zero], [zero, one, zero], [zero, zero, one]], k)

    def test_straighten_flow(self):
        """Test straightening of a single linear field"""

        vars = ('z1', 'w1')
        field = [TruncSeries.constant(vars, 1), TruncSeries.variable(vars, 'w1')]
        result = straighten_approx([field], 3)
        # χ is w e^z cut at degree 5 in z
        self.assertSeriesEqual(result.chi[0],
                               TruncSeries.from_expr(vars, "w1*(1 + z1 + z1**2/2 + z1**3/6 + z1**4/24 + z1**5/120)"))
        self.assertEqual(result.residual_order, 5)


class manifold_test_suite(unittest.TestSuite):
    def __init__(self):
        unittest.TestSuite.__init__(self)

        loader = unittest.TestLoader()
        self.addTests(loader.loadTestsFromTestCase(manifold_tests))


if __name__ == '__main__':
    unittest.main()
