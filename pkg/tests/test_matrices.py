import unittest

from crjet.series import TruncSeries, truncate, mul
from crjet.matrices import *


_VARS = ('x', 'y')


def _s(expr):
    return TruncSeries.from_expr(_VARS, expr)


class matrices_tests(unittest.TestCase):
    def assertSeriesEqual(self, a, b):
        self.assertTrue((a - b).is_zero(), msg=f"{a} != {b}")

    def test_det(self):
        """Test determinants of series matrices"""

        M = [[_s("1 + x"), _s("y")], [_s("x*y"), _s("2 - y")]]
        self.assertSeriesEqual(det_series(M), _s("(1 + x)*(2 - y) - x*y**2"))

        T = [[truncate(e, 2) for e in row] for row in M]
        d = det_series(T)
        self.assertFalse(d.exact)
        self.assertEqual(d.order, 2)
        with self.assertRaises(ValueError):
            det_series([[_s("x"), _s("y")]])

    def test_adjugate_inverse(self):
        """Test the adjugate and the inverse"""

        M = [[_s("1 + x"), _s("y")], [_s("x"), _s("1")]]
        adj = adjugate(M)
        det = det_series(M)
        for i in range(2):
            for j in range(2):
                total = mul(M[i][0], adj[0][j]) + mul(M[i][1], adj[1][j])
                with self.subTest(i=i, j=j):
                    self.assertSeriesEqual(total, det if i == j else TruncSeries.zero(_VARS))

        T = [[truncate(e, 4) for e in row] for row in M]
        inv = inverse_matrix(T)
        for i in range(2):
            for j in range(2):
                total = mul(T[i][0], inv[0][j]) + mul(T[i][1], inv[1][j])
                with self.subTest(i=i, j=j):
                    self.assertSeriesEqual(total, TruncSeries.constant(_VARS, 1 if i == j else 0))
        with self.assertRaises(ValueError):
            inverse_matrix([[_s("x"), _s("y")], [_s("1"), _s("1")]])

    def test_jacobian_rank(self):
        """Test Jacobians, ranks at points and generic ranks"""

        F = [_s("x*y"), _s("x**2*y**2"), _s("x + y")]
        J = jacobian(F, _VARS)
        self.assertSeriesEqual(J[0][0], _s("y"))
        self.assertEqual(rank_at(J, [0, 0]), 1)
        self.assertEqual(rank_at(J, [1, 1]), 1)
        self.assertEqual(generic_rank(J, seed=0), 2)

        G = [_s("x + y"), _s("(x + y)**2")]
        self.assertEqual(generic_rank(jacobian(G, _VARS), seed=3), 1)
        self.assertEqual(constant_matrix(jacobian(G, _VARS)).rank(), 1)

    def test_mat_vec(self):
        """Test matrix-vector products"""

        M = [[_s("1"), _s("x")], [_s("y"), _s("0")]]
        v = [_s("y"), _s("1")]
        out = mat_vec(M, v)
        self.assertSeriesEqual(out[0], _s("x + y"))
        self.assertSeriesEqual(out[1], _s("y**2"))


class matrices_test_suite(unittest.TestSuite):
    def __init__(self):
        unittest.TestSuite.__init__(self)

        loader = unittest.TestLoader()
        self.addTests(loader.loadTestsFromTestCase(matrices_tests))


if __name__ == '__main__':
    unittest.main()
