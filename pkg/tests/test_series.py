import unittest

import numpy as np
from sympy.polys.domains import QQ, QQ_I

from crjet.errors import BudgetError
from crjet.series import *

# Catalan numbers solve u = x + u^2
_DATA = {'catalan': "x + x**2 + 2*x**3 + 5*x**4 + 14*x**5",
         'sqrt': "1 + x/2 - x**2/8 + x**3/16 - 5*x**4/128",
         'grlex2': [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
        }


def _series(vars, expr, order=None):
    return TruncSeries.from_expr(vars, expr, order=order)


class series_tests(unittest.TestCase):
    def assertSeriesEqual(self, a, b):
        self.assertTrue((a - b).is_zero(), msg=f"{a} != {b}")

    def test_gauss(self):
        """Test coercion into Gaussian rationals"""

        self.assertEqual(gauss("1/2 - 3*I"), QQ_I(QQ(1, 2), QQ(-3)))
        self.assertEqual(gauss(0.5), QQ_I(QQ(1, 2), 0))
        self.assertEqual(gauss(7), QQ_I(7, 0))
        self.assertEqual(gauss(0.1, max_denominator=100), QQ_I(QQ(1, 10), 0))
        self.assertAlmostEqual(to_complex(gauss("3/4 + I/4")), 0.75+0.25j)
        self.assertEqual(conj(gauss("1/2 - 3*I")), gauss("1/2 + 3*I"))
        self.assertEqual(conj(conj(gauss("2/3 + I/5"))), gauss("2/3 + I/5"))
        self.assertEqual(conj(gauss(4)), gauss(4))
        with self.assertRaises(TypeError):
            gauss(True)
        with self.assertRaises(ValueError):
            gauss("x + 1")

    def test_random_gauss(self):
        """Test that random Gaussian rationals are reproducible"""

        a = [random_gauss(np.random.default_rng(7)) for _ in range(3)]
        b = [random_gauss(np.random.default_rng(7)) for _ in range(3)]
        self.assertEqual(a, b)
        self.assertEqual(random_gauss(np.random.default_rng(1), real=True).y, QQ(0))

    def test_exact_arithmetic(self):
        """Test that exact series never truncate"""

        vars = ('x', 'y')
        a = _series(vars, "1 + x*y")
        b = a**3
        self.assertTrue(b.exact)
        self.assertEqual(b.order, 6)
        self.assertSeriesEqual(b, _series(vars, "(1 + x*y)**3"))

    def test_truncated_product(self):
        """Test truncated products"""

        vars = ('x', 'y')
        a = truncate(_series(vars, "1 + x"), 3)
        b = a**4
        self.assertFalse(b.exact)
        self.assertEqual(b.order, 3)
        self.assertSeriesEqual(b, _series(vars, "1 + 4*x + 6*x**2 + 4*x**3"))

    def test_add_mul(self):
        """Test the order of sums and products of truncated series"""

        vars = ('x', 'y')
        a = truncate(_series(vars, "1 + x"), 2)
        b = truncate(_series(vars, "1 + y"), 3)
        s = add(a, _series(vars, "x**3 + y"))
        self.assertEqual(s.order, 2)
        self.assertSeriesEqual(s, truncate(_series(vars, "1 + x + y"), 2))

        p = mul(a, b)
        self.assertFalse(p.exact)
        self.assertEqual(p.order, 2)
        self.assertSeriesEqual(p, truncate(_series(vars, "1 + x + y + x*y"), 2))
        self.assertSeriesEqual(mul(a, b), a*b)
        self.assertSeriesEqual(add(a, b), a + b)

    def test_caps(self):
        """Test degree caps on a group of variables"""

        vars = ('x', 'y')
        a = TruncSeries(vars, {(0, 0): 1, (1, 0): 1, (0, 1): 1}, order=5, caps=((('x',), 1),))
        b = a*a
        self.assertSeriesEqual(b, _series(vars, "1 + 2*x + 2*y + 2*x*y + y**2"))
        self.assertEqual(b.caps, ((('x',), 1),))

        d = differentiate(b, 'x')
        self.assertEqual(d.order, 4)
        self.assertEqual(d.caps, ((('x',), 0),))
        self.assertSeriesEqual(d, _series(vars, "2 + 2*y"))

        with self.assertRaises(BudgetError):
            merge_caps(((('x',), -1),))

    def test_substitute_order_rule(self):
        """Test the truncation order of a composition"""

        a = _series(('x',), "x + x**2 + x**3", order=3)
        image = _series(('y',), "y**2 + y**3")
        c = substitute(a, {'x': image})
        self.assertEqual(c.order, 7)
        self.assertSeriesEqual(c, _series(('y',), "y**2 + y**3 + y**4 + 2*y**5 + 2*y**6 + 3*y**7"))

        exact = substitute(_series(('x',), "x**2 + 1"), {'x': _series(('y',), "y + 1")})
        self.assertTrue(exact.exact)
        self.assertSeriesEqual(exact, _series(('y',), "y**2 + 2*y + 2"))

    def test_substitute_errors(self):
        """Test the refused compositions"""

        a = _series(('x',), "x + x**2", order=4)
        with self.assertRaises(ValueError):
            substitute(a, {'x': _series(('y',), "1 + y")})
        capped = TruncSeries(('x', 'y'), {(1, 0): 1}, order=3, caps=((('x',), 1),))
        with self.assertRaises(ValueError):
            substitute(capped, {'x': TruncSeries.variable(('x', 'y'), 'y')})
        with self.assertRaises(ValueError):
            substitute(a, {'z': _series(('y',), "y")})

    def test_coefficient(self):
        """Test extraction of the coefficient of a monomial"""

        a = _series(('x', 'y'), "x*y + 2*x*y**2 + y + 3*x**2")
        c = coefficient(a, {'x': 1})
        self.assertEqual(c.vars, ('y',))
        self.assertSeriesEqual(c, _series(('y',), "y + 2*y**2"))

        t = truncate(a, 3)
        c = coefficient(t, {'x': 1})
        self.assertEqual(c.order, 2)

    def test_embed_rename(self):
        """Test changing the variable list of a series"""

        a = _series(('x',), "x**2 + I*x")
        b = embed(a, ('y', 'x'))
        self.assertEqual(b.vars, ('y', 'x'))
        self.assertSeriesEqual(b, _series(('y', 'x'), "x**2 + I*x"))
        c = rename(a, {'x': 'u'})
        self.assertSeriesEqual(c, _series(('u',), "u**2 + I*u"))
        self.assertSeriesEqual(conjugate(a), _series(('x',), "x**2 - I*x"))
        with self.assertRaises(ValueError):
            embed(a, ('y',))

    def test_evaluate(self):
        """Test exact evaluation at a point"""

        a = _series(('x', 'y'), "x**2*y + I*y")
        self.assertEqual(evaluate(a, [2, "1/2"]), gauss("2 + I/2"))
        self.assertEqual(vanishing_order(a, [1, 0]), None)
        self.assertEqual(vanishing_order(a, [0, 1]), 1)
        self.assertEqual(vanishing_order(_series(('x', 'y'), "x**2*y + x**3"), [1, 1]), 3)

    def test_homogeneous_part(self):
        """Test splitting off a homogeneous part"""

        a = _series(('x', 'y'), "1 + x + x*y + y**2 + x**3")
        self.assertSeriesEqual(homogeneous_part(a, 2), _series(('x', 'y'), "x*y + y**2"))
        with self.assertRaises(BudgetError):
            homogeneous_part(truncate(a, 2), 3)

    def test_solve_implicit(self):
        """Test the implicit function solver"""

        F = _series(('u', 'x'), "u - x - u**2")
        u, = solve_implicit([F], ['u'], order=5)
        self.assertEqual(u.order, 5)
        self.assertSeriesEqual(u, _series(('x',), _DATA['catalan'], order=5))

        with self.assertRaises(ValueError):
            solve_implicit([F], ['u'])
        with self.assertRaises(ValueError):
            solve_implicit([_series(('u', 'x'), "u**2 - x")], ['u'], order=3)

    def test_solve_implicit_system(self):
        """Test a two-unknown implicit system"""

        vars = ('u', 'v', 'x')
        F = [_series(vars, "u + v - x"), _series(vars, "u - v - x**2")]
        u, v = solve_implicit(F, ['u', 'v'], order=4)
        self.assertSeriesEqual(u, _series(('x',), "(x + x**2)/2", order=4))
        self.assertSeriesEqual(v, _series(('x',), "(x - x**2)/2", order=4))

    def test_reciprocal_root(self):
        """Test reciprocals and unit roots"""

        a = truncate(_series(('x',), "1 + x"), 5)
        self.assertSeriesEqual(reciprocal(a), _series(('x',), "1 - x + x**2 - x**3 + x**4 - x**5"))
        r = unit_root(truncate(a, 4), 2)
        self.assertSeriesEqual(r, _series(('x',), _DATA['sqrt']))
        self.assertSeriesEqual(r*r, truncate(a, 4))
        with self.assertRaises(ZeroDivisionError):
            reciprocal(_series(('x',), "x"))

    def test_laurent_c0(self):
        """Test the constant term of P(λ, t/λ^m)"""

        vars = ('lam', 't')
        P = _series(vars, "lam**2*t + lam*t + lam**4*t**2 + 3")
        c0 = laurent_c0(P, 'lam', 2)
        self.assertSeriesEqual(c0, _series(('t',), "3 + t + t**2"))
        self.assertEqual(laurent_c0(truncate(P, 6), 'lam', 2).order, 2)
        with self.assertRaises(ValueError):
            laurent_c0(P, 'lam', 0)

    def test_laurent_c0_oracle(self):
        """Test laurent_c0 against the full Laurent expansion"""

        rng = np.random.default_rng(0)
        vars = ('lam', 't1', 't2')
        for m in (1, 2, 3):
            for trial in range(10):
                terms = {}
                for alpha in multi_indices(3, 6):
                    if rng.random() < 0.4:
                        terms[alpha] = random_gauss(rng, bound=20)
                P = TruncSeries(vars, terms, exact=True)
                with self.subTest(m=m, trial=trial):
                    c0 = laurent_c0(P, 'lam', m)
                    oracle = LaurentSeries.expand(P, 'lam', m).constant_term()
                    if oracle is None:
                        self.assertTrue(c0.is_zero())
                    else:
                        self.assertSeriesEqual(c0, oracle)

    def test_laurent_order_bound(self):
        """Test the certified vanishing order of a Laurent constant term"""

        vars = ('lam', 't')
        delta = _series(('lam',), "lam")
        c0, certified = laurent_c0_order_bound(_series(vars, "lam**3*t**3"), 2, delta, 'lam')
        self.assertTrue(certified)
        self.assertSeriesEqual(c0, _series(('t',), "t**3"))
        with self.assertRaises(ValueError):
            laurent_c0_order_bound(_series(vars, "t"), 2, delta, 'lam')

    def test_multi_indices(self):
        """Test the graded-lexicographic exponent listing"""

        self.assertEqual(multi_indices(2, 2), _DATA['grlex2'])
        self.assertEqual(multi_indices(3, 2, min_degree=2)[0], (2, 0, 0))
        self.assertEqual(len(multi_indices(3, 4)), 35)


class series_test_suite(unittest.TestSuite):
    def __init__(self):
        unittest.TestSuite.__init__(self)

        loader = unittest.TestLoader()
        self.addTests(loader.loadTestsFromTestCase(series_tests))


if __name__ == '__main__':
    unittest.main()
