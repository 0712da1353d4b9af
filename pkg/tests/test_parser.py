import unittest

from sympy import I, Symbol, expand

from crjet.errors import ModelError
from crjet.parser import *


_QUADRIC = """# sphere
model "quadric" {
    ambient 2;
    codim 1;
    im w = z*conj(z);
}
"""

_BAD = {'missing semicolon': ('model "bad" {\n    ambient 2;\n    codim 1\n    im w = z*conj(z);\n}\n', 4),
        'unknown symbol': ('model "bad" {\n    ambient 2;\n    codim 1;\n    im w = z*q;\n}\n', 4),
        'float constant': ('model "bad" {\n    ambient 2;\n    codim 1;\n    im w = 0.5*z*conj(z);\n}\n', 4),
        'missing brace': ('model "bad" {\n    ambient 2;\n    codim 1;\n    im w = z*conj(z);\n', None),
        'bad keyword': ('model "bad" {\n    ambient 2;\n    codim 1;\n    re w = z;\n}\n', 4),
       }


class parser_tests(unittest.TestCase):
    def test_tokenize(self):
        """Test token positions"""

        tokens = tokenize('model "x" {\n  ambient 2;')
        self.assertEqual([t.kind for t in tokens], ['name', 'string', 'punct', 'name', 'int', 'punct'])
        self.assertEqual((tokens[3].line, tokens[3].column), (2, 3))

    def test_read_model(self):
        """Test the block structure of a model file"""

        spec = read_model(_QUADRIC)
        self.assertEqual(spec.label, 'quadric')
        self.assertEqual((spec.ambient, spec.codim, spec.n), (2, 1, 1))
        self.assertEqual(len(spec.declarations), 1)
        decl = spec.declarations[0]
        self.assertEqual((decl.kind, decl.index, decl.expr), ('imw', 1, 'z*conj(z)'))
        self.assertEqual(decl.line, 5)

    def test_complexify(self):
        """Test the complexified defining functions"""

        rho, = complexify(read_model(_QUADRIC))
        z1, w1, chi1, tau1 = (Symbol(s) for s in ('z1', 'w1', 'chi1', 'tau1'))
        self.assertEqual(expand(rho - ((w1 - tau1)/(2*I) - z1*chi1)), 0)

        text = 'model "c" {\n ambient 3;\n codim 2;\n im w1 = z*conj(z);\n im w2 = re(z*conj(z)*z);\n}\n'
        rho1, rho2 = complexify(read_model(text))
        w2, tau2 = Symbol('w2'), Symbol('tau2')
        target = (w2 - tau2)/(2*I) - (z1**2*chi1 + z1*chi1**2)/2
        self.assertEqual(expand(rho2 - target), 0)

    def test_rho_form(self):
        """Test complexified input in the rho form"""

        text = 'model "r" {\n ambient 2;\n codim 1;\n rho 1: (w - tau1)/(2*I) - z1*chi1;\n}\n'
        rho, = complexify(read_model(text))
        z1, w1, chi1, tau1 = (Symbol(s) for s in ('z1', 'w1', 'chi1', 'tau1'))
        self.assertEqual(expand(rho - ((w1 - tau1)/(2*I) - z1*chi1)), 0)

    def test_errors(self):
        """Test the diagnostics for invalid model files"""

        for name,(text,line) in _BAD.items():
            with self.subTest(case=name):
                with self.assertRaises(ModelError) as cm:
                    complexify(read_model(text))
                if line is not None:
                    self.assertEqual(cm.exception.line, line)
                self.assertEqual(cm.exception.exit_code, 2)

    def test_expression_tokens(self):
        """Test that expressions are limited to arithmetic on model symbols"""

        # the expression starts in column 12
        for body,column,message in (('__import__("os").system("true")', 12, "unknown name '__import__'"),
                                    ('z*conj(z).real', 21, "unexpected character '.'"),
                                    ('z*conj(z) + "a"', 24, "unexpected character '\"'"),
                                    ('z*conj(z) + lambda', 24, "unknown name 'lambda'"),
                                    ('z*[conj(z)][0]', 14, "unexpected character '['")):
            text = 'model "bad" {\n    ambient 2;\n    codim 1;\n    im w = ' + body + ';\n}\n'
            with self.subTest(body=body):
                with self.assertRaises(ModelError) as cm:
                    complexify(read_model(text))
                self.assertEqual((cm.exception.line, cm.exception.column), (4, column))
                self.assertIn(message, str(cm.exception))

        text = 'model "ok" {\n    ambient 2;\n    codim 1;\n    im w = (z^2*conj(z)**2\n      + re(w))/3;\n}\n'
        rho, = complexify(read_model(text))
        self.assertIn(Symbol('tau1'), rho.free_symbols)

    def test_structure_errors(self):
        """Test the consistency checks on declarations"""

        mixed = 'model "m" {\n ambient 3;\n codim 2;\n im w1 = z*conj(z);\n rho 2: w2 - tau2;\n}\n'
        with self.assertRaises(ModelError):
            read_model(mixed)
        missing = 'model "m" {\n ambient 3;\n codim 2;\n im w1 = z*conj(z);\n}\n'
        with self.assertRaises(ModelError):
            read_model(missing)
        codim = 'model "m" {\n ambient 2;\n codim 2;\n im w1 = 0;\n im w2 = 0;\n}\n'
        with self.assertRaises(ModelError):
            read_model(codim)


class parser_test_suite(unittest.TestSuite):
    def __init__(self):
        unittest.TestSuite.__init__(self)

        loader = unittest.TestLoader()
        self.addTests(loader.loadTestsFromTestCase(parser_tests))


if __name__ == '__main__':
    unittest.main()
