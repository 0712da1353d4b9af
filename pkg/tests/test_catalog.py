import os
import unittest

from crjet.catalog import *


class catalog_tests(unittest.TestCase):
    def test_listing(self):
        """Test the catalog listing"""

        names = [e.name for e in entries()]
        for name in ('quadric', 'quartic', 'ex1_10', 'codim2', 'light_cone', 'hyperplane'):
            self.assertIn(name, names)
        for entry in entries():
            with self.subTest(model=entry.name):
                self.assertTrue(entry.text.lstrip().startswith(('#', 'model')))
                self.assertEqual(sorted(entry.annotations), sorted(entry.provenance))
                self.assertTrue(set(entry.provenance.values()) <= {'literature', 'derived', 'trivial'})
        for entry in jet_entries():
            with self.subTest(jet=entry.name):
                self.assertTrue(os.path.exists(entry.path))
                self.assertIn(entry.source, names)
                self.assertIn(entry.target, names)

    def test_unknown(self):
        """Test unknown catalog names"""

        with self.assertRaises(ValueError):
            catalog_entry('sphere')
        with self.assertRaises(ValueError):
            jet_entry('sphere')
        with self.assertRaises(FileNotFoundError):
            resolve_model('sphere')
        with self.assertRaises(FileNotFoundError):
            resolve_jet('sphere')

    def test_resolve(self):
        """Test resolving names and paths"""

        by_name = resolve_model('quadric')
        by_path = resolve_model(os.path.join(DATA, 'quadric.model'))
        self.assertEqual(by_name.label, by_path.label)
        self.assertTrue((by_name.rho[0] - by_path.rho[0]).is_zero())
        self.assertIs(load_catalog_model('quadric'), by_name)
        self.assertIs(load_catalog_model('quadric', 10), by_name)
        self.assertIs(resolve_model('quadric', 12), load_catalog_model('quadric', 12))
        self.assertEqual(load_catalog_model('quadric', 12).kappa_trunc, 12)

        jet = resolve_jet(os.path.join(DATA, 'jets', 'dilation.json'))
        self.assertEqual(jet, load_catalog_jet('dilation'))
        self.assertEqual(jet_entry('dilation').map, ["2*z1", "4*w1"])


class catalog_test_suite(unittest.TestSuite):
    def __init__(self):
        unittest.TestSuite.__init__(self)

        loader = unittest.TestLoader()
        self.addTests(loader.loadTestsFromTestCase(catalog_tests))


if __name__ == '__main__':
    unittest.main()
