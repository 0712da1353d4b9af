import unittest

import numpy as np

from crjet.errors import ModelError, BudgetError, OutOfBoxError
from crjet.series import TruncSeries, gauss, to_complex
from crjet.catalog import load_catalog_model, load_catalog_jet
from crjet.jets import MapJet
from crjet.reflection import parametrize
from crjet.report import series_from_json
from crjet.system import *
from crjet.system import _JetFlow


# Rational points of the quadric in (Re z, Im z, Re w) and maps of the quadric
# into itself, the last one a Heisenberg translation
_DATA = {'points': [("1/10", 0, 0), (0, "1/10", 0), (0, 0, "1/10"), ("-1/20", "1/20", 0), ("1/20", 0, "-1/20"),
                    (0, "-1/10", "1/20"), ("1/10", "1/10", "1/10"), ("-1/10", "1/20", "-1/10"),
                    ("3/100", "-7/100", "1/25"), ("-1/25", "-3/50", "-9/100")],
         'maps': [["z1", "w1"], ["2*z1", "4*w1"], ["I*z1", "w1"], ["z1 + 1/2", "w1 + I*z1 + I/4"]],
         'grid_radius': 0.1,
         # 4-jet of the automorphism (z, w) -> (z, w)/(1 + w/3)
         'inversion': ["z1*(1 - w1/3 + w1**2/9 - w1**3/27)", "w1 - w1**2/3 + w1**3/9 - w1**4/27"],
        }


def _inversion(value, a=1/3):
    z, w = value
    return np.array([z/(1 + a*w), w/(1 + a*w)])


class system_tests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.anchor = load_catalog_jet('identity')
        cls.model = cls.anchor.source
        cls.par = parametrize(cls.model, cls.model, cls.anchor, 1)
        cls.system = complete_system(cls.par)

    def test_embedding(self):
        """Test the graph parametrization of the quadric"""

        X = RealEmbedding(self.model)
        self.assertEqual(X.dimension, 3)
        np.testing.assert_allclose(X([1, 2, 3]), [1+2j, 3+5j])
        np.testing.assert_allclose(X.jacobian([1, 2, 3]), [[1, 1j, 0], [2j, 4j, 1]])
        with self.assertRaises(ModelError):
            RealEmbedding(load_catalog_model('light_cone'))

    def test_grid(self):
        """Test the reconstruction grid"""

        self.assertEqual(grid_points([1, 2], 0.5, 1), [[1.0, 2.0]])
        grid = grid_points([0, 0, 0], 0.1, 2)
        self.assertEqual(len(grid), 8)
        self.assertEqual(grid[0], [-0.1, -0.1, -0.1])
        self.assertEqual(grid[-1], [0.1, 0.1, 0.1])
        self.assertEqual(len(grid_points([0, 0], 1, 3)), 9)
        with self.assertRaises(ValueError):
            grid_points([0], 1, 0)

    def test_phi_at_origin(self):
        """Test Φ at the base point"""

        self.assertEqual(self.system.r, 4)
        for name,exprs in (('identity', ["z1", "w1"]), ('dilation', ["2*z1", "4*w1"]), ('rotation', ["I*z1", "w1"])):
            with self.subTest(jet=name):
                out = self.system.evaluate([0, 0, 0], load_catalog_jet(name))
                self.assertEqual(out, MapJet.from_expressions(self.model, self.model, exprs, 5))
                self.assertTrue(all(not c for c in self.system.section([0, 0, 0], load_catalog_jet(name))))

    def test_phi_at_point(self):
        """Test Φ at rational points away from the base point"""

        M = self.model
        for i,x in enumerate(_DATA['points']):
            exprs = _DATA['maps'][i % len(_DATA['maps'])]
            F = [TruncSeries.from_expr(M.Z, e) for e in exprs]
            point = M.point_from_real([gauss(v) for v in x])
            with self.subTest(point=x, map=exprs):
                jet = MapJet.at_point(M, M, F, point, 4)
                out = self.system.evaluate(x, jet)
                expected = MapJet.at_point(M, M, F, point, 5)
                self.assertEqual(out.coefficients, expected.coefficients)

    def test_state_jet(self):
        """Test that float jet coordinates are moved onto the target"""

        y = [to_complex(v) for v in self.anchor.coordinates()]
        y[0], y[len(y)//2] = 0.1+0j, 0.3j
        jet = self.system.state_jet(y)
        self.assertEqual(jet.value(), [gauss("1/10"), gauss("I/100")])
        self.assertEqual(jet.coordinates()[1:len(y)//2], self.anchor.coordinates()[1:len(y)//2])

    def test_flow_top_block(self):
        """Test that the jet flow takes its top order from the current state"""

        M = self.model
        flow = _JetFlow(self.system, RealEmbedding(M), np.zeros(3))
        index = {beta: b for b,beta in enumerate(flow.top_indices)}
        origin = np.zeros(3)

        inversion = MapJet.from_expressions(M, M, _DATA['inversion'], 4)
        flow.restart(origin, np.array([to_complex(v) for v in inversion.coordinates()]))
        top = flow.top_values(origin)
        self.assertAlmostEqual(top[1,index[(0, 5)]], 120/81)
        self.assertAlmostEqual(top[0,index[(1, 4)]], 24/81)

        flow.restart(origin, np.array([to_complex(v) for v in self.anchor.coordinates()]))
        np.testing.assert_array_equal(flow.top_values(origin), 0)
        self.assertEqual(flow.restarts, 2)

    def test_budget(self):
        """Test that a low reflection depth gives no complete system"""

        par = parametrize(self.model, self.model, self.anchor, 1, k=10)
        self.assertEqual(par.guaranteed_order, 2)
        with self.assertRaises(BudgetError):
            complete_system(par)
        with self.assertRaises(BudgetError):
            self.system.evaluate([0, 0, 0], self.anchor.truncated(3))

    def test_reconstruct_identity(self):
        """Test reconstruction of the identity on a grid"""

        X = RealEmbedding(self.model)
        grid = grid_points([0, 0, 0], _DATA['grid_radius'], 2)
        samples = reconstruct_map(self.system, [0, 0, 0], self.anchor, grid, h=0.1)
        self.assertEqual(len(samples), len(grid))
        for sample in samples:
            np.testing.assert_allclose(sample.value, X(sample.x), rtol=0, atol=1e-10)
            self.assertLess(sample.target_residual, 1e-10)
            self.assertLess(sample.path_gap, 1e-10)
            data = sample.to_json()
            self.assertEqual(sorted(data), ['jet_residuals', 'value', 'x'])

    def test_reconstruct(self):
        """Test reconstruction of a dilation and of a non-polynomial automorphism"""

        M = self.model
        X = RealEmbedding(M)
        inversion = MapJet.from_expressions(M, M, _DATA['inversion'], 4)
        for name,jet,image,tol in (('dilation', load_catalog_jet('dilation'), lambda v: v*np.array([2, 4]), 1e-9),
                                   ('inversion', inversion, _inversion, 1e-6)):
            with self.subTest(jet=name):
                samples = reconstruct_map(self.system, [0, 0, 0], jet, [[0.1, -0.05, 0.05]], h=0.1)
                sample, = samples
                np.testing.assert_allclose(sample.value, image(X(sample.x)), rtol=0, atol=tol)
                self.assertLess(sample.target_residual, tol)
                self.assertLess(sample.path_gap, 1e-6)

    def test_reconstruct_perturbed(self):
        """Test that a jet not sending M into M' shows a target residual"""

        M = self.model
        perturbed = MapJet.from_expressions(M, M, ["21*z1/10", "4*w1"], 4)
        samples = reconstruct_map(self.system, [0, 0, 0], perturbed, [[0.1, 0, 0]], h=0.1, check_paths=False)
        self.assertGreater(samples[0].target_residual, 1e-6)
        self.assertIsNone(samples[0].path_gap)

    def test_box(self):
        """Test the validity box"""

        jet = load_catalog_jet('dilation')
        self.system.check_box([0.05, 0, 0], jet)
        with self.assertRaises(OutOfBoxError):
            reconstruct_map(self.system, [0, 0, 0], jet, [[0.5, 0, 0]])
        far = MapJet.from_expressions(self.model, self.model, ["10*z1", "100*w1"], 4)
        with self.assertRaises(OutOfBoxError):
            self.system.check_box([0, 0, 0], far)
        with self.assertRaises(ValueError):
            reconstruct_map(self.system, [0, 0, 0], jet, [[0, 0, 0]], h=0)

    def test_json(self):
        """Test the stored description of a complete system"""

        data = self.system.to_json()
        self.assertEqual(data['x_radius'], DEFAULT_X_RADIUS)
        self.assertEqual(data['jet_radius'], DEFAULT_JET_RADIUS)
        self.assertEqual((data['r'], data['k'], data['guaranteed_order']), (4, 19, 5))

        stored = [series_from_json(f) for f in data['expansion']]
        self.assertEqual(len(stored), 2)
        for a,b in zip(stored, self.par.psi_k):
            self.assertTrue((a - b).is_zero())
        system = complete_system(self.par)
        system.remember([0, 0, 0], self.anchor, stored)
        self.assertIs(system.expansion([0, 0, 0], self.anchor)[0], stored[0])


class system_test_suite(unittest.TestSuite):
    def __init__(self):
        unittest.TestSuite.__init__(self)

        loader = unittest.TestLoader()
        self.addTests(loader.loadTestsFromTestCase(system_tests))


if __name__ == '__main__':
    unittest.main()
