import os
import json
import argparse
import tempfile
import unittest

from crjet.errors import BudgetError, StageError
from crjet.catalog import entries, jet_entries, catalog_entry, jet_entry
from crjet.report import SCHEMA, Report, write_report
from crjet.commands import *


class commands_tests(unittest.TestCase):
    def test_config(self):
        """Test the run configuration"""

        config = RunConfig()
        self.assertEqual((config.command, config.kappa_trunc, config.seed, config.format), ('analyze', 10, 0, 'json'))
        self.assertEqual(config.effective_l_max, 9)
        self.assertEqual(RunConfig(l_max=3).effective_l_max, 3)
        self.assertEqual(config.real_point(3), [0.0, 0.0, 0.0])
        self.assertEqual(RunConfig(point='0.5,0,1').real_point(3), [0.5, 0.0, 1.0])
        self.assertNotIn('out', config.as_dict())

        args = argparse.Namespace(command='segre', model='quadric', kappa_trunc=12, verbose=True)
        config = RunConfig.from_args(args)
        self.assertEqual((config.command, config.model, config.kappa_trunc), ('segre', 'quadric', 12))

        with self.assertRaises(ValueError):
            RunConfig(kappa_trunc=1)
        with self.assertRaises(ValueError):
            RunConfig(format='xml')
        with self.assertRaises(ValueError):
            RunConfig(point='1,2').real_point(3)
        with self.assertRaises(BudgetError):
            RunConfig().require_kappa(12, 'a test')

    def test_analyze(self):
        """Test the analysis of the quadric"""

        report = cmd_analyze(RunConfig(model='quadric', l_max=3))
        results = report.results
        self.assertEqual(results['levi'], {'rank': 1, 'nondegenerate': True})
        self.assertEqual(results['hoermander']['mu'], [2])
        self.assertEqual(results['nondegeneracy']['l'], 1)
        self.assertEqual(results['bounds'], {'r': 4, 'k': 19, 'm_bound': 2})
        self.assertNotIn('dim1_nondeg', results)
        self.assertEqual(report.diagnostics, [])

    def test_analyze_degenerate(self):
        """Test the analysis of models without bounds"""

        report = cmd_analyze(RunConfig(model='quartic', l_max=4))
        self.assertEqual(report.results['nondegeneracy']['l'], "none ≤ 4 (stabilized: absolute)")
        self.assertIsNone(report.results['bounds'])
        self.assertEqual(len(report.diagnostics), 1)

        report = cmd_analyze(RunConfig(model='quartic', l_max=4, point='1,0,0'))
        self.assertEqual(report.results['nondegeneracy']['l'], 1)
        self.assertEqual(report.results['bounds']['r'], 4)

        report = cmd_analyze(RunConfig(model='light_cone', l_max=3))
        self.assertFalse(report.results['levi']['nondegenerate'])
        self.assertTrue(report.results['hoermander']['finite_type'])
        self.assertEqual(report.results['hoermander']['nu'], 2)
        self.assertEqual(report.results['nondegeneracy']['l'], 2)
        self.assertEqual(report.results['bounds']['r'], 8)

        report = cmd_analyze(RunConfig(model='hyperplane3', l_max=3))
        self.assertFalse(report.results['hoermander']['finite_type'])
        self.assertIs(report.results['dim1_nondeg']['verdict'], False)

        with self.assertRaises(ValueError):
            cmd_analyze(RunConfig())

    def test_segre(self):
        """Test the Segre report"""

        results = cmd_segre(RunConfig(command='segre', model='quadric')).results
        self.assertEqual((results['s'], results['N'], results['ranks']), (2, 2, [1, 2]))
        self.assertTrue(results['palindrome'])
        self.assertEqual((results['m'], results['m_predicted'], results['verdict']), (2, 2, 'PASS'))
        self.assertEqual(results['delta_valuation'], 2)

        report = cmd_segre(RunConfig(command='segre', model='hyperplane'))
        self.assertEqual(report.results['verdict'], 'infinite type suspected')
        self.assertNotIn('m', report.results)

    def test_parametrize(self):
        """Test the parametrization report and the system artifact"""

        with self.assertRaises(BudgetError):
            cmd_parametrize(RunConfig(command='parametrize', jet='embedding', l_max=3))
        with self.assertRaises(StageError):
            cmd_parametrize(RunConfig(command='parametrize', jet='degenerate', l_max=3))

        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, 'system.json')
            report = cmd_parametrize(RunConfig(command='parametrize', jet='identity', system=path))
            self.assertEqual((report.results['l'], report.results['r'], report.results['guaranteed_order']), (1, 4, 5))
            self.assertIn('box', report.results)
            with open(path, 'r') as fh:
                artifact = json.load(fh)
            self.assertEqual(artifact['schema'], SYSTEM_SCHEMA)
            self.assertEqual((artifact['source_model'], artifact['target_model']), ('quadric', 'quadric'))
            self.assertEqual(len(artifact['system']['expansion']), 2)

            report = cmd_reconstruct(RunConfig(command='reconstruct', system=path, jet='dilation',
                                               grid=0.05, grid_points=2))
            self.assertTrue(report.results['accepted'])
            self.assertEqual(len(report.results['samples']), 8)
            self.assertEqual(report.results['r'], 4)

            artifact['system']['expansion'][0]['vars'] = ['a', 'b']
            with open(path, 'w') as fh:
                json.dump(artifact, fh)
            with self.assertRaises(ValueError):
                cmd_reconstruct(RunConfig(command='reconstruct', system=path, jet='dilation'))

    def test_catalog(self):
        """Test the catalog report"""

        results = cmd_catalog(RunConfig(command='catalog')).results
        self.assertEqual(len(results['models']), len(entries()))
        self.assertEqual(len(results['jets']), len(jet_entries()))

        results = cmd_catalog(RunConfig(command='catalog', model='quartic')).results
        self.assertEqual([m['name'] for m in results['models']], ['quartic'])
        self.assertEqual([j['name'] for j in results['jets']], ['square'])

    def test_annotations(self):
        """Test every catalog annotation against the pipeline"""

        for entry in entries():
            for check in check_entry(entry):
                with self.subTest(model=entry.name, key=check['key']):
                    self.assertTrue(check['ok'], msg=f"expected {check['expected']!r}, got {check['got']!r}")
        for entry in jet_entries():
            for check in check_jet_entry(entry):
                with self.subTest(jet=entry.name, key=check['key']):
                    self.assertTrue(check['ok'], msg=f"expected {check['expected']!r}, got {check['got']!r}")

        entry = catalog_entry('quadric')
        entry.annotations = {'volume': 1}
        with self.assertRaises(ValueError):
            check_entry(entry)

    def test_selftest(self):
        """Test the self test on a single model"""

        report = cmd_selftest(RunConfig(command='selftest', model='quadric_quartic'))
        self.assertTrue(report.results['passed'])
        self.assertEqual(report.results['failed'], 0)
        keys = {(c['name'], c['key']) for c in report.results['checks']}
        self.assertIn(('embedding', 'l'), keys)

    def test_report(self):
        """Test the report formats"""

        report = Report('analyze', 'quadric', results={'levi': {'rank': 1}, 'ranks': [1, 2]},
                        diagnostics=['note'], config={'seed': 0})
        data = json.loads(write_report(report))
        self.assertEqual(data['schema'], SCHEMA)
        self.assertEqual(sorted(data), ['command', 'config', 'diagnostics', 'model', 'results', 'schema'])
        text = write_report(report, format='text')
        self.assertEqual(text, "analyze: quadric\n  levi:\n    rank: 1\n  ranks: [1, 2]\n  ! note\n")
        with self.assertRaises(ValueError):
            write_report(report, format='xml')

        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, 'report.json')
            write_report(report, path=path)
            with open(path, 'r') as fh:
                self.assertEqual(json.load(fh)['model'], 'quadric')


class commands_test_suite(unittest.TestSuite):
    def __init__(self):
        unittest.TestSuite.__init__(self)

        loader = unittest.TestLoader()
        self.addTests(loader.loadTestsFromTestCase(commands_tests))


if __name__ == '__main__':
    unittest.main()
