# CovapSim.CLI.OptionParser test suite

"""Unit test for CLI.OptionParser"""

import unittest
from optparse import OptionConflictError

from CovapSim.CLI.OptionParser import OptionParser


class CLIOptionParserTest(unittest.TestCase):

    def _parser(self):
        parser = OptionParser("dummy")
        parser.install_config_options()
        parser.install_output_options()
        return parser

    def test_000_defaults(self):
        """test CLI.OptionParser defaults"""
        options, args = self._parser().parse_args([])
        self.assertEqual(args, [])
        self.assertEqual(options.config, None)
        self.assertEqual(options.seed, None)
        self.assertEqual(options.sweep_parallel, 1)
        self.assertEqual(options.format, "table")
        self.assertFalse(options.debug)

    def test_001_options(self):
        """test CLI.OptionParser options"""
        options, args = self._parser().parse_args(
            ['-c', 'exp.json', '--seed', '3', '--sweep-parallel', '4',
             '-o', 'out', '-f', 'csv', 'simulate'])
        self.assertEqual(args, ['simulate'])
        self.assertEqual(options.config, 'exp.json')
        self.assertEqual(options.seed, 3)
        self.assertEqual(options.sweep_parallel, 4)
        self.assertEqual(options.out, 'out')
        self.assertEqual(options.format, 'csv')

    def test_002_invalid_values(self):
        """test positive and safestring checkers"""
        parser = self._parser()
        self.assertRaises(SystemExit, parser.parse_args,
                          ['--sweep-parallel', '0'])
        self.assertRaises(SystemExit, parser.parse_args,
                          ['--sweep-parallel', 'two'])
        self.assertRaises(SystemExit, parser.parse_args, ['-c', '-q'])
        self.assertRaises(SystemExit, parser.parse_args, ['-f', 'xml'])

    def test_003_conflicts(self):
        """test installing an option group twice"""
        parser = self._parser()
        self.assertRaises(OptionConflictError, parser.install_output_options)
