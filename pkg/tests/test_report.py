#!/usr/bin/env python3
"""
Unit tests for CSV and validation report output
"""

import io
import unittest
from unittest.mock import patch

from gddperf.detectors import Detector
from gddperf.exceptions import ExportError
from gddperf.montecarlo import PerfPoint
from gddperf.report import CURVE_HEADER, ReportWriter, fmt
from gddperf.validation import CheckResult
from tests.test_utils import GddTestCase


def sample_point(**overrides):
    values = dict(snr_db=10.0, detector=Detector.GLRGDD, pd_theory=0.123456789012345, pd_mc=0.125,
                  ci_halfwidth=0.0099, eta=20.5, pfa_target=1e-3, seed=20250503, trials=10000)
    values.update(overrides)
    return PerfPoint(**values)


class TestFormatting(unittest.TestCase):

    def test_ten_significant_digits(self):
        self.assertEqual(fmt(0.123456789012345), '0.123456789')
        self.assertEqual(fmt(2.718281828459045), '2.718281828')
        self.assertEqual(fmt(0.5), '0.5')
        self.assertEqual(fmt(1e-3), '0.001')
        self.assertEqual(fmt(None), '')


class TestReportWriter(GddTestCase):

    def setUp(self):
        super().setUp()
        self.writer = ReportWriter()

    def test_curve_csv(self):
        text = self.writer.curve_csv([sample_point(), sample_point(detector=Detector.AMGDD, snr_db=12.0)])
        lines = text.split('\n')
        self.assertEqual(lines[0], ','.join(CURVE_HEADER))
        self.assertEqual(lines[1], '10,glrgdd,0.123456789,0.125,0.0099,20.5,0.001,20250503')
        self.assertTrue(lines[2].startswith('12,amgdd,'))
        self.assertNotIn('\r', text)
        self.assertTrue(text.endswith('\n'))

    def test_pfa_csv(self):
        text = self.writer.pfa_csv([(Detector.GLRGDD, 1.0, 0.5)])
        self.assertEqual(text, 'detector,eta,pfa\nglrgdd,1,0.5\n')

    def test_threshold_csv_leaves_missing_empirical_empty(self):
        text = self.writer.threshold_csv([(Detector.AMGDD, 1e-3, 0.75, None)])
        self.assertEqual(text.split('\n')[1], 'amgdd,0.001,0.75,')

    def test_validation_report(self):
        results = [CheckResult('a.first', True, 'fine', 0.01), CheckResult('b.second', False, 'off by 2', 1.5)]
        text = self.writer.validation_report(results)
        self.assertIn('PASS  a.first', text)
        self.assertIn('FAIL  b.second', text)
        self.assertTrue(text.rstrip().endswith('1/2 checks passed'))

    def test_emit_to_stdout(self):
        with patch('sys.stdout', new_callable=io.StringIO) as stdout:
            self.assertIsNone(self.writer.emit('x\n'))
        self.assertEqual(stdout.getvalue(), 'x\n')

    def test_emit_to_file(self):
        target = self.temp_dir / 'nested' / 'out.csv'
        self.assertEqual(self.writer.emit('a,b\n', str(target)), str(target))
        self.assertEqual(target.read_text(encoding='utf-8'), 'a,b\n')
        self.assertFalse((self.temp_dir / 'nested' / 'out.csv.tmp').exists())

    def test_emit_failure(self):
        blocker = self.temp_dir / 'file'
        blocker.write_text('', encoding='utf-8')
        with self.assertRaises(ExportError):
            self.writer.emit('x', str(blocker / 'out.csv'))

    def test_failed_replace_leaves_no_temp_file(self):
        target = self.temp_dir / 'out.csv'
        with patch('gddperf.report.os.replace', side_effect=OSError("disk full")):
            with self.assertRaises(ExportError):
                self.writer.emit('a,b\n', str(target))
        self.assertFalse(target.exists())
        self.assertFalse((self.temp_dir / 'out.csv.tmp').exists())


if __name__ == '__main__':
    unittest.main()
