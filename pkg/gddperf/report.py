#!/usr/bin/env python3
"""
Result output for gdd runs
CSV tables for every mode and the plain-text validation report, written to a
file or to stdout
"""

import contextlib
import csv
import io
import logging
import os
import sys
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, List, Optional, Sequence

from .exceptions import ExportError

if TYPE_CHECKING:
    from .montecarlo import PerfPoint
    from .validation import CheckResult

logger = logging.getLogger(__name__)

CURVE_HEADER = ['snr_db', 'detector', 'pd_theory', 'pd_mc', 'ci_halfwidth', 'eta', 'pfa_target', 'seed']
PFA_HEADER = ['detector', 'eta', 'pfa']
THRESHOLD_HEADER = ['detector', 'pfa_target', 'eta_analytic', 'eta_empirical']
PD_HEADER = ['snr_db', 'detector', 'pd_theory', 'eta', 'pfa_target']
NULL_DIST_HEADER = ['detector', 'statistic', 'empirical_cdf', 'analytic_cdf']


def fmt(value: Optional[float]) -> str:
    """Ten significant digits; empty for a missing value"""
    return '' if value is None else f"{value:.10g}"


def render_csv(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


class ReportWriter:
    """Formats result tables and sends them to a file or stdout"""

    def curve_csv(self, points: Sequence['PerfPoint']) -> str:
        return render_csv(CURVE_HEADER, (
            [fmt(p.snr_db), p.detector.value, fmt(p.pd_theory), fmt(p.pd_mc),
             fmt(p.ci_halfwidth), fmt(p.eta), fmt(p.pfa_target), str(p.seed)]
            for p in points))

    def pfa_csv(self, rows: Sequence[tuple]) -> str:
        return render_csv(PFA_HEADER, ([d.value, fmt(eta), fmt(pfa)] for d, eta, pfa in rows))

    def threshold_csv(self, rows: Sequence[tuple]) -> str:
        return render_csv(THRESHOLD_HEADER, (
            [d.value, fmt(target), fmt(analytic), fmt(empirical)]
            for d, target, analytic, empirical in rows))

    def pd_csv(self, rows: Sequence[tuple]) -> str:
        return render_csv(PD_HEADER, (
            [fmt(snr), d.value, fmt(pd), fmt(eta), fmt(target)] for snr, d, pd, eta, target in rows))

    def null_dist_csv(self, rows: Sequence[tuple]) -> str:
        return render_csv(NULL_DIST_HEADER, (
            [d.value, fmt(stat), fmt(empirical), fmt(analytic)] for d, stat, empirical, analytic in rows))

    def validation_report(self, results: Sequence['CheckResult']) -> str:
        width = max((len(r.name) for r in results), default=0)
        lines: List[str] = []
        for r in results:
            status = 'PASS' if r.passed else 'FAIL'
            lines.append(f"{status}  {r.name:<{width}}  {r.seconds:7.2f}s  {r.detail}")
        failed = sum(not r.passed for r in results)
        lines.append(f"{len(results) - failed}/{len(results)} checks passed")
        return "\n".join(lines) + "\n"

    def emit(self, text: str, output_path: Optional[str] = None) -> Optional[str]:
        """Write text to output_path (replacing it atomically) or to stdout"""
        if output_path is None:
            sys.stdout.write(text)
            sys.stdout.flush()
            return None

        path = Path(output_path)
        temp_path = path.with_name(path.name + '.tmp')
        try:
            if path.parent != Path(''):
                path.parent.mkdir(parents=True, exist_ok=True)
            with open(temp_path, 'w', encoding='utf-8', newline='') as f:
                f.write(text)
            os.replace(temp_path, path)
        except OSError as e:
            with contextlib.suppress(OSError):
                temp_path.unlink()
            raise ExportError(f"Failed to write {path}: {e}", context="report")
        logger.info(f"Results written to {path}")
        return str(path)
