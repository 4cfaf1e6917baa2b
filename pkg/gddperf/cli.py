#!/usr/bin/env python3
"""
gdd command line
Loads a run configuration, applies command-line overrides and dispatches to
one of the pfa / threshold / pd / curve / validate / null-dist modes
"""

import argparse
import logging
import sys
from typing import List, Optional

import numpy as np

from . import analytic
from .config import MODES, RunConfig
from .exceptions import ConfigurationError, GddError
from .model import db_to_linear
from .montecarlo import calibrate_threshold, null_statistics, sweep
from .report import ReportWriter
from .validation import ValidationSuite
from .version import __csv_schema__, __version__

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARTIAL = 2


def setup_logging(config: RunConfig) -> None:
    """Configure the root logger from log_level and log_file"""
    logging.basicConfig(
        level=getattr(logging, config.get('log_level', 'INFO')),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        filename=config.get('log_file'),
    )
    logging.getLogger().setLevel(getattr(logging, config.get('log_level', 'INFO')))


class GddRunner:
    """Builds the models once from a validated config and runs one mode"""

    def __init__(self, config: RunConfig):
        errors = config.validate()
        if errors:
            raise ConfigurationError("; ".join(errors), context="cli")
        self.config = config
        self.scenario = config.to_scenario()
        self.signal = config.to_signal_model(self.scenario)
        self.noise = config.to_noise_model()
        self.dist = analytic.DistParams.from_scenario(self.scenario)
        self.detectors = config.detectors
        self.order = config['quadrature_order']
        self.engine = dict(scm_mode=config.scm_mode, chunk_size=config['chunk_size'],
                           workers=config['workers'], progress=config['show_progress'])
        self.report = ReportWriter()

    @property
    def output(self) -> Optional[str]:
        return self.config['output']

    def run(self) -> int:
        mode = self.config['mode']
        logger.info(f"Running mode '{mode}' for O={self.scenario.n_channels}, P={self.scenario.n_columns}, "
                    f"Q={self.scenario.subspace_dim}, L={self.scenario.n_training}, "
                    f"pfa={self.scenario.pfa_target:g}, seed={self.scenario.seed}")
        handler = {
            'pfa': self.run_pfa,
            'threshold': self.run_threshold,
            'pd': self.run_pd,
            'curve': self.run_curve,
            'validate': self.run_validate,
            'null-dist': self.run_null_dist,
        }[mode]
        return handler()

    def run_pfa(self) -> int:
        eta = self.config['eta']
        rows = [(d, eta, float(analytic.pfa(d, eta, self.dist, order=self.order))) for d in self.detectors]
        self.report.emit(self.report.pfa_csv(rows), self.output)
        return EXIT_OK

    def run_threshold(self) -> int:
        rows = []
        for detector in self.detectors:
            eta = analytic.threshold(detector, self.scenario.pfa_target, self.dist, order=self.order)
            empirical = None
            if self.config['threshold_source'] == 'empirical':
                empirical = calibrate_threshold(self.scenario, self.signal, self.noise, detector,
                                                **self.engine)
            rows.append((detector, self.scenario.pfa_target, eta, empirical))
        self.report.emit(self.report.threshold_csv(rows), self.output)
        return EXIT_OK

    def run_pd(self) -> int:
        rows = []
        for detector in self.detectors:
            eta = self.config['eta']
            if eta is None:
                eta = analytic.threshold(detector, self.scenario.pfa_target, self.dist, order=self.order)
            for snr_db in self.scenario.snr_grid_db:
                p = self.dist.with_rho(db_to_linear(snr_db))
                rows.append((snr_db, detector, float(analytic.pd(detector, eta, p, order=self.order)),
                             eta, self.scenario.pfa_target))
        self.report.emit(self.report.pd_csv(rows), self.output)
        return EXIT_OK

    def run_curve(self) -> int:
        result = sweep(self.scenario, self.signal, self.noise, detectors=self.detectors,
                       threshold_source=self.config['threshold_source'],
                       quadrature_order=self.order, **self.engine)
        text = self.report.curve_csv(result.points)
        if not result.partial:
            self.report.emit(text, self.output)
            return EXIT_OK

        for failure in result.failures:
            logger.warning(f"Failed point {failure.detector.value} @ {failure.snr_db:g} dB: {failure.error}")
        target = f"{self.output}.partial" if self.output else None
        self.report.emit(text, target)
        logger.warning(f"{len(result.failures)} sweep point(s) failed; partial results"
                       + (f" written to {target}" if target else " printed"))
        return EXIT_PARTIAL

    def run_validate(self) -> int:
        suite = ValidationSuite(self.scenario, self.signal, self.noise,
                                null_samples=self.config['null_samples'],
                                quadrature_order=self.order,
                                chunk_size=self.config['chunk_size'],
                                workers=self.config['workers'],
                                progress=self.config['show_progress'])
        results = suite.run()
        self.report.emit(self.report.validation_report(results), self.output)
        return EXIT_OK if all(r.passed for r in results) else EXIT_FAILURE

    def run_null_dist(self) -> int:
        n = self.config['null_samples']
        samples = null_statistics(self.scenario, self.signal, self.noise, n,
                                  detectors=self.detectors, **self.engine)
        empirical = np.arange(1, n + 1) / n
        rows = []
        for detector in self.detectors:
            analytic_cdf = analytic.null_cdf(detector, samples[detector], self.dist, order=self.order)
            rows.extend(zip([detector] * n, samples[detector], empirical, analytic_cdf))
        self.report.emit(self.report.null_dist_csv(rows), self.output)
        return EXIT_OK


def run(config: RunConfig) -> int:
    """Run the configured mode and return the process exit status"""
    try:
        return GddRunner(config).run()
    except GddError as e:
        logger.debug("Run failed", exc_info=True)
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='gdd',
        description='Detection performance of the GLRGDD and AMGDD adaptive detectors',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  gdd curve --config configs/baseline.conf --out baseline.csv   # theory vs Monte Carlo PD curves
  gdd pfa --config configs/baseline.conf                    # closed-form PFA at the configured eta
  gdd validate --config configs/baseline.conf               # run the invariant suite
  gdd --export-config gdd.yaml                          # write the effective configuration
        """
    )
    parser.add_argument('mode', nargs='?', choices=MODES, help='What to compute (default: config mode)')
    parser.add_argument('--config', help='Path to configuration file (key = value, YAML or JSON)')
    parser.add_argument('--export-config', metavar='PATH', help='Export the effective configuration and exit')
    parser.add_argument('--out', help='Output file (default: stdout)')
    parser.add_argument('--seed', type=int, help='Master seed')
    parser.add_argument('--trials', type=int, help='Monte Carlo trials per SNR point')
    parser.add_argument('--calibration-trials', type=int, help='H0 trials for empirical thresholds')
    parser.add_argument('--eta', type=float, help='Threshold for pfa and pd modes')
    parser.add_argument('--workers', type=int, help='Monte Carlo worker processes')
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='Logging level')
    parser.add_argument('--no-progress', action='store_true', help='Hide progress bars')
    parser.add_argument('--version', action='version', version=f'gdd {__version__} (csv schema {__csv_schema__})')
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    values = {
        'mode': args.mode,
        'output': args.out,
        'seed': args.seed,
        'trials_pd': args.trials,
        'trials_calibration': args.calibration_trials,
        'eta': args.eta,
        'workers': args.workers,
        'log_level': args.log_level,
    }
    if args.no_progress:
        values['show_progress'] = False
    return {key: value for key, value in values.items() if value is not None}


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point for the gdd console script"""
    args = build_parser().parse_args(argv)

    try:
        config = RunConfig.from_file(args.config)
        config.update(_overrides(args))
    except ConfigurationError as e:
        print(f"ConfigurationError: {e}", file=sys.stderr)
        return EXIT_FAILURE

    setup_logging(config)
    logger.info(f"Configuration sources: {', '.join(config.get_config_sources())}")

    try:
        if args.export_config:
            config.save_to_file(args.export_config)
            print(f"Configuration exported to {args.export_config}")
            return EXIT_OK
        return run(config)
    except KeyboardInterrupt:
        print("\nOperation cancelled by user.", file=sys.stderr)
        return EXIT_FAILURE
    except GddError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
