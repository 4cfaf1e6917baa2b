#!/usr/bin/env python3
"""
Run configuration for gdd experiments
Flat `key = value` files, YAML or JSON, with schema validation, presets and
conversion into the scenario, signal and noise models
"""

import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml

from .detectors import Detector, ScmMode
from .exceptions import ConfigurationError
from .model import (
    DEFAULT_SNR_GRID_DB,
    NoiseModel,
    Scenario,
    SignalModel,
    default_signal_model,
    scenario_issues,
)

logger = logging.getLogger(__name__)

MODES = ['pfa', 'threshold', 'pd', 'curve', 'validate', 'null-dist']

PRESETS: Dict[str, Dict[str, Any]] = {
    'baseline': {'O': 12, 'P': 6, 'Q': 3, 'L': 11},
    'wide': {'O': 12, 'P': 9, 'Q': 3, 'L': 11},
}

_TRUE = {'true', 'yes', 'on', '1'}
_FALSE = {'false', 'no', 'off', '0'}
_NONE = {'', 'none', 'null'}


class RunConfig:
    """Experiment configuration with defaults, validation and source tracking"""

    DEFAULT_CONFIG: Dict[str, Any] = {
        'preset': None,
        # Scenario
        'O': 12,
        'P': 6,
        'Q': 3,
        'L': 11,
        'pfa': 1e-3,
        'snr_db': list(DEFAULT_SNR_GRID_DB),
        'seed': 20250503,
        'trials_calibration': 100000,
        'trials_pd': 10000,

        # Models and detectors
        'detectors': ['glrgdd', 'amgdd'],
        'covariance_corr': 0.95,
        'spatial_freq': 0.0,
        'scm_mode': 'augmented',

        # Run
        'mode': 'curve',
        'output': None,
        'eta': None,
        'threshold_source': 'analytic',
        'null_samples': 10000,

        # Engine
        'workers': 1,
        'chunk_size': 2000,
        'quadrature_order': 96,

        # Logging
        'log_level': 'INFO',
        'log_file': None,
        'show_progress': True,
    }

    VALIDATION_SCHEMA: Dict[str, Dict[str, Any]] = {
        'preset': {'type': str, 'choices': list(PRESETS), 'nullable': True},
        'O': {'type': int, 'min': 1, 'max': 4096},
        'P': {'type': int, 'min': 1, 'max': 4096},
        'Q': {'type': int, 'min': 1, 'max': 4096},
        'L': {'type': int, 'min': 1, 'max': 100000},
        'pfa': {'type': float, 'min': 0.0, 'max': 1.0},
        'snr_db': {'type': list, 'item_type': float},
        'seed': {'type': int, 'min': 0, 'max': 2 ** 64 - 1},
        'trials_calibration': {'type': int, 'min': 1, 'max': 10 ** 9},
        'trials_pd': {'type': int, 'min': 1, 'max': 10 ** 9},
        'detectors': {'type': list, 'item_type': str, 'choices': [d.value for d in Detector]},
        'covariance_corr': {'type': float, 'min': 0.0, 'max': 0.999999},
        'spatial_freq': {'type': float, 'min': -1e6, 'max': 1e6},
        'scm_mode': {'type': str, 'choices': [m.value for m in ScmMode]},
        'mode': {'type': str, 'choices': MODES},
        'output': {'type': str, 'nullable': True},
        'eta': {'type': float, 'min': 0.0, 'max': 1e300, 'nullable': True},
        'threshold_source': {'type': str, 'choices': ['analytic', 'empirical']},
        'null_samples': {'type': int, 'min': 10, 'max': 10 ** 8},
        'workers': {'type': int, 'min': 1, 'max': 256},
        'chunk_size': {'type': int, 'min': 1, 'max': 10 ** 6},
        'quadrature_order': {'type': int, 'min': 8, 'max': 1024},
        'log_level': {'type': str, 'choices': ['DEBUG', 'INFO', 'WARNING', 'ERROR']},
        'log_file': {'type': str, 'nullable': True},
        'show_progress': {'type': bool},
    }

    def __init__(self, config_dict: Optional[Dict[str, Any]] = None):
        self.config = _copy_defaults(self.DEFAULT_CONFIG)
        self._config_sources: List[str] = ["defaults"]

        if config_dict:
            self.update(config_dict)
            self._config_sources.append("init_dict")

    @classmethod
    def from_text(cls, text: str, source: str = "<text>") -> 'RunConfig':
        instance = parse_config(text)
        instance._config_sources[-1] = source
        return instance

    @classmethod
    def from_file(cls, config_path: Optional[str] = None) -> 'RunConfig':
        """Load from an explicit path, else the first standard location found, else defaults"""
        if config_path:
            path = Path(config_path)
            if not path.exists():
                raise ConfigurationError(f"Config file not found: {config_path}")
            return cls._load_from_path(path)

        standard_paths = [
            Path.cwd() / 'gdd.yaml',
            Path.cwd() / 'gdd.yml',
            Path.cwd() / 'gdd.json',
            Path.cwd() / 'gdd.conf',
            Path.home() / '.config' / 'gdd.yaml',
        ]
        for path in standard_paths:
            if path.exists():
                instance = cls._load_from_path(path)
                logger.info(f"Loaded configuration from {path}")
                return instance

        logger.info("No configuration file found. Using defaults.")
        return cls()

    @classmethod
    def _load_from_path(cls, path: Path) -> 'RunConfig':
        try:
            text = path.read_text(encoding='utf-8')
        except OSError as e:
            raise ConfigurationError(f"IO error reading {path}: {e}")

        suffix = path.suffix.lower()
        if suffix not in ('.yaml', '.yml', '.json'):
            return cls.from_text(text, source=str(path))

        try:
            config_dict = yaml.safe_load(text) if suffix != '.json' else json.loads(text)
        except yaml.YAMLError as e:
            raise ConfigurationError(f"YAML parsing error in {path}: {e}")
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"JSON parsing error in {path}: {e}")

        if config_dict is None:
            config_dict = {}
        if not isinstance(config_dict, dict):
            raise ConfigurationError(f"{path}: expected a flat mapping of keys to values")

        instance = cls()
        instance.apply(config_dict, source=str(path))
        return instance

    def apply(self, values: Dict[str, Any], source: str,
              lines: Optional[Dict[str, int]] = None) -> None:
        """Coerce, validate and apply raw values; presets go first, explicit keys override.

        Every failure is collected and reported in one ConfigurationError.
        """
        lines = lines or {}
        errors: List[str] = []
        coerced: Dict[str, Any] = {}

        for key, raw in values.items():
            where = _where(key, lines)
            if key not in self.VALIDATION_SCHEMA:
                errors.append(f"{where}unknown key '{key}'")
                continue
            try:
                value = coerce_value(key, raw, self.VALIDATION_SCHEMA[key])
            except ValueError as e:
                errors.append(f"{where}key '{key}': {e}")
                continue
            error = self._validate_value(key, value, self.VALIDATION_SCHEMA[key])
            if error:
                errors.append(f"{where}{error}")
                continue
            coerced[key] = value

        if errors:
            raise ConfigurationError("; ".join(errors), context=source)

        preset = coerced.get('preset')
        if preset:
            self.config.update(PRESETS[preset])
        self.config.update(coerced)
        self._config_sources.append(source)

        problems = [f"{_where(key, lines)}key '{key}': {message}"
                    for key, message in self.problems(include_mode=False)]
        if problems:
            raise ConfigurationError("; ".join(problems), context=source)

    def save_to_file(self, path: Union[str, Path], format: Optional[str] = None) -> None:
        """Export the effective configuration as YAML or JSON (by extension)"""
        path = Path(path)
        if format is None:
            format = 'json' if path.suffix.lower() == '.json' else 'yaml'

        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            export_config = dict(self.config)
            with open(path, 'w', encoding='utf-8') as f:
                if format == 'yaml':
                    yaml.safe_dump(export_config, f, default_flow_style=False, sort_keys=False)
                elif format == 'json':
                    json.dump(export_config, f, indent=2)
                else:
                    raise ConfigurationError(f"Unsupported format: {format}")
            logger.info(f"Configuration saved to {path}")
        except ConfigurationError:
            raise
        except Exception as e:
            raise ConfigurationError(f"Failed to save configuration to {path}: {e}")

    def validate(self) -> List[str]:
        """Schema errors plus scenario and mode requirements"""
        errors = []
        for key, value in self.config.items():
            error = self._validate_value(key, value, self.VALIDATION_SCHEMA[key])
            if error:
                errors.append(error)
        if errors:
            return errors
        return [f"{key}: {message}" for key, message in self.problems()]

    def problems(self, include_mode: bool = True) -> List[Tuple[str, str]]:
        """Cross-key problems as (key, message): scenario bounds and mode requirements.

        Mode requirements are left out while loading a file, since command-line
        overrides may still supply them.
        """
        found = list(scenario_issues(self.to_scenario(check=False)))
        pfa = self.config['pfa']

        if include_mode and self.config['mode'] == 'pfa' and self.config['eta'] is None:
            found.append(('eta', "mode 'pfa' requires eta"))
        if self.config['scm_mode'] == 'raw' and self.config['L'] < self.config['O']:
            found.append(('scm_mode', f"raw SCM needs L >= O (L={self.config['L']}, O={self.config['O']})"))
        if self.config['threshold_source'] == 'empirical' and 0.0 < pfa < 1.0:
            needed = math.ceil(10.0 / pfa - 1e-9)
            if self.config['trials_calibration'] < needed:
                found.append(('trials_calibration',
                              f"{self.config['trials_calibration']} trials cannot calibrate PFA {pfa:g} "
                              f"(need at least {needed})"))
        if not self.config['detectors']:
            found.append(('detectors', "at least one detector is required"))
        return found

    def _validate_value(self, key: str, value: Any, schema: Dict[str, Any]) -> Optional[str]:
        if value is None:
            return None if schema.get('nullable') else f"{key}: a value is required"

        expected_type = schema['type']
        if not _is_type(value, expected_type):
            return f"{key}: expected {expected_type.__name__}, got {type(value).__name__}"

        if expected_type is list:
            item_type = schema['item_type']
            for item in value:
                if not _is_type(item, item_type):
                    return f"{key}: expected {item_type.__name__} items, got {item!r}"
                if 'choices' in schema and item not in schema['choices']:
                    return f"{key}: value '{item}' not in allowed choices {schema['choices']}"
            return None

        if 'min' in schema and value < schema['min']:
            return f"{key}: value {value} is below minimum {schema['min']}"
        if 'max' in schema and value > schema['max']:
            return f"{key}: value {value} is above maximum {schema['max']}"
        if 'choices' in schema and value not in schema['choices']:
            return f"{key}: value '{value}' not in allowed choices {schema['choices']}"
        return None

    def get(self, key: str, default: Any = None) -> Any:
        return self.config.get(key, default)

    def set(self, key: str, value: Any) -> None:
        """Set one value after coercion and schema validation"""
        self.update({key: value})

    def update(self, config_dict: Dict[str, Any]) -> None:
        errors = []
        coerced = {}
        for key, value in config_dict.items():
            if key not in self.VALIDATION_SCHEMA:
                errors.append(f"unknown key '{key}'")
                continue
            try:
                value = coerce_value(key, value, self.VALIDATION_SCHEMA[key])
            except ValueError as e:
                errors.append(f"{key}: {e}")
                continue
            error = self._validate_value(key, value, self.VALIDATION_SCHEMA[key])
            if error:
                errors.append(error)
            coerced[key] = value

        if errors:
            raise ConfigurationError(f"Validation errors: {'; '.join(errors)}")
        self.config.update(coerced)

    def reset_to_defaults(self) -> None:
        self.config = _copy_defaults(self.DEFAULT_CONFIG)
        self._config_sources = ["defaults"]

    def get_config_sources(self) -> List[str]:
        return self._config_sources.copy()

    def to_scenario(self, check: bool = True) -> Scenario:
        c = self.config
        scenario = Scenario(
            n_channels=c['O'], n_columns=c['P'], subspace_dim=c['Q'], n_training=c['L'],
            pfa_target=c['pfa'], snr_grid_db=tuple(c['snr_db']), seed=c['seed'],
            trials_calibration=c['trials_calibration'], trials_pd=c['trials_pd'],
        )
        return scenario.require_valid() if check else scenario

    def to_signal_model(self, scenario: Optional[Scenario] = None) -> SignalModel:
        return default_signal_model(scenario or self.to_scenario(), self.config['spatial_freq'])

    def to_noise_model(self) -> NoiseModel:
        return NoiseModel.exponential(self.config['O'], self.config['covariance_corr'])

    @property
    def detectors(self) -> List[Detector]:
        return [Detector(d) for d in self.config['detectors']]

    @property
    def scm_mode(self) -> ScmMode:
        return ScmMode(self.config['scm_mode'])

    def __getitem__(self, key: str) -> Any:
        return self.config[key]

    def __setitem__(self, key: str, value: Any) -> None:
        self.set(key, value)

    def __contains__(self, key: str) -> bool:
        return key in self.config

    def __repr__(self) -> str:
        return f"RunConfig(sources={self._config_sources})"


def _copy_defaults(defaults: Dict[str, Any]) -> Dict[str, Any]:
    return {k: list(v) if isinstance(v, list) else v for k, v in defaults.items()}


def _where(key: str, lines: Dict[str, int]) -> str:
    return f"line {lines[key]}: " if key in lines else ""


def _is_type(value: Any, expected: type) -> bool:
    if expected in (int, float) and isinstance(value, bool):
        return False
    return isinstance(value, expected)


def _coerce_scalar(raw: Any, target: type) -> Any:
    if target is bool:
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in _TRUE:
            return True
        if text in _FALSE:
            return False
        raise ValueError(f"cannot read {raw!r} as a boolean")

    if isinstance(raw, bool):
        raise ValueError(f"expected {target.__name__}, got a boolean")

    if target is int:
        if isinstance(raw, int):
            return raw
        number = float(raw) if not isinstance(raw, float) else raw
        if not math.isfinite(number) or not number.is_integer():
            raise ValueError(f"{raw!r} is not an integer")
        if isinstance(raw, str) and '.' not in raw and 'e' not in raw.lower():
            return int(raw.strip())
        return int(number)

    if target is float:
        value = float(raw)
        if not math.isfinite(value):
            raise ValueError(f"{raw!r} is not a finite number")
        return value

    return str(raw).strip().strip('"\'')


def coerce_value(key: str, raw: Any, schema: Dict[str, Any]) -> Any:
    """Turn a text or YAML/JSON value into the schema type; raises ValueError"""
    if raw is None or (isinstance(raw, str) and raw.strip().lower() in _NONE):
        if schema.get('nullable'):
            return None
        if raw is None:
            raise ValueError("a value is required")

    if schema['type'] is list:
        items = raw.split(',') if isinstance(raw, str) else raw
        if not isinstance(items, (list, tuple)):
            items = [items]
        item_type = schema['item_type']
        try:
            return [_coerce_scalar(item.strip() if isinstance(item, str) else item, item_type)
                    for item in items if not (isinstance(item, str) and not item.strip())]
        except (TypeError, ValueError) as e:
            raise ValueError(str(e))

    try:
        value = _coerce_scalar(raw, schema['type'])
    except (TypeError, ValueError) as e:
        raise ValueError(str(e) if str(e) else f"cannot read {raw!r} as {schema['type'].__name__}")
    if key == 'log_level':
        value = value.upper()
    return value


def parse_config(text: str) -> RunConfig:
    """Parse the flat `key = value` format; `#` starts a comment.

    Every parse or validation failure is reported with its line number and key.
    """
    errors: List[str] = []
    values: Dict[str, str] = {}
    lines: Dict[str, int] = {}

    for lineno, raw_line in enumerate(text.splitlines(), 1):
        line = raw_line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        key, value = (part.strip() for part in line.split('=', 1))
        if not key:
            errors.append(f"line {lineno}: missing key")
            continue
        if key in values:
            errors.append(f"line {lineno}: key '{key}' repeats line {lines[key]}")
            continue
        values[key] = value
        lines[key] = lineno

    config = RunConfig()
    try:
        config.apply(values, source="config", lines=lines)
    except ConfigurationError as e:
        errors.append(e.message)

    if errors:
        raise ConfigurationError("; ".join(errors), context="config")
    return config


def load_config(config_path: Optional[str] = None) -> RunConfig:
    return RunConfig.from_file(config_path)


if __name__ == "__main__":
    if len(sys.argv) > 1:
        RunConfig().save_to_file(sys.argv[1])
        print(f"Default configuration exported to {sys.argv[1]}")
    else:
        print("Usage: python -m gddperf.config <output_file>")
