"""
Run configuration documents.

A document is a flat YAML mapping of the physical keys below, optionally with a
`sweep` block. Documents are checked against SCHEMA before any model object is
built; build_models returns validated configurations in internal units.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from jsonschema import Draft7Validator

from .exceptions import ConfigurationError
from .model_utils import (BellCatState, CavityConfig, ProbeConfig, QubitConfig,
                          to_internal_units, validate_configs)

logger = logging.getLogger(__name__)

DEFAULT_DETUNING_FRACTION = 0.25

DEFAULTS = {
    'units': 'internal',
    'L': 1.0,
    'c': 1.0,
    'v': 0.1,
    'kappa': 2,
    'lambda_p_T': 1e-2,
    'lambda_q_over_lambda_p': 1.0,
    'x0_over_L': 0.25,
    'delta_over_omega': DEFAULT_DETUNING_FRACTION,
    'A': 1.0 / math.sqrt(2.0),
    'B': 1.0 / math.sqrt(2.0),
    'alpha_abs': 1.0,
    'theta': math.pi / 2,
    'beta_abs': 1.0,
    'phi': None,
    'mode_cutoff': 200000,
    'mode_tol': 1e-9,
    'stall_terms': 20,
    'fixed_modes': False,
}

PHYSICAL_KEYS = [key for key in DEFAULTS if key != 'units']

_number = {'type': 'number'}
_grid = {
    'type': 'object',
    'properties': {
        'values': {'type': 'array', 'items': _number, 'minItems': 1},
        'start': _number,
        'stop': _number,
        'num': {'type': 'integer', 'minimum': 1},
    },
    'additionalProperties': False,
}

SCHEMA = {
    '$schema': 'http://json-schema.org/draft-07/schema#',
    'type': 'object',
    'properties': {
        'units': {'enum': ['internal', 'si']},
        'L': {'type': 'number', 'exclusiveMinimum': 0},
        'c': {'type': 'number', 'exclusiveMinimum': 0},
        'v': {'type': 'number', 'exclusiveMinimum': 0},
        'kappa': {'type': 'integer', 'minimum': 1},
        'lambda_p_T': {'type': 'number', 'minimum': 0},
        'lambda_q_over_lambda_p': {'type': 'number', 'minimum': 0},
        'x0_over_L': {'type': 'number', 'minimum': 0, 'maximum': 1},
        'delta_over_omega': {'type': 'number', 'exclusiveMaximum': 1},
        'A': {'type': 'number'},
        'B': {'type': 'number'},
        'alpha_abs': {'type': 'number', 'minimum': 0},
        'theta': _number,
        'beta_abs': {'type': 'number', 'minimum': 0},
        'phi': {'type': ['number', 'null']},
        'mode_cutoff': {'type': 'integer', 'minimum': 1},
        'mode_tol': {'type': 'number', 'exclusiveMinimum': 0},
        'stall_terms': {'type': 'integer', 'minimum': 1},
        'fixed_modes': {'type': 'boolean'},
        'sweep': {
            'type': 'object',
            'properties': {
                'experiment': {'type': 'string'},
                'parameter': {'enum': PHYSICAL_KEYS},
                'grid': _grid,
                'ratios': {'type': 'array', 'items': {'type': 'number', 'minimum': 0}, 'minItems': 1},
                'curves': {
                    'type': 'array',
                    'items': {'type': 'object', 'propertyNames': {'enum': PHYSICAL_KEYS + ['dalpha']}},
                },
            },
            'required': ['parameter', 'grid'],
            'additionalProperties': False,
        },
    },
    'additionalProperties': False,
}


@dataclass(frozen=True)
class RunModels:
    """Validated model objects for one parameter point, in internal units."""
    cavity: CavityConfig
    probe: ProbeConfig
    qubit: QubitConfig
    state: BellCatState


def load_document(path) -> Dict[str, Any]:
    """Read a YAML configuration document from disk."""
    path = Path(path)
    try:
        content = path.read_text()
    except OSError as e:
        raise ConfigurationError(f"Cannot read configuration {path}: {e}")
    return parse_document(content, source=str(path))


def parse_document(content: str, source: str = '<string>') -> Dict[str, Any]:
    try:
        document = yaml.safe_load(content) if content.strip() else {}
    except yaml.YAMLError as e:
        raise ConfigurationError(f"YAML syntax error in {source}: {e}")
    if not isinstance(document, dict):
        raise ConfigurationError(f"Configuration {source} must be a mapping")
    return document


def validate_document(document: Dict[str, Any]) -> Dict[str, Any]:
    """
    Validate a document against SCHEMA.

    Returns:
        dict: {'valid': bool, 'errors': [messages prefixed by key path]}
    """
    validator = Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path))
    messages = []
    for error in errors:
        path = '.'.join(str(p) for p in error.absolute_path) or '<root>'
        messages.append(f"{path}: {error.message}")
    return {'valid': not messages, 'errors': messages}


def resolve(document: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Defaults, then the document, then overrides; the sweep block is dropped."""
    resolved = dict(DEFAULTS)
    resolved.update({k: v for k, v in document.items() if k not in ('sweep', 'dalpha')})
    if overrides:
        resolved.update({k: v for k, v in overrides.items() if v is not None})
    return resolved


def build_models(document: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> RunModels:
    """
    Turn a document into validated configurations in internal units.

    Derived quantities: lambda_p = lambda_p_T / T, lambda_q = r lambda_p,
    x0 = x0_over_L * L and delta = delta_over_omega * omega_kappa.

    Raises:
        ConfigurationError: schema failure or violated physical invariant
    """
    report = validate_document(document)
    if not report['valid']:
        raise ConfigurationError('; '.join(report['errors']))
    params = resolve(document, overrides)

    cavity = CavityConfig(L=float(params['L']), c=float(params['c']), kappa=int(params['kappa']),
                          mode_cutoff=int(params['mode_cutoff']), mode_tol=float(params['mode_tol']),
                          stall_terms=int(params['stall_terms']), fixed_modes=bool(params['fixed_modes']))
    probe = ProbeConfig.resonant(cavity, float(params['v']), float(params['lambda_p_T']))
    qubit = QubitConfig.detuned(cavity,
                                x0=float(params['x0_over_L']) * cavity.L,
                                lambda_q=float(params['lambda_q_over_lambda_p']) * probe.lambda_p,
                                delta=float(params['delta_over_omega']) * cavity.omega_kappa)
    state = BellCatState.from_polar(params['A'], params['B'], params['alpha_abs'], params['theta'],
                                    params['beta_abs'], params['phi'])
    state.validate()

    if params['units'] == 'si':
        cavity, probe, qubit = to_internal_units(cavity, probe, qubit)
    else:
        validate_configs(cavity, probe, qubit)
    return RunModels(cavity=cavity, probe=probe, qubit=qubit, state=state)


def grid_values(grid: Dict[str, Any]) -> List[float]:
    """Expand a grid block ({'values': [...]} or {'start', 'stop', 'num'})."""
    if 'values' in grid:
        values = [float(v) for v in grid['values']]
    elif {'start', 'stop', 'num'} <= set(grid):
        num = int(grid['num'])
        if num == 1:
            values = [float(grid['start'])]
        else:
            step = (float(grid['stop']) - float(grid['start'])) / (num - 1)
            values = [float(grid['start']) + i * step for i in range(num)]
    else:
        raise ConfigurationError("Grid needs 'values' or 'start', 'stop' and 'num'")
    if not values:
        raise ConfigurationError("Sweep grid is empty")
    diffs = [b - a for a, b in zip(values, values[1:])]
    if diffs and not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
        raise ConfigurationError("Sweep grid must be strictly monotone")
    return values
