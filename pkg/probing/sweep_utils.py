"""
Parameter sweeps over the probing pipeline.

A sweep is a grid over one parameter, repeated for every coupling ratio and
every curve (a set of held-parameter overrides). Points are enumerated ratio
first, then curve, then grid value; rows come back in that order whatever the
execution backend.
"""
import csv
import io
import json
import logging
import math
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from django.template.loader import render_to_string

from . import __version__
from .config_utils import build_models, grid_values, resolve, validate_document
from .exceptions import ConfigurationError, OutputWriteError, ProbingError
from .log_utils import RunLogger
from .model_utils import SPEED_OF_LIGHT
from .observable_utils import eta1_suppression, interferometric_phase, phase_resolution
from .qubit_state_utils import bloch_observables, reduced_qubit_state, von_neumann_entropy

logger = logging.getLogger(__name__)

INPUT_COLUMNS = [
    'units', 'L', 'c', 'v', 'kappa', 'lambda_p_T', 'lambda_q_over_lambda_p', 'x0_over_L',
    'delta_over_omega', 'A', 'B', 'alpha_abs', 'theta', 'beta_abs', 'phi', 'dalpha',
    'mode_cutoff', 'mode_tol', 'stall_terms', 'fixed_modes',
]
OUTPUT_COLUMNS = [
    'delta_gamma', 'visibility', 'p_excite', 'entropy', 'A_I', 'A_z', 'A_x', 'A_y',
    'eta_re', 'eta_im', 'eta_ref_re', 'eta_ref_im', 'eta1_im', 'eta2_re', 'eta2_im',
    'resolution', 'suppression', 'last_index', 'trace_residual', 'hermiticity_residual',
    'flags', 'error',
]
COLUMNS = ['index', 'experiment', 'status'] + INPUT_COLUMNS + OUTPUT_COLUMNS

SI_CAPTION_BASE = {
    'units': 'si',
    'L': 0.019,
    'c': SPEED_OF_LIGHT,
    'v': 1e3,
    'x0_over_L': 0.25,
    'theta': math.pi / 2,
    'phi': -math.pi / 2,
}

MAXIMAL = 1.0 / math.sqrt(2.0)
# held probe coupling of the phase-vs-alpha preset; the second-order phase
# saturates inside the alpha range at this strength
FIG2_LAMBDA_P_T = 150.0


@dataclass
class SweepSpec:
    """One experiment: a grid over `parameter`, per coupling ratio and per curve."""
    experiment: str
    parameter: str
    grid: List[float]
    ratios: List[float] = field(default_factory=lambda: [1.0])
    curves: List[Dict[str, Any]] = field(default_factory=lambda: [{}])
    base: Dict[str, Any] = field(default_factory=dict)
    # figure layout for the generated plot script
    panel: str = 'lambda_q_over_lambda_p'
    curve_label: Optional[str] = None
    x: Optional[str] = None
    y: List[str] = field(default_factory=lambda: ['delta_gamma'])
    figure: Optional[str] = None

    def validate(self) -> None:
        if not self.grid:
            raise ConfigurationError(f"Sweep {self.experiment} has an empty grid")
        diffs = np.diff(self.grid)
        if diffs.size and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ConfigurationError(f"Sweep {self.experiment} grid is not monotone")
        if not self.ratios:
            raise ConfigurationError(f"Sweep {self.experiment} has no coupling ratios")

    def points(self) -> List[Dict[str, Any]]:
        """Resolved point documents in grid order."""
        points = []
        for ratio in self.ratios:
            for curve in self.curves or [{}]:
                for value in self.grid:
                    point = dict(self.base)
                    point.update(curve)
                    point['lambda_q_over_lambda_p'] = ratio
                    point[self.parameter] = value
                    if self.parameter == 'A' and 'B' not in curve:
                        point['B'] = math.sqrt(max(0.0, 1.0 - value ** 2))
                    points.append(point)
        return points

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SweepSpec':
        return cls(**data)


def _linspace(start: float, stop: float, num: int) -> List[float]:
    return grid_values({'start': start, 'stop': stop, 'num': num})


def _preset_fig2() -> SweepSpec:
    return SweepSpec(
        experiment='fig2-phase-vs-alpha', parameter='alpha_abs',
        grid=_linspace(0.0, 40.0, 81) + _linspace(45.0, 400.0, 72),
        ratios=[5.0, 1.0, 1e-2], curves=[{'beta_abs': b} for b in (1.0, 10.0, 15.0, 300.0)],
        base=dict(SI_CAPTION_BASE, A=MAXIMAL, B=MAXIMAL, lambda_p_T=FIG2_LAMBDA_P_T),
        curve_label='beta_abs', x='alpha_abs')


def _preset_fig3() -> SweepSpec:
    pairs = [(0.5, math.sqrt(3.0) / 2), (MAXIMAL, MAXIMAL), (1.0, 0.0), (0.0, 1.0)]
    curves = [{'alpha_abs': amp, 'beta_abs': amp, 'A': a, 'B': b}
              for amp in (10.0, 1.0, 0.3) for a, b in pairs]
    return SweepSpec(
        experiment='fig3-phase-vs-position', parameter='x0_over_L', grid=_linspace(0.0, 1.0, 101),
        ratios=[3.0], curves=curves, base=dict(SI_CAPTION_BASE),
        panel='alpha_abs', curve_label='A', x='x0_over_L')


def _preset_fig4() -> SweepSpec:
    return SweepSpec(
        experiment='fig4-bloch-vs-phase', parameter='A', grid=_linspace(0.0, 1.0, 51),
        ratios=[1.0], curves=[{'alpha_abs': amp, 'beta_abs': amp} for amp in (10.0, 1.0, 0.1)],
        base=dict(SI_CAPTION_BASE),
        panel='alpha_abs', x='delta_gamma', y=['A_z', 'A_x', 'A_y'])


def _preset_fig5to7() -> SweepSpec:
    curves = [{'alpha_abs': a, 'beta_abs': b} for a in (30.0, 10.0, 1.0) for b in (1.0, 10.0, 15.0, 30.0)]
    return SweepSpec(
        experiment='fig5to7-entropy-vs-phase', parameter='A', grid=_linspace(0.0, 1.0, 51),
        ratios=[1e-2, 5.0, 1.0], curves=curves, base=dict(SI_CAPTION_BASE),
        panel='alpha_abs', curve_label='beta_abs', x='delta_gamma', y=['entropy'],
        figure='lambda_q_over_lambda_p')


def _preset_resolution() -> SweepSpec:
    return SweepSpec(
        experiment='fig-resolution', parameter='alpha_abs', grid=_linspace(0.0, 40.0, 81),
        ratios=[5.0, 1.0, 1e-2], curves=[{'dalpha': d} for d in (1.0, 2.0, 3.0, 4.0)],
        base=dict(SI_CAPTION_BASE, A=MAXIMAL, B=MAXIMAL, beta_abs=20.0),
        curve_label='dalpha', x='alpha_abs', y=['resolution'])


def _preset_visibility() -> SweepSpec:
    return SweepSpec(
        experiment='fig-visibility', parameter='alpha_abs', grid=_linspace(0.0, 100.0, 101),
        ratios=[5.0, 1.0, 1e-2], curves=[{'beta_abs': b} for b in (1.0, 10.0, 15.0, 300.0)],
        base=dict(SI_CAPTION_BASE, A=MAXIMAL, B=MAXIMAL),
        curve_label='beta_abs', x='alpha_abs', y=['visibility'])


PRESETS = {
    'fig2-phase-vs-alpha': _preset_fig2,
    'fig3-phase-vs-position': _preset_fig3,
    'fig4-bloch-vs-phase': _preset_fig4,
    'fig5to7-entropy-vs-phase': _preset_fig5to7,
    'fig-resolution': _preset_resolution,
    'fig-visibility': _preset_visibility,
}
PRESET_ALIASES = {
    'fig2': 'fig2-phase-vs-alpha',
    'fig3': 'fig3-phase-vs-position',
    'fig4': 'fig4-bloch-vs-phase',
    'fig5to7': 'fig5to7-entropy-vs-phase',
}


def preset(name: str, overrides: Optional[Dict[str, Any]] = None) -> SweepSpec:
    """Build a figure preset; overrides replace held parameters and are kept in the spec."""
    key = PRESET_ALIASES.get(name, name)
    if key not in PRESETS:
        raise ConfigurationError(f"Unknown preset '{name}'. Available: {', '.join(sorted(PRESETS))}")
    spec = PRESETS[key]()
    if overrides:
        spec.base.update(overrides)
    return spec


def spec_from_document(document: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> SweepSpec:
    """Custom sweep from a configuration document carrying a `sweep` block."""
    report = validate_document(document)
    if not report['valid']:
        raise ConfigurationError('; '.join(report['errors']))
    if 'sweep' not in document:
        raise ConfigurationError("Custom configuration needs a 'sweep' block")
    block = document['sweep']
    base = {k: v for k, v in document.items() if k != 'sweep'}
    if overrides:
        base.update(overrides)
    return SweepSpec(
        experiment=block.get('experiment', 'custom'),
        parameter=block['parameter'],
        grid=grid_values(block['grid']),
        ratios=[float(r) for r in block.get('ratios', [base.get('lambda_q_over_lambda_p', 1.0)])],
        curves=[dict(c) for c in block.get('curves', [{}])],
        base=base,
        x=block['parameter'],
    )


def _input_row(point: Dict[str, Any]) -> Dict[str, Any]:
    resolved = resolve(point)
    row = {key: resolved.get(key) for key in INPUT_COLUMNS}
    row['dalpha'] = point.get('dalpha')
    return row


def evaluate_point(point: Dict[str, Any]) -> Dict[str, Any]:
    """
    Evaluate the phase and qubit-state pipelines at one point.

    Never raises: failures come back as {'success': False, 'error': ...}.
    """
    row = _input_row(point)
    try:
        document = {k: v for k, v in point.items() if k != 'dalpha'}
        models = build_models(document)
        cavity, probe, qubit, state = models.cavity, models.probe, models.qubit, models.state

        phase = interferometric_phase(state, probe, qubit, cavity)
        rho = reduced_qubit_state(state, probe, qubit, cavity)
        a_i, a_z, a_x, a_y = bloch_observables(rho)
        resolution = None
        if point.get('dalpha') is not None:
            resolution = phase_resolution(state, probe, qubit, cavity, float(point['dalpha']))

        row.update({
            'success': True,
            'status': 'ok',
            'delta_gamma': phase.delta_gamma,
            'visibility': phase.visibility,
            'p_excite': phase.p_excite,
            'entropy': von_neumann_entropy(rho),
            'A_I': a_i, 'A_z': a_z, 'A_x': a_x, 'A_y': a_y,
            'eta_re': phase.eta.real, 'eta_im': phase.eta.imag,
            'eta_ref_re': phase.eta_ref.real, 'eta_ref_im': phase.eta_ref.imag,
            'eta1_im': phase.eta1.imag,
            'eta2_re': phase.eta2.real, 'eta2_im': phase.eta2.imag,
            'resolution': resolution,
            'suppression': eta1_suppression(state, qubit, cavity, probe.T)['mechanism'],
            'last_index': phase.last_index,
            'trace_residual': rho.trace_residual,
            'hermiticity_residual': rho.hermiticity_residual,
            'flags': ';'.join(phase.flags),
            'protocol_valid': phase.protocol_valid,
            'error': None,
        })
    except ProbingError as e:
        row.update({'success': False, 'status': 'failed', 'error': str(e)})
    except Exception as e:
        logger.exception(f"Unexpected failure evaluating point: {e}")
        row.update({'success': False, 'status': 'failed', 'error': f"{type(e).__name__}: {e}"})
    return row


def run_sweep(spec: SweepSpec, workers: int = 1, use_celery: bool = False,
              run_id: Optional[str] = None) -> List[Dict[str, Any]]:
    """
    Evaluate every point of a sweep.

    Args:
        spec: sweep specification
        workers: thread count for in-process execution
        use_celery: dispatch points as a Celery group instead of threads
        run_id: identifier attached to the run's log events

    Returns:
        list: one row dict per point, in grid order
    """
    spec.validate()
    points = spec.points()
    run_id = run_id or uuid.uuid4().hex[:12]
    RunLogger.run_started(run_id, spec.experiment, len(points), workers, use_celery)

    if use_celery:
        from celery import group
        from .tasks import evaluate_point_task

        result = group(evaluate_point_task.s(point) for point in points).apply_async()
        rows = result.get(disable_sync_subtasks=False)
    elif workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(evaluate_point, points))
    else:
        rows = [evaluate_point(point) for point in points]

    for index, row in enumerate(rows):
        row['index'] = index
        row['experiment'] = spec.experiment
        if not row.get('success'):
            RunLogger.row_failed(run_id, index, row.get('error'))
    return rows


def _format(value) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: List[Dict[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_format(row.get(column)) for column in COLUMNS])
    return buffer.getvalue()


def _curve_key(row: Dict[str, Any], spec_keys: Tuple[str, ...]) -> Tuple:
    return tuple(row.get(key) for key in spec_keys)


def _group(rows, keys):
    groups: Dict[Tuple, List[Dict[str, Any]]] = {}
    for row in rows:
        groups.setdefault(_curve_key(row, keys), []).append(row)
    return groups


def shape_report(rows: List[Dict[str, Any]], experiment: str) -> Dict[str, Any]:
    """
    Figure-shape diagnostics of a finished sweep.

    The report is informational; it is stored in the manifest and never
    changes the exit status.
    """
    ok = [row for row in rows if row.get('success')]
    report: Dict[str, Any] = {'experiment': experiment, 'rows': len(rows), 'ok_rows': len(ok)}
    if not ok:
        return report

    if experiment == 'fig2-phase-vs-alpha':
        curves = []
        for key, group in _group(ok, ('lambda_q_over_lambda_p', 'beta_abs')).items():
            phases = np.array([r['delta_gamma'] for r in group])
            curves.append({
                'ratio': key[0], 'beta_abs': key[1],
                'monotone': bool(np.all(np.diff(phases) >= -1e-12)),
                'terminal_delta_gamma': float(phases[-1]),
                'distance_to_half_pi': float(abs(phases[-1] - math.pi / 2)),
            })
        report['curves'] = curves
    elif experiment == 'fig3-phase-vs-position':
        panels = []
        for amp, group in _group(ok, ('alpha_abs',)).items():
            by_pair = _group(group, ('A', 'B'))
            ground = np.array([r['delta_gamma'] for r in by_pair.get((1.0, 0.0), [])])
            excited = np.array([r['delta_gamma'] for r in by_pair.get((0.0, 1.0), [])])
            entangled = np.array([r['delta_gamma'] for r in by_pair.get((MAXIMAL, MAXIMAL), [])])
            panel = {'amplitude': amp[0]}
            if ground.size > 1 and ground.size == excited.size and np.ptp(ground) > 0 and np.ptp(excited) > 0:
                panel['product_correlation'] = float(np.corrcoef(ground, excited)[0, 1])
            if entangled.size and ground.size and np.ptp(ground) > 0:
                panel['entangled_amplitude_ratio'] = float(np.ptp(entangled) / np.ptp(ground))
            panels.append(panel)
        report['panels'] = panels
    elif experiment == 'fig-visibility':
        report['min_visibility_below_100'] = {
            key[0]: float(min(r['visibility'] for r in group if r['alpha_abs'] < 100))
            for key, group in _group(ok, ('lambda_q_over_lambda_p',)).items()
            if any(r['alpha_abs'] < 100 for r in group)
        }
    elif experiment == 'fig5to7-entropy-vs-phase':
        entropies = [r['entropy'] for r in ok]
        report['entropy_min'] = float(min(entropies))
        report['entropy_max'] = float(max(entropies))
        report['max_entropy_by_alpha'] = {
            key[0]: float(max(r['entropy'] for r in group))
            for key, group in _group(ok, ('alpha_abs',)).items()
        }
    elif experiment == 'fig4-bloch-vs-phase':
        trends = []
        for key, group in _group(ok, ('alpha_abs',)).items():
            phases = np.array([r['delta_gamma'] for r in group])
            inversion = np.array([r['A_z'] for r in group])
            trend = {'amplitude': key[0]}
            if np.ptp(phases) > 0 and np.ptp(inversion) > 0:
                trend['phase_inversion_correlation'] = float(np.corrcoef(phases, inversion)[0, 1])
            trends.append(trend)
        report['trends'] = trends
    elif experiment == 'fig-resolution':
        best = []
        for key, group in _group(ok, ('lambda_q_over_lambda_p', 'dalpha')).items():
            top = max(group, key=lambda r: r['resolution'] or 0.0)
            best.append({'ratio': key[0], 'dalpha': key[1],
                         'max_resolution': top['resolution'], 'at_alpha_abs': top['alpha_abs']})
        report['best_resolution'] = best
    return report


def _write(path: Path, content: str) -> None:
    try:
        path.write_text(content)
    except OSError as e:
        raise OutputWriteError(f"Failed to write {path.name}: {e}", path=str(path))


def write_outputs(rows: List[Dict[str, Any]], spec: SweepSpec, output_dir,
                  wall_time: float = 0.0, run_id: Optional[str] = None) -> Dict[str, str]:
    """
    Write the CSV, the JSON run manifest and the plot script of a sweep.

    Returns:
        dict: artifact name -> path
    """
    output_dir = Path(output_dir)
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputWriteError(f"Cannot create output directory: {e}", path=str(output_dir))

    csv_path = output_dir / f"{spec.experiment}.csv"
    manifest_path = output_dir / f"{spec.experiment}.manifest.json"
    plot_path = output_dir / f"plot_{spec.experiment.replace('-', '_')}.py"

    _write(csv_path, rows_to_csv(rows))

    failed = [row['index'] for row in rows if not row.get('success')]
    first = resolve(spec.points()[0]) if spec.grid else {}
    manifest = {
        'run_id': run_id,
        'code_version': __version__,
        'experiment': spec.experiment,
        'spec': spec.to_dict(),
        'truncation': {key: first.get(key) for key in ('mode_cutoff', 'mode_tol', 'stall_terms', 'fixed_modes')},
        'columns': COLUMNS,
        'rows': len(rows),
        'failed_rows': failed,
        'protocol_violations': [row['index'] for row in rows
                                if row.get('success') and not row.get('protocol_valid')],
        'wall_time_seconds': wall_time,
        'shape_report': shape_report(rows, spec.experiment),
    }
    _write(manifest_path, json.dumps(manifest, indent=2, sort_keys=True, default=str))

    # context values are Python literals spliced into the script
    script = render_to_string('probing/plot_script.py.j2', {
        'csv_name': repr(csv_path.name),
        'experiment': spec.experiment,
        'x': repr(spec.x or spec.parameter),
        'y': repr(list(spec.y)),
        'panel': repr(spec.panel),
        'curve_label': repr(spec.curve_label),
        'figure': repr(spec.figure),
    })
    _write(plot_path, script)
    logger.info(f"Wrote {len(rows)} rows for {spec.experiment} to {output_dir}")
    return {'csv': str(csv_path), 'manifest': str(manifest_path), 'plot': str(plot_path)}


def spec_from_manifest(path) -> SweepSpec:
    """Rebuild the exact sweep recorded in a manifest."""
    try:
        manifest = json.loads(Path(path).read_text())
    except (OSError, ValueError) as e:
        raise ConfigurationError(f"Cannot read manifest {path}: {e}")
    return SweepSpec.from_dict(manifest['spec'])


def timed_sweep(spec: SweepSpec, output_dir, workers: int = 1,
                use_celery: bool = False) -> Tuple[List[Dict[str, Any]], Dict[str, str]]:
    """Run a sweep and write its artifacts."""
    run_id = uuid.uuid4().hex[:12]
    started = time.monotonic()
    rows = run_sweep(spec, workers=workers, use_celery=use_celery, run_id=run_id)
    wall_time = time.monotonic() - started
    paths = write_outputs(rows, spec, output_dir, wall_time=wall_time, run_id=run_id)
    RunLogger.run_finished(run_id, spec.experiment, len(rows),
                           sum(1 for row in rows if not row.get('success')), wall_time)
    return rows, paths
