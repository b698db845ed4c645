"""
flocstab command-line interface

    flocstab check-zero   --config run.json
    flocstab steady       --config run.json --out results/
    flocstab check-steady --config run.json [--pstar steady.csv]
    flocstab simulate     --config run.json
    flocstab sweep        --config run.json --jobs 8

Exit codes: 0 result produced (including an inconclusive verdict),
2 numerical non-convergence or trivial-only steady state, 3 configuration error.
"""

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .config import config
from .criteria import assemble_zero_operator, c1_bound, k_trace, nontrivial_verdict, zero_verdict
from .linearization import assemble_matrix, build_coefficients, spectral_abscissa
from .logging_config import logger, set_log_level
from .model import (
    PRESET_PARAMS, Grid, RateSet, bind_example2_kernel, build_preset, custom_rates, validate_assumptions,
)
from .plotting import plot_sweep
from .reports import (
    read_pstar_csv, rounded, to_plain, write_diagnostics_csv, write_json, write_k_trace_csv, write_spectrum_csv,
    write_steady_csv, write_sweep_csv, write_trajectory_csv,
)
from .simulator import SimOptions, default_shape, perturbation_experiment, run
from .steady_state import DensityField, SolverOptions, SteadyStateResult, multi_start
from .sweep import run_sweep
from .validation import (
    ConfigError, FlocstabError, GridMismatchError, ValidationError,
    validate_count, validate_grid_size, validate_log_level, validate_values,
)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_CONFIG = 3

CONFIG_KEYS = {
    'schema_version', 'preset', 'params', 'rates', 'grid', 'solver', 'simulation', 'sweep',
    'output_dir', 'jobs', 'pstar', 'export',
}
SOLVER_KEYS = {'damping', 'tol', 'max_iter', 'f0_scale', 'f0_scales', 'ceiling'}
SIMULATION_KEYS = {'t_end', 'cfl', 'record_every', 'scheme', 'dt_max', 'blowup_ceiling',
                   'initial', 'amplitude', 'epsilon', 'perturb'}
INITIAL_CONDITIONS = ('bump', 'zero', 'pstar')


def _axis(entry, name: str) -> List[float]:
    """A sweep axis: a list of values or {"start", "stop", "num"}"""
    if isinstance(entry, dict):
        try:
            start, stop, num = entry['start'], entry['stop'], entry['num']
        except KeyError as e:
            raise ConfigError(f"sweep.{name} range needs start, stop and num (missing {e})") from e
        num = validate_count(num, f"sweep.{name}.num")
        values = np.linspace(float(start), float(stop), num).tolist()
    elif isinstance(entry, (int, float)) and not isinstance(entry, bool):
        values = [entry]
    else:
        values = entry
    return validate_values(values, f"sweep.{name}")


@dataclass
class RunConfig:
    """Experiment configuration document (schema_version 1)"""
    preset: str
    params: Dict[str, float] = field(default_factory=dict)
    rates: Optional[Dict[str, Any]] = None
    grid: int = 200
    solver: Dict[str, Any] = field(default_factory=dict)
    simulation: Dict[str, Any] = field(default_factory=dict)
    sweep: Dict[str, Any] = field(default_factory=dict)
    output_dir: str = 'results'
    jobs: int = 1
    pstar: Optional[str] = None
    export: List[str] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        try:
            self._validate()
        except ValidationError as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(str(e)) from e

    def _validate(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version} (expected {SCHEMA_VERSION})")
        if self.preset != 'custom' and self.preset not in PRESET_PARAMS:
            raise ConfigError(f"unknown preset {self.preset!r}")
        if self.preset == 'custom' and not isinstance(self.rates, dict):
            raise ConfigError("custom preset needs a 'rates' object")
        if not isinstance(self.params, dict):
            raise ConfigError("params must be an object of named values")
        self.grid = validate_grid_size(self.grid, 'grid', min_cells=16)
        self.jobs = validate_count(self.jobs, 'jobs', max_value=512)
        for name, section, keys in (('solver', self.solver, SOLVER_KEYS),
                                    ('simulation', self.simulation, SIMULATION_KEYS)):
            unknown = set(section) - keys
            if unknown:
                raise ConfigError(f"unknown {name} keys: {', '.join(sorted(unknown))}")
        initial = self.simulation.get('initial', 'bump')
        if initial not in INITIAL_CONDITIONS:
            raise ConfigError(f"simulation.initial must be one of {', '.join(INITIAL_CONDITIONS)}")
        if self.sweep:
            axes = {k: _axis(v, k) for k, v in self.sweep.items() if k != 'fixed'}
            self.sweep = {**axes, 'fixed': dict(self.sweep.get('fixed', {}))}

    @classmethod
    def from_dict(cls, data: Dict[str, Any], defaults: Optional[Dict[str, Any]] = None) -> 'RunConfig':
        if not isinstance(data, dict):
            raise ConfigError("config document must be a JSON object")
        unknown = set(data) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if 'preset' not in data:
            raise ConfigError("config is missing 'preset'")
        merged = dict(defaults or {})
        solver = {**merged.get('solver', {}), **data.get('solver', {})}
        merged.update(data)
        merged['solver'] = solver
        return cls(**merged)

    @classmethod
    def from_json(cls, json_str: str, defaults: Optional[Dict[str, Any]] = None) -> 'RunConfig':
        try:
            data = json.loads(json_str)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
        return cls.from_dict(data, defaults)

    @classmethod
    def from_file(cls, path, defaults: Optional[Dict[str, Any]] = None) -> 'RunConfig':
        try:
            text = Path(path).read_text(encoding='utf-8')
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        return cls.from_json(text, defaults)

    def to_json(self) -> str:
        return json.dumps({
            'schema_version': self.schema_version, 'preset': self.preset, 'params': self.params,
            'rates': self.rates, 'grid': self.grid, 'solver': self.solver,
            'simulation': self.simulation, 'sweep': self.sweep, 'output_dir': self.output_dir,
            'jobs': self.jobs, 'pstar': self.pstar, 'export': self.export,
        }, indent=2)

    # -- derived objects ------------------------------------------------------

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    def make_grid(self, rates: RateSet) -> Grid:
        return Grid.uniform(rates.domain.x1, self.grid)

    def make_rates(self) -> RateSet:
        if self.preset == 'custom':
            try:
                return custom_rates(**self.rates)
            except TypeError as e:
                raise ConfigError(f"invalid custom rates: {e}") from e
        return build_preset(self.preset, self.params)

    def solver_options(self, f0_scale: Optional[float] = None) -> SolverOptions:
        fields = {k: v for k, v in self.solver.items() if k != 'f0_scales'}
        if f0_scale is not None:
            fields['f0_scale'] = f0_scale
        return SolverOptions(**fields)

    def f0_scales(self) -> List[float]:
        scales = self.solver.get('f0_scales')
        if scales is None:
            return [self.solver.get('f0_scale', 0.05), 0.2]
        return validate_values(scales, 'solver.f0_scales')

    def sim_options(self) -> SimOptions:
        keys = ('t_end', 'cfl', 'record_every', 'scheme', 'dt_max', 'blowup_ceiling')
        return SimOptions(**{k: self.simulation[k] for k in keys if k in self.simulation})


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _emit(name: str, payload: Dict[str, Any], cfg: RunConfig) -> Path:
    path = write_json(payload, cfg.out / f"{name}.json")
    print(json.dumps(rounded(to_plain(payload)), indent=2))
    return path


def _audit(rates: RateSet, grid: Grid):
    report = validate_assumptions(rates, grid)
    if not report.all_passed:
        logger.warning(report.get_summary())
    return report


def _best(outcome) -> SteadyStateResult:
    """First non-trivial fixed point, else first converged run, else the first run"""
    if outcome.distinct:
        return outcome.distinct[0]
    converged = [r for r in outcome.results if r.converged]
    return converged[0] if converged else outcome.results[0]


def _solve(rates: RateSet, grid: Grid, cfg: RunConfig) -> SteadyStateResult:
    return _best(multi_start(rates, grid, cfg.f0_scales(), cfg.solver_options()))


def cmd_check_zero(cfg: RunConfig) -> int:
    """Zero-solution criteria with the spectral annotation"""
    rates = cfg.make_rates()
    grid = cfg.make_grid(rates)
    audit = _audit(rates, grid)
    report = zero_verdict(rates, grid)
    if 'spectrum' in cfg.export:
        write_spectrum_csv(spectral_abscissa(assemble_zero_operator(rates, grid)), cfg.out / 'zero_spectrum.csv')
    _emit('check_zero', {'report': report.to_dict(), 'assumptions': audit.to_dict()}, cfg)
    return EXIT_OK


def cmd_steady(cfg: RunConfig) -> int:
    """Multi-start fixed-point solve; exit 2 unless a non-trivial fixed point converged"""
    rates = cfg.make_rates()
    grid = cfg.make_grid(rates)
    _audit(rates, grid)
    outcome = multi_start(rates, grid, cfg.f0_scales(), cfg.solver_options())
    best = _best(outcome)
    write_steady_csv(best, cfg.out / 'steady.csv')
    _emit('steady', {
        'summary': best.summary().to_dict(),
        'starts': [{'f0_scale': r.f0_scale, **r.summary().to_dict()} for r in outcome.results],
        'distinct_fixed_points': len(outcome.distinct),
    }, cfg)
    if outcome.distinct:
        return EXIT_OK
    if outcome.any_converged:
        logger.error("Only the trivial (zero) fixed point was found")
    else:
        logger.error("Fixed-point iteration did not converge from any start")
    return EXIT_NOT_CONVERGED


def cmd_check_steady(cfg: RunConfig) -> int:
    """Stationary-solution criteria at a loaded or computed p*"""
    rates = cfg.make_rates()
    grid = cfg.make_grid(rates)
    _audit(rates, grid)
    if cfg.pstar:
        p_star = DensityField(grid, read_pstar_csv(cfg.pstar, grid))
        logger.info(f"Loaded p* from {cfg.pstar}")
    else:
        steady = _solve(rates, grid, cfg)
        if not steady.converged:
            logger.error("Fixed-point iteration did not converge; no stationary solution to check")
            return EXIT_NOT_CONVERGED
        p_star = steady.p_star
    if rates.name == 'example2' and rates.param_dict.get('d', 0.0) > 0.0:
        rates = bind_example2_kernel(rates, p_star)

    report = nontrivial_verdict(rates, p_star)
    payload: Dict[str, Any] = {'report': report.to_dict()}
    coeffs = build_coefficients(rates, p_star)
    if 'spectrum' in cfg.export:
        write_spectrum_csv(spectral_abscissa(assemble_matrix(coeffs, rates)), cfg.out / 'spectrum.csv')
    if 'k_trace' in cfg.export:
        lambdas = np.linspace(-2.0 * abs(report.negative_root or 1.0), 1.0, 61)
        write_k_trace_csv(k_trace(rates, coeffs, c1_bound(rates, p_star), lambdas), cfg.out / 'k_trace.csv')
    if cfg.simulation.get('perturb'):
        fit = perturbation_experiment(p_star, rates, cfg.simulation.get('epsilon'), opts=cfg.sim_options())
        payload['decay_fit'] = {k: v for k, v in fit.to_dict().items() if k not in ('times', 'norms')}
    _emit('check_steady', payload, cfg)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    """Time integration from the configured initial condition"""
    rates = cfg.make_rates()
    grid = cfg.make_grid(rates)
    _audit(rates, grid)
    initial = cfg.simulation.get('initial', 'bump')
    amplitude = float(cfg.simulation.get('amplitude', 1.0))
    if initial == 'zero':
        p0 = DensityField.zeros(grid)
    elif initial == 'bump':
        p0 = DensityField(grid, amplitude * default_shape(grid).values)
    else:
        steady = _solve(rates, grid, cfg)
        if not steady.converged:
            logger.error("Fixed-point iteration did not converge; cannot start from p*")
            return EXIT_NOT_CONVERGED
        epsilon = float(cfg.simulation.get('epsilon', 0.0))
        p0 = DensityField(grid, steady.p_star.values + epsilon * default_shape(grid).values)

    trajectory = run(p0, rates, cfg.sim_options())
    write_trajectory_csv(trajectory, cfg.out / 'trajectory.csv')
    write_diagnostics_csv(trajectory, cfg.out / 'diagnostics.csv')
    numbers = trajectory.number_series()
    _emit('simulate', {
        'initial': initial, 'steps': trajectory.steps, 'dt': trajectory.dt,
        't_final': trajectory.times[-1], 'blew_up': trajectory.blew_up,
        'N_initial': float(numbers[0]), 'N_final': float(numbers[-1]),
        'max_number_balance_residual': float(np.nanmax(
            [d.number_balance_residual for d in trajectory.diagnostics])),
    }, cfg)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    """Parameter sweep with CSV, SVG and JSON summary"""
    if not cfg.sweep:
        raise ConfigError("config has no 'sweep' section")
    axes = {k: v for k, v in cfg.sweep.items() if k != 'fixed'}
    fixed = {**{k: v for k, v in cfg.params.items() if k not in axes}, **cfg.sweep.get('fixed', {})}
    result = run_sweep(cfg.preset, axes, fixed, cfg.grid,
                       {k: v for k, v in cfg.solver.items() if k != 'f0_scales'}, cfg.jobs)
    write_sweep_csv(result, cfg.out / 'sweep.csv')
    plot_sweep(result, cfg.out / 'sweep.svg')
    _emit('sweep', {
        'preset': result.preset, 'points': len(result.records),
        'feasible_count': result.feasible_count, 'trivial_feasible_count': result.trivial_feasible_count,
        'cell_area': result.cell_area,
        'area': result.area, 'areas': result.areas,
        'not_converged': sum(1 for r in result.records if r.converged is False),
    }, cfg)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    'check-zero': cmd_check_zero,
    'steady': cmd_steady,
    'check-steady': cmd_check_steady,
    'simulate': cmd_simulate,
    'sweep': cmd_sweep,
}


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', required=True, help='JSON run configuration')
    common.add_argument('--out', help='Output directory (overrides the config)')
    common.add_argument('--grid', type=int, help='Grid cells (overrides the config)')
    common.add_argument('--jobs', type=int, help='Worker processes for sweeps')
    common.add_argument('--log-level', help='DEBUG, INFO, WARNING, ERROR or CRITICAL')

    parser = _Parser(prog='flocstab', description='Flocculation model stability toolkit')
    parser.add_argument('--version', action='version', version=f"flocstab {__version__}")
    sub = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)
    sub.add_parser('check-zero', parents=[common], help='Zero-solution criteria')
    sub.add_parser('steady', parents=[common], help='Solve for a non-trivial steady state')
    check = sub.add_parser('check-steady', parents=[common], help='Stationary-solution criteria')
    check.add_argument('--pstar', help='p* CSV written by the steady command')
    sub.add_parser('simulate', parents=[common], help='Time integration')
    sub.add_parser('sweep', parents=[common], help='Parameter sweep')
    return parser


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Environment defaults, then the config document, then command-line flags"""
    cfg = RunConfig.from_file(args.config, defaults=config.as_defaults())
    if args.out:
        cfg.output_dir = args.out
    if args.grid is not None:
        cfg.grid = args.grid
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if getattr(args, 'pstar', None):
        cfg.pstar = args.pstar
    try:
        cfg.grid = validate_grid_size(cfg.grid, 'grid', min_cells=16)
        cfg.jobs = validate_count(cfg.jobs, 'jobs', max_value=512)
    except ValidationError as e:
        raise ConfigError(str(e)) from e
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.log_level:
            set_log_level(validate_log_level(args.log_level, '--log-level'))
        cfg = load_run_config(args)
    except ValidationError as e:
        logger.error(f"Configuration error: {e}")
        print(f"flocstab: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return COMMANDS[args.command](cfg)
    except (ValidationError, GridMismatchError, OSError) as e:
        logger.error(f"Configuration error: {e}")
        print(f"flocstab: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FlocstabError as e:
        logger.error(f"Numerical failure: {e}")
        print(f"flocstab: numerical failure: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


def run_cli():
    sys.exit(main())


if __name__ == '__main__':
    run_cli()
