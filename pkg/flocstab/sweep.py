"""
Parameter sweeps over preset parameters

Each point is evaluated from plain data (preset name, parameters, grid
size, solver settings) so it can run in a worker process. Points run
through asyncio on a process pool; results are merged in sweep order.
"""

import asyncio
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from .criteria import STABLE, nontrivial_verdict, zero_verdict
from .logging_config import logger
from .model import Grid, PRESET_PARAMS, bind_example2_kernel, build_preset
from .reports import JsonReport
from .steady_state import SolverOptions, check_existence, solve_fixed_point
from .validation import FlocstabError, ValidationError, validate_count, validate_values

NOT_CONVERGED = 'not-converged'
FAILED = 'failed'

SWEEP_AXES = {
    'example1': ('b',),
    'example2': ('a', 'b', 'c'),
}


@dataclass(frozen=True)
class SweepPoint:
    """One sweep point as plain picklable data"""
    index: int
    preset: str
    params: Dict[str, float]
    n_cells: int
    solver: Dict[str, Any] = field(default_factory=dict)


@dataclass
class SweepRecord:
    index: int
    a: Optional[float]
    b: float
    c: Optional[float]
    c1_holds: Optional[bool] = None
    c2_holds: Optional[bool] = None
    converged: Optional[bool] = None
    trivial: Optional[bool] = None
    verdict: str = FAILED
    K_0: Optional[float] = None
    A12_0: Optional[float] = None
    A21_0: Optional[float] = None
    instability_integral: Optional[float] = None
    spectral_abscissa: Optional[float] = None
    feasible: bool = False
    error: Optional[str] = None


@dataclass
class SweepResult(JsonReport):
    preset: str
    records: List[SweepRecord]
    cell_area: float
    feasible_count: int
    area: float
    areas: Dict[str, float]
    # feasible points whose fixed point is the zero field
    trivial_feasible_count: int = 0

    def records_for(self, a: float) -> List[SweepRecord]:
        return [r for r in self.records if r.a is not None and np.isclose(r.a, a)]


def _spacing(values: Sequence[float]) -> float:
    values = sorted(set(values))
    if len(values) < 2:
        return 1.0
    return float(np.mean(np.diff(values)))


def evaluate_point(point: SweepPoint) -> SweepRecord:
    """
    Evaluate one sweep point

    example1: zero-solution verdict; feasible when stable.
    example2: existence conditions, fixed-point solve, stationary-solution
    verdict; feasible when both existence conditions hold and the verdict is
    stable. Errors are recorded on the point, never raised.
    """
    params = point.params
    record = SweepRecord(index=point.index, a=params.get('a'), b=params['b'], c=params.get('c'))
    try:
        rates = build_preset(point.preset, params)
        grid = Grid.uniform(rates.domain.x1, point.n_cells)
        if point.preset == 'example1':
            report = zero_verdict(rates, grid)
            record.verdict = report.verdict
            record.instability_integral = report.instability_integral
            record.spectral_abscissa = report.spectral_abscissa
            record.feasible = report.verdict == STABLE
            return record

        existence = check_existence(rates, grid)
        record.c1_holds = existence.c1_holds
        record.c2_holds = existence.c2_holds
        steady = solve_fixed_point(rates, grid, SolverOptions(**point.solver))
        record.converged = steady.converged
        record.trivial = steady.trivial
        if not steady.converged:
            record.verdict = NOT_CONVERGED
            return record
        if params.get('d', 0.0) > 0.0 and steady.nontrivial:
            rates = bind_example2_kernel(rates, steady.p_star)
        report = nontrivial_verdict(rates, steady.p_star)
        record.verdict = report.verdict
        record.K_0 = report.K_0
        record.A12_0 = report.A12_0
        record.A21_0 = report.A21_0
        record.instability_integral = report.instability_integral
        record.spectral_abscissa = report.spectral_abscissa
        record.feasible = existence.c1_holds and existence.c2_holds and report.verdict == STABLE
    except FlocstabError as e:
        logger.warning(f"Sweep point {point.index} ({params}) failed: {e}")
        record.verdict = FAILED
        record.error = str(e)
    return record


def build_points(preset: str, axes: Mapping[str, Sequence[float]], fixed: Optional[Mapping[str, float]] = None,
                 n_cells: int = 200, solver: Optional[Mapping[str, Any]] = None) -> List[SweepPoint]:
    """
    Cartesian product of the sweep axes (outermost axis first)

    Raises:
        ValidationError: Unknown preset, missing axis, or empty/non-finite axis
    """
    if preset not in SWEEP_AXES:
        raise ValidationError(f"sweeps support presets {', '.join(SWEEP_AXES)}, got {preset!r}")
    names = SWEEP_AXES[preset]
    missing = [n for n in names if n not in axes]
    if missing:
        raise ValidationError(f"sweep over {preset} needs axes {', '.join(missing)}")
    values = [validate_values(axes[n], f"sweep.{n}") for n in names]
    fixed = dict(fixed or {})
    unknown = set(fixed) - set(PRESET_PARAMS[preset])
    if unknown:
        raise ValidationError(f"unknown fixed parameters: {', '.join(sorted(unknown))}")
    n_cells = validate_count(n_cells, 'grid', min_value=16)
    return [
        SweepPoint(index=i, preset=preset, params={**fixed, **dict(zip(names, combo))},
                   n_cells=n_cells, solver=dict(solver or {}))
        for i, combo in enumerate(itertools.product(*values))
    ]


async def _evaluate_all(points: List[SweepPoint], jobs: int) -> List[SweepRecord]:
    loop = asyncio.get_running_loop()
    step = max(1, len(points) // 10)
    records: List[SweepRecord] = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [loop.run_in_executor(pool, evaluate_point, p) for p in points]
        for done, future in enumerate(asyncio.as_completed(futures), start=1):
            records.append(await future)
            if done % step == 0 or done == len(points):
                logger.info(f"Sweep progress: {done}/{len(points)} points")
    return records


def _summarize(preset: str, axes: Mapping[str, Sequence[float]], records: List[SweepRecord]) -> SweepResult:
    if preset == 'example1':
        cell_area = _spacing(axes['b'])
    else:
        cell_area = _spacing(axes['b']) * _spacing(axes['c'])
    areas: Dict[str, float] = {}
    if preset == 'example2':
        for a in axes['a']:
            count = sum(1 for r in records if r.feasible and np.isclose(r.a, a))
            areas[repr(float(a))] = count * cell_area
    feasible = sum(1 for r in records if r.feasible)
    trivial = sum(1 for r in records if r.feasible and r.trivial)
    if trivial:
        logger.info(f"{trivial} of {feasible} feasible points have only the zero fixed point")
    return SweepResult(preset=preset, records=records, cell_area=cell_area,
                       feasible_count=feasible, area=feasible * cell_area, areas=areas,
                       trivial_feasible_count=trivial)


def run_sweep(preset: str, axes: Mapping[str, Sequence[float]], fixed: Optional[Mapping[str, float]] = None,
              n_cells: int = 200, solver: Optional[Mapping[str, Any]] = None, jobs: int = 1) -> SweepResult:
    """
    Evaluate every point of the sweep

    Args:
        preset: 'example1' (axis b) or 'example2' (axes a, b, c)
        axes: Values per swept parameter
        fixed: Parameters held fixed (e.g. d for example2)
        n_cells: Grid cells per point
        solver: SolverOptions fields for the fixed-point solve
        jobs: Worker processes; 1 evaluates inline

    Returns:
        SweepResult with one record per point, sorted by sweep index
    """
    jobs = validate_count(jobs, 'jobs', max_value=512)
    points = build_points(preset, axes, fixed, n_cells, solver)
    logger.info(f"Sweeping {preset} over {len(points)} points with {jobs} job(s)")
    if jobs == 1:
        records = [evaluate_point(p) for p in points]
    else:
        records = asyncio.run(_evaluate_all(points, jobs))
    records.sort(key=lambda r: r.index)
    result = _summarize(preset, axes, records)
    logger.info(f"Sweep done: {result.feasible_count}/{len(records)} feasible, area {result.area:.6g}")
    return result
