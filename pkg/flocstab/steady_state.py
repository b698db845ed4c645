"""
Steady states through the fixed-point operator Phi

With f = g*p the stationary equation integrates once in x to
f = Phi[f], where Phi[f](x) is the renewal inflow int q/g f plus the
running integral of every reaction term. Fixed points are found by damped
Picard iteration.
"""

import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import integrate as sp_integrate

from .config import config
from .logging_config import logger
from .model import Grid, RateSet, tabulate
from .quadrature import Samples
from .reports import JsonReport
from .validation import validate_count, validate_damping, validate_positive

# persistent clamping above this mass marks a solution suspect
CLAMP_LIMIT = 1e-8


class DensityField(Samples):
    """Number density p, or the auxiliary f = g*p, on a grid"""

    @classmethod
    def zeros(cls, grid: Grid) -> 'DensityField':
        return cls(grid, np.zeros(grid.size))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> 'DensityField':
        return cls(grid, np.full(grid.size, float(value)))

    def uniform_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l1_norm(self) -> float:
        return float(sp_integrate.trapezoid(np.abs(self.values), dx=self.grid.h))


@dataclass
class ExistenceCheck(JsonReport):
    """First and second existence conditions evaluated on the grid"""
    c1_holds: bool
    c1_margin: float
    c2_holds: bool
    c2_sup: float


@dataclass
class SolverOptions:
    """Damped Picard iteration settings; tol and max_iter default to the environment config"""
    damping: float = 0.5
    tol: Optional[float] = None
    max_iter: Optional[int] = None
    f0_scale: float = 0.05
    ceiling: float = 1e12

    def __post_init__(self):
        self.damping = validate_damping(self.damping, 'damping')
        self.tol = validate_positive(config.tol if self.tol is None else self.tol, 'tol')
        self.max_iter = validate_count(config.max_iter if self.max_iter is None else self.max_iter, 'max_iter')
        self.f0_scale = validate_positive(self.f0_scale, 'f0_scale')
        self.ceiling = validate_positive(self.ceiling, 'ceiling')


@dataclass
class SteadyStateSummary(JsonReport):
    """Scalar part of a SteadyStateResult"""
    phi_residual: float
    F_residual: float
    iterations: int
    converged: bool
    trivial: bool
    suspect: bool
    diverged: bool
    clamped_mass: float
    uniform_norm: float
    existence: ExistenceCheck

    @classmethod
    def from_json(cls, json_str: str) -> 'SteadyStateSummary':
        data = json.loads(json_str)
        data['existence'] = ExistenceCheck(**data['existence'])
        return cls(**data)


@dataclass(eq=False)
class SteadyStateResult(JsonReport):
    f_star: DensityField
    p_star: DensityField
    phi_residual: float
    F_residual: float
    iterations: int
    converged: bool
    existence: ExistenceCheck
    trivial: bool = False
    suspect: bool = False
    diverged: bool = False
    clamped_mass: float = 0.0
    f0_scale: float = field(default=0.0, metadata={'serialize': False})

    @property
    def nontrivial(self) -> bool:
        return self.converged and not self.trivial

    def summary(self) -> SteadyStateSummary:
        return SteadyStateSummary(
            phi_residual=self.phi_residual, F_residual=self.F_residual,
            iterations=self.iterations, converged=self.converged, trivial=self.trivial,
            suspect=self.suspect, diverged=self.diverged, clamped_mass=self.clamped_mass,
            uniform_norm=self.f_star.uniform_norm(), existence=self.existence,
        )


@dataclass(eq=False)
class MultiStartResult:
    results: List[SteadyStateResult]
    distinct: List[SteadyStateResult]

    @property
    def any_converged(self) -> bool:
        return any(r.converged for r in self.results)


def phi_apply(f: DensityField, rates: RateSet) -> DensityField:
    """
    Evaluate Phi[f] at every node

    The renewal term int_0^{x1} q/g f plus the running trapezoid integral
    of -(kf/2 + mu) p + fragmentation gain + aggregation gain - aggregation
    loss, with p = f/g.
    """
    table = tabulate(rates, f.grid)
    p = f.values / table.g
    integrand = table.reaction(p)
    running = sp_integrate.cumulative_trapezoid(integrand, dx=f.grid.h, initial=0.0)
    return f.like(table.renewal(p) + running)


def check_existence(rates: RateSet, grid: Grid) -> ExistenceCheck:
    """
    Evaluate both existence conditions on the grid

    c1_margin = min (q + kf/2 - mu); c2_sup is the maximum over nodes of
    int_x^{x1} (kf(y) int_0^x Gamma(z; y) dz + q(y)) / g(y) dy
    + int_0^x (q + kf/2 - mu) / g dy.
    """
    table = tabulate(rates, grid)
    balance = table.q + 0.5 * table.kf - table.mu
    # cumulative daughter mass below x_i from parent y_j
    below = table.head @ table.gamma
    upper = np.sum(table.tail * (table.kf[None, :] * below + table.q[None, :]) / table.g[None, :], axis=1)
    lower = sp_integrate.cumulative_trapezoid(balance / table.g, dx=grid.h, initial=0.0)
    c1_margin = float(np.min(balance))
    c2_sup = float(np.max(upper + lower))
    check = ExistenceCheck(c1_holds=c1_margin > 0.0, c1_margin=c1_margin,
                           c2_holds=c2_sup <= 1.0, c2_sup=c2_sup)
    logger.debug(f"Existence for '{rates.name}': c1_margin={c1_margin:.6g}, c2_sup={c2_sup:.6g}")
    return check


def _initial_guess(rates: RateSet, grid: Grid, f0_scale: float) -> DensityField:
    table = tabulate(rates, grid)
    scale = float(np.max(table.q / table.g))
    if scale <= 0.0:
        scale = 1.0
    return DensityField.constant(grid, f0_scale * scale)


def solve_fixed_point(rates: RateSet, grid: Grid, opts: Optional[SolverOptions] = None) -> SteadyStateResult:
    """
    Damped Picard iteration f <- (1 - w) f + w Phi[f]

    Starts from the constant f0_scale * max(q/g) (or f0_scale when q = 0),
    clamps negative node values each sweep and stops once
    |f - Phi[f]|_u < tol. Divergence and non-convergence are reported in
    the result, never raised.

    Args:
        rates: Model rates
        grid: Discretization grid
        opts: Solver options (defaults from the environment config)

    Returns:
        SteadyStateResult with f*, p* = f*/g and residuals
    """
    # imported here: the simulator builds on DensityField
    from .simulator import rhs

    opts = opts or SolverOptions()
    existence = check_existence(rates, grid)
    table = tabulate(rates, grid)
    w = opts.damping

    f = _initial_guess(rates, grid, opts.f0_scale)
    converged = diverged = False
    clamped = 0.0
    phi_residual = float('inf')
    iterations = 0
    for iterations in range(1, opts.max_iter + 1):
        phi = phi_apply(f, rates)
        phi_residual = float(np.max(np.abs(phi.values - f.values)))
        if phi_residual < opts.tol:
            converged = True
            break
        update = (1.0 - w) * f.values + w * phi.values
        negative = np.minimum(update, 0.0)
        clamped = float(sp_integrate.trapezoid(-negative, dx=grid.h))
        f = f.like(update - negative)
        if not np.all(np.isfinite(f.values)) or f.uniform_norm() > opts.ceiling:
            diverged = True
            logger.warning(f"Fixed-point iteration diverged after {iterations} sweeps "
                           f"(|f|_u > {opts.ceiling:g})")
            break
        if iterations % 500 == 0:
            logger.debug(f"sweep {iterations}: |f - Phi[f]|_u = {phi_residual:.3e}, clamped {clamped:.3e}")

    f_star = DensityField(grid, f.values)
    p_star = DensityField(grid, f.values / table.g)
    F_residual = rhs(p_star, rates).l1_norm() if not diverged else float('inf')
    trivial = converged and f_star.uniform_norm() < 10.0 * opts.tol
    suspect = converged and clamped > CLAMP_LIMIT
    if suspect:
        logger.warning(f"Converged with persistent clamping of {clamped:.3e}")

    result = SteadyStateResult(
        f_star=f_star, p_star=p_star, phi_residual=phi_residual, F_residual=F_residual,
        iterations=iterations, converged=converged, existence=existence, trivial=trivial,
        suspect=suspect, diverged=diverged, clamped_mass=clamped,
        f0_scale=opts.f0_scale,
    )
    if trivial:
        logger.info(f"Fixed-point iteration for '{rates.name}' converged to the zero field "
                    f"after {iterations} sweeps")
    elif converged:
        logger.info(f"Fixed-point iteration for '{rates.name}' converged after {iterations} sweeps "
                    f"(|f*|_u = {f_star.uniform_norm():.6g}, F_residual = {F_residual:.3e})")
    elif not diverged:
        logger.warning(f"Fixed-point iteration for '{rates.name}' did not converge in {opts.max_iter} "
                       f"sweeps (|f - Phi[f]|_u = {phi_residual:.3e})")
    return result


def multi_start(rates: RateSet, grid: Grid, scales: Sequence[float],
                opts: Optional[SolverOptions] = None) -> MultiStartResult:
    """
    Solve from several f0_scale values and collect the distinct non-trivial fixed points

    Two fixed points are distinct when their uniform distance exceeds 100*tol.
    """
    base = opts or SolverOptions()
    results: List[SteadyStateResult] = []
    distinct: List[SteadyStateResult] = []
    for scale in scales:
        run_opts = SolverOptions(damping=base.damping, tol=base.tol, max_iter=base.max_iter,
                                 f0_scale=scale, ceiling=base.ceiling)
        result = solve_fixed_point(rates, grid, run_opts)
        results.append(result)
        if not result.nontrivial:
            continue
        if all(np.max(np.abs(result.f_star.values - other.f_star.values)) > 100.0 * base.tol
               for other in distinct):
            distinct.append(result)
    logger.info(f"Multi-start from {len(results)} guesses: {len(distinct)} distinct non-trivial fixed point(s)")
    return MultiStartResult(results=results, distinct=distinct)
