"""
Method-of-lines time integration of the full nonlinear model

Upwind transport with the renewal inflow at node 0, trapezoid integrals
for every reaction term, and classical 4-stage Runge-Kutta stepping.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import integrate as sp_integrate

from .logging_config import logger
from .model import Grid, RateSet, RateTable, mass_budget, tabulate
from .reports import JsonReport
from .steady_state import DensityField
from .validation import (
    ValidationError, validate_count, validate_fraction, validate_nonnegative, validate_positive,
)

SCHEMES = ('upwind1',)

# fit window skips this leading share of the records
TRANSIENT_FRACTION = 0.2

# default ceiling on dt
DEFAULT_DT_MAX = 0.01


@dataclass
class SimOptions:
    """Time-stepping settings; dt = min(cfl*h/max g, cfl/max reaction rate, dt_max)"""
    t_end: float = 10.0
    cfl: float = 0.4
    record_every: int = 10
    scheme: str = 'upwind1'
    dt_max: Optional[float] = DEFAULT_DT_MAX
    blowup_ceiling: float = 1e8

    def __post_init__(self):
        self.t_end = validate_positive(self.t_end, 't_end')
        self.cfl = validate_fraction(self.cfl, 'cfl')
        self.record_every = validate_count(self.record_every, 'record_every')
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {', '.join(SCHEMES)}, got {self.scheme!r}")
        if self.dt_max is not None:
            self.dt_max = validate_positive(self.dt_max, 'dt_max')
        self.blowup_ceiling = validate_positive(self.blowup_ceiling, 'blowup_ceiling')


@dataclass
class Diagnostics:
    """Balance quantities of one recorded state"""
    total_number: float
    total_mass: float
    influx: float
    outflux: float
    number_source: float
    mass_source: float
    number_balance_residual: float = 0.0
    mass_balance_residual: float = 0.0


@dataclass(eq=False)
class Trajectory:
    grid: Grid
    times: List[float]
    states: List[DensityField]
    diagnostics: List[Diagnostics]
    dt: float
    steps: int
    blew_up: bool = False

    @property
    def final(self) -> DensityField:
        return self.states[-1]

    def number_series(self) -> np.ndarray:
        return np.array([d.total_number for d in self.diagnostics])

    def mass_series(self) -> np.ndarray:
        return np.array([d.total_mass for d in self.diagnostics])


@dataclass
class DecayFit(JsonReport):
    """Least-squares slope of log |p(t) - p*|_1 over the recorded tail"""
    epsilon: float
    rate: float
    r_squared: float
    degenerate: bool = False
    blew_up: bool = False
    times: List[float] = field(default_factory=list)
    norms: List[float] = field(default_factory=list)


def _rhs_values(p: np.ndarray, table: RateTable) -> np.ndarray:
    flux = table.g * p
    upstream = np.empty_like(flux)
    upstream[0] = table.renewal(p)
    upstream[1:] = flux[:-1]
    return -(flux - upstream) / table.grid.h + table.reaction(p)


def rhs(p: DensityField, rates: RateSet) -> DensityField:
    """
    Right-hand side F[p] of the model at every node

    Transport -d(gp)/dx by backward differences of the flux, with node 0
    fed by the renewal integral int_0^{x1} q p dx; then -mu p, fragmentation
    gain and loss (1/2 kf p), aggregation gain and loss.
    """
    return p.like(_rhs_values(p.values, tabulate(rates, p.grid)))


def time_step(table: RateTable, p0: np.ndarray, opts: SimOptions) -> float:
    """Largest admissible dt for the transport CFL, the reaction rates and dt_max"""
    h = table.grid.h
    candidates = [opts.cfl * h / float(np.max(table.g))]
    reaction = (float(np.max(table.removal))
                + float(np.max(np.abs(table.loss_matrix) @ np.abs(p0)))
                + float(np.max(np.sum(table.frag_matrix, axis=0))))
    if reaction > 0.0:
        candidates.append(opts.cfl / reaction)
    if opts.dt_max is not None:
        candidates.append(opts.dt_max)
    return min(candidates)


def _diagnostics(p: np.ndarray, table: RateTable, first_moment: np.ndarray) -> Diagnostics:
    x = table.grid.nodes
    w = table.weights
    flux = table.g * p
    # face fluxes at x = h/2 and x = x1 - h/2 close the discrete number balance
    influx = 0.5 * (table.renewal(p) + flux[0])
    outflux = 0.5 * (flux[-2] + flux[-1])
    number_source = (influx - outflux - w @ (table.mu * p) + 0.5 * (w @ (table.kf * p))
                     - 0.5 * (w @ table.aggregation_loss(p)))
    mass_source = (-x[-1] * flux[-1] + w @ flux - w @ (table.mu * x * p)
                   + w @ (table.kf * p * (first_moment - 0.5 * x)))
    # dN/dt and dM/dt of the semi-discrete system at this state
    dp = _rhs_values(p, table)
    return Diagnostics(
        total_number=float(w @ p),
        total_mass=float(w @ (x * p)),
        influx=float(influx),
        outflux=float(outflux),
        number_source=float(number_source),
        mass_source=float(mass_source),
        number_balance_residual=float(abs(w @ dp - number_source)),
        mass_balance_residual=float(abs(w @ (x * dp) - mass_source)),
    )


def run(p0: DensityField, rates: RateSet, opts: Optional[SimOptions] = None) -> Trajectory:
    """
    Integrate from p0 to opts.t_end with classical RK4

    Records every record_every steps plus the final state. A total number
    above blowup_ceiling (or a non-finite state) stops the run with the
    blew_up flag set; that is an outcome, not an error.
    """
    opts = opts or SimOptions()
    grid = p0.grid
    table = tabulate(rates, grid)
    first_moment = mass_budget(rates, grid).first_moment
    p = np.array(p0.values, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValidationError("initial density must be finite")

    dt = time_step(table, p, opts)
    steps = max(1, math.ceil(opts.t_end / dt - 1e-12))
    dt = opts.t_end / steps
    logger.debug(f"Simulating '{rates.name}' on {grid}: {steps} steps of dt={dt:.3e}")

    f = lambda v: _rhs_values(v, table)
    times, states, diagnostics = [0.0], [p0.like(p.copy())], [_diagnostics(p, table, first_moment)]
    blew_up = False
    warned = False
    for step in range(1, steps + 1):
        k1 = f(p)
        k2 = f(p + 0.5 * dt * k1)
        k3 = f(p + 0.5 * dt * k2)
        k4 = f(p + dt * k3)
        p = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        diverging = not np.all(np.isfinite(p)) or table.weights @ p > opts.blowup_ceiling
        if step % opts.record_every and step != steps and not diverging:
            continue
        times.append(step * dt)
        states.append(p0.like(p.copy()))
        if diverging:
            blew_up = True
            diagnostics.append(Diagnostics(*([float('nan')] * 8)))
            logger.warning(f"Blow-up at t={step * dt:.4g}: total number above {opts.blowup_ceiling:g}")
            break
        diagnostics.append(_diagnostics(p, table, first_moment))
        peak = float(np.max(p))
        if not warned and float(np.min(p)) < -1e-10 * max(peak, 1e-300):
            logger.warning(f"Negative density {np.min(p):.3e} at t={step * dt:.4g}")
            warned = True

    return Trajectory(grid=grid, times=times, states=states, diagnostics=diagnostics,
                      dt=dt, steps=steps, blew_up=blew_up)


def default_shape(grid: Grid) -> DensityField:
    """Half-cosine bump vanishing at both ends, unit L1 norm"""
    values = np.cos(np.pi * (grid.nodes / grid.x1 - 0.5))
    values = np.clip(values, 0.0, None)
    values[0] = values[-1] = 0.0
    return DensityField(grid, values / sp_integrate.trapezoid(values, dx=grid.h))


def _fit(times: np.ndarray, norms: np.ndarray):
    start = int(TRANSIENT_FRACTION * len(times))
    t, n = times[start:], norms[start:]
    usable = np.isfinite(n) & (n > 0.0)
    t, n = t[usable], n[usable]
    if t.size < 2:
        return None
    log_n = np.log(n)
    slope, intercept = np.polyfit(t, log_n, 1)
    residual = log_n - (slope * t + intercept)
    spread = np.sum((log_n - log_n.mean()) ** 2)
    r_squared = 1.0 - np.sum(residual ** 2) / spread if spread > 0.0 else 1.0
    return float(slope), float(r_squared)


def perturbation_experiment(p_star: DensityField, rates: RateSet, epsilon: Optional[float] = None,
                            shape: Optional[DensityField] = None,
                            opts: Optional[SimOptions] = None) -> DecayFit:
    """
    Run from p* + epsilon*shape and fit the decay (or growth) rate of |p(t) - p*|_1

    Args:
        p_star: Equilibrium to perturb
        rates: Model rates
        epsilon: Amplitude; defaults to 1e-3 |p*|_1, or 1e-3 when p* = 0
        shape: Unit-L1 perturbation profile (default half-cosine bump)
        opts: Simulation options

    Returns:
        DecayFit; negative rate means observed decay
    """
    grid = p_star.grid
    shape = shape if shape is not None else default_shape(grid)
    norm = shape.l1_norm()
    if not np.isclose(norm, 1.0, rtol=1e-8):
        raise ValidationError(f"perturbation shape must have unit L1 norm, got {norm}")
    if epsilon is None:
        base = p_star.l1_norm()
        epsilon = 1e-3 * base if base > 0.0 else 1e-3
    epsilon = validate_nonnegative(epsilon, 'epsilon')

    trajectory = run(p_star.like(p_star.values + epsilon * shape.values), rates, opts)
    times = np.asarray(trajectory.times)
    norms = np.array([
        sp_integrate.trapezoid(np.abs(s.values - p_star.values), dx=grid.h) for s in trajectory.states
    ])
    fitted = _fit(times, norms) if epsilon > 0.0 else None
    if fitted is None:
        logger.info("Perturbation fit degenerate (no usable perturbation norms)")
        rate, r_squared, degenerate = 0.0, 0.0, True
    else:
        (rate, r_squared), degenerate = fitted, False
        logger.info(f"Perturbation of '{rates.name}' with epsilon={epsilon:.3g}: "
                    f"rate {rate:.6g} (r^2 {r_squared:.4f})")
    return DecayFit(epsilon=float(epsilon), rate=rate, r_squared=r_squared, degenerate=degenerate,
                    blew_up=trajectory.blew_up, times=times.tolist(), norms=norms.tolist())
