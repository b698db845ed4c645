"""
Model ingredients for the flocculation equation

Rates are plain numpy-vectorized functions over the size interval
[0, x1]. Every consumer works on tabulated node values (RateTable),
never on the closed forms, so presets and custom rates are
interchangeable.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate as sp_integrate

from .logging_config import logger
from .quadrature import (
    Samples, head_weights, shift_indices, tail_weights, trapezoid_weights, truncated_weights,
)
from .reports import JsonReport
from .validation import (
    DomainError, GridMismatchError, PresetError, ValidationError,
    validate_grid_size, validate_nonnegative, validate_positive,
)

RateFunction = Callable[..., np.ndarray]

# relative slack so node sums landing exactly on x1 are cut
CUTOFF_RTOL = 1e-12

PRESET_PARAMS: Dict[str, Tuple[str, ...]] = {
    'example1': ('b', 'kf_slope'),
    'example2': ('a', 'b', 'c', 'd'),
}
PRESET_DEFAULTS: Dict[str, Dict[str, float]] = {
    'example1': {'kf_slope': 2.0},
    'example2': {'d': 0.0},
}


@dataclass(frozen=True)
class SizeDomain:
    """Size interval [0, x1]"""
    x1: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'x1', validate_positive(self.x1, 'x1'))

    def contains(self, x: float) -> bool:
        return 0.0 <= x <= self.x1


@dataclass(frozen=True)
class Grid:
    """Uniform grid with nodes x_k = k*h, k = 0..n_cells"""
    domain: SizeDomain
    n_cells: int

    def __post_init__(self):
        object.__setattr__(self, 'n_cells', validate_grid_size(self.n_cells, 'n_cells'))

    @classmethod
    def uniform(cls, x1: float = 1.0, n_cells: int = 200) -> 'Grid':
        return cls(SizeDomain(x1), n_cells)

    @property
    def x1(self) -> float:
        return self.domain.x1

    @property
    def size(self) -> int:
        """Node count"""
        return self.n_cells + 1

    @property
    def h(self) -> float:
        return self.domain.x1 / self.n_cells

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = np.linspace(0.0, self.domain.x1, self.size)
        nodes.setflags(write=False)
        return nodes

    def samples(self, values) -> Samples:
        return Samples(self, values)

    def __str__(self) -> str:
        return f"Grid(x1={self.x1}, n_cells={self.n_cells})"


@dataclass(frozen=True)
class RateSet:
    """
    The six model ingredients plus the size domain.

    g, mu, q, kf take an array of sizes; ka and gamma take two arrays
    (gamma as daughter x, parent y). Functions should broadcast like numpy
    ufuncs; scalar-only callables still work through np.vectorize.
    """
    g: RateFunction
    mu: RateFunction
    q: RateFunction
    kf: RateFunction
    ka: RateFunction
    gamma: RateFunction
    domain: SizeDomain = field(default_factory=SizeDomain)
    name: str = 'custom'
    params: Tuple[Tuple[str, float], ...] = ()

    @property
    def param_dict(self) -> Dict[str, float]:
        return dict(self.params)

    def replace(self, **changes) -> 'RateSet':
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True, eq=False)
class RateTable:
    """
    Node values of a RateSet on one grid.

    ka is symmetrized; ka_raw keeps the function values. gamma[i, j] is
    Gamma(x_i; x_j). The weight matrices are shared by every discrete
    operator so that they all see the same quadrature.
    """
    grid: Grid
    g: np.ndarray
    mu: np.ndarray
    q: np.ndarray
    kf: np.ndarray
    ka: np.ndarray
    ka_raw: np.ndarray
    gamma: np.ndarray

    @cached_property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.grid.n_cells, self.grid.h)

    @cached_property
    def head(self) -> np.ndarray:
        return head_weights(self.grid.n_cells, self.grid.h)

    @cached_property
    def tail(self) -> np.ndarray:
        return tail_weights(self.grid.n_cells, self.grid.h)

    @cached_property
    def trunc(self) -> np.ndarray:
        return truncated_weights(self.grid.n_cells, self.grid.h)

    @cached_property
    def shift(self) -> np.ndarray:
        return shift_indices(self.grid.n_cells)

    @cached_property
    def ka_shifted(self) -> np.ndarray:
        """ka(x_i - x_j, x_j) for j <= i"""
        cols = np.arange(self.grid.size)[None, :]
        return self.ka[self.shift, cols]

    @cached_property
    def frag_matrix(self) -> np.ndarray:
        """Trapezoid rows of int_x^{x1} Gamma(x; y) kf(y) (.) dy"""
        return self.tail * self.gamma * self.kf[None, :]

    @cached_property
    def loss_matrix(self) -> np.ndarray:
        """Trapezoid rows of int_0^{x1-x} ka(x, y) (.) dy"""
        return self.trunc * self.ka

    @cached_property
    def removal(self) -> np.ndarray:
        """mu + kf/2"""
        return self.mu + 0.5 * self.kf

    def aggregation_gain(self, p: np.ndarray) -> np.ndarray:
        """1/2 int_0^x ka(x-y, y) p(x-y) p(y) dy at every node"""
        return 0.5 * np.sum(self.head * self.ka_shifted * p[self.shift] * p[None, :], axis=1)

    def aggregation_loss(self, p: np.ndarray) -> np.ndarray:
        """p(x) int_0^{x1-x} ka(x, y) p(y) dy at every node"""
        return p * (self.loss_matrix @ p)

    def reaction(self, p: np.ndarray) -> np.ndarray:
        """Every term of the model except transport"""
        return (-self.removal * p + self.frag_matrix @ p
                + self.aggregation_gain(p) - self.aggregation_loss(p))

    def renewal(self, p: np.ndarray) -> float:
        """int_0^{x1} q p dx"""
        return float(self.weights @ (self.q * p))


def _sample(fn: RateFunction, *args: np.ndarray) -> np.ndarray:
    shape = np.broadcast(*args).shape
    try:
        values = np.asarray(fn(*args), dtype=float)
        return np.broadcast_to(values, shape).astype(float)
    except (TypeError, ValueError):
        return np.vectorize(fn, otypes=[float])(*args)


@lru_cache(maxsize=8)
def tabulate(rates: RateSet, grid: Grid) -> RateTable:
    """
    Tabulate a RateSet on a grid

    Raises:
        GridMismatchError: grid spans a different interval than the rates
    """
    if not np.isclose(grid.x1, rates.domain.x1, rtol=1e-14, atol=0.0):
        raise GridMismatchError(f"grid x1={grid.x1} does not match rate domain x1={rates.domain.x1}")
    x = grid.nodes
    X, Y = np.meshgrid(x, x, indexing='ij')
    ka_raw = _sample(rates.ka, X, Y)
    table = RateTable(
        grid=grid,
        g=_sample(rates.g, x),
        mu=_sample(rates.mu, x),
        q=_sample(rates.q, x),
        kf=_sample(rates.kf, x),
        ka=0.5 * (ka_raw + ka_raw.T),
        ka_raw=ka_raw,
        gamma=_sample(rates.gamma, X, Y),
    )
    logger.debug(f"Tabulated rates '{rates.name}' on {grid}")
    return table


# ---------------------------------------------------------------------------
# Rate building blocks
# ---------------------------------------------------------------------------

def constant(value: float) -> RateFunction:
    """Constant single-argument rate"""
    return lambda x: np.full(np.shape(x), float(value))


def constant_kernel(value: float) -> RateFunction:
    """Constant two-argument kernel (no cutoff; see with_cutoff)"""
    return lambda x, y: np.full(np.broadcast(x, y).shape, float(value))


def with_cutoff(kernel: RateFunction, x1: float) -> RateFunction:
    """Aggregation kernel set to zero where x + y >= x1"""
    limit = x1 * (1.0 - CUTOFF_RTOL)

    def cut(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        return np.where(x + y >= limit, 0.0, _sample(kernel, x, y))

    return cut


def uniform_gamma(x, y):
    """Uniform daughter density 1/y on 0 <= x <= y"""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    inside = (y > 0.0) & (x >= 0.0) & (x <= y)
    safe_y = np.where(y > 0.0, y, 1.0)
    return np.where(inside, 1.0 / safe_y, 0.0)


def bump_gamma(width: float) -> RateFunction:
    """
    Daughter density concentrated just below the parent size.

    A linear ramp 2(x - y + w)/w^2 on [y - w, y] with w = min(width, y);
    normalized to one, first moment y - w/3.
    """
    width = validate_positive(width, 'width')

    def gamma(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        w = np.minimum(width, y)
        inside = (y > 0.0) & (x <= y) & (x >= y - w)
        safe_w = np.where(w > 0.0, w, 1.0)
        return np.where(inside, 2.0 * (x - y + safe_w) / safe_w**2, 0.0)

    return gamma


def _profile(profile: Union[float, Sequence[float]], x1: float, name: str) -> RateFunction:
    """Constant rate, or node values on their own uniform grid interpolated linearly"""
    if isinstance(profile, (int, float)) and not isinstance(profile, bool):
        return constant(profile)
    values = np.asarray(profile, dtype=float)
    if values.ndim != 1 or values.size < 2 or not np.all(np.isfinite(values)):
        raise ValidationError(f"{name} must be a number or a list of at least 2 finite node values")
    xs = np.linspace(0.0, x1, values.size)
    return lambda x: np.interp(x, xs, values)


def custom_rates(x1: float = 1.0, g=1.0, mu=0.0, q=0.0, kf=0.0, ka=0.0,
                 gamma: str = 'uniform') -> RateSet:
    """
    Rates from constants or node-value tables.

    ka is a constant with the support cutoff; gamma is 'uniform'.
    """
    x1 = validate_positive(x1, 'x1')
    if gamma != 'uniform':
        raise ValidationError(f"gamma must be 'uniform', got {gamma!r}")
    ka = validate_nonnegative(ka, 'ka')
    return RateSet(
        g=_profile(g, x1, 'g'), mu=_profile(mu, x1, 'mu'), q=_profile(q, x1, 'q'),
        kf=_profile(kf, x1, 'kf'), ka=with_cutoff(constant_kernel(ka), x1),
        gamma=uniform_gamma, domain=SizeDomain(x1), name='custom',
    )


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def _preset_params(name: str, params) -> Dict[str, float]:
    names = PRESET_PARAMS[name]
    merged = dict(PRESET_DEFAULTS.get(name, {}))
    if isinstance(params, Mapping):
        unknown = set(params) - set(names)
        if unknown:
            raise PresetError(f"unknown {name} parameters: {', '.join(sorted(unknown))}")
        merged.update(params)
    else:
        values = list(params)
        if len(values) > len(names):
            raise PresetError(f"{name} takes at most {len(names)} parameters, got {len(values)}")
        merged.update(zip(names, values))
    missing = [n for n in names if n not in merged]
    if missing:
        raise PresetError(f"missing {name} parameters: {', '.join(missing)}")
    return merged


def build_preset(name: str, params, ka: Optional[RateFunction] = None,
                 gamma: Optional[RateFunction] = None) -> RateSet:
    """
    Build one of the two published parameterizations.

    example1 (b[, kf_slope]): x1 = 1, mu = 1, q = b(x+1), g = x+1,
    kf = kf_slope*x (kf_slope defaults to 2). ka defaults to zero.
    example2 (a, b, c[, d]): g = exp(-ax), q = b(x+1), kf = cx, mu = cx/2.
    ka is zero until bind_example2_kernel supplies p*.

    Args:
        name: 'example1' or 'example2'
        params: Parameter values, positional or by name
        ka: Aggregation kernel override (the support cutoff is applied)
        gamma: Daughter density override (default uniform)

    Raises:
        PresetError: Unknown preset or invalid parameters
    """
    if name not in PRESET_PARAMS:
        raise PresetError(f"unknown preset: {name!r} (expected one of {', '.join(PRESET_PARAMS)})")
    values = _preset_params(name, params)
    try:
        if name == 'example1':
            b = validate_nonnegative(values['b'], 'b')
            slope = validate_nonnegative(values['kf_slope'], 'kf_slope')
            g = lambda x: np.asarray(x, dtype=float) + 1.0
            mu = constant(1.0)
            q = lambda x: b * (np.asarray(x, dtype=float) + 1.0)
            kf = lambda x: slope * np.asarray(x, dtype=float)
            checked = {'b': b, 'kf_slope': slope}
        else:
            a = validate_positive(values['a'], 'a')
            b = validate_nonnegative(values['b'], 'b')
            c = validate_nonnegative(values['c'], 'c')
            d = validate_nonnegative(values['d'], 'd')
            g = lambda x: np.exp(-a * np.asarray(x, dtype=float))
            mu = lambda x: 0.5 * c * np.asarray(x, dtype=float)
            q = lambda x: b * (np.asarray(x, dtype=float) + 1.0)
            kf = lambda x: c * np.asarray(x, dtype=float)
            checked = {'a': a, 'b': b, 'c': c, 'd': d}
    except ValidationError as e:
        raise PresetError(f"invalid {name} parameters: {e}") from e

    x1 = 1.0
    kernel = with_cutoff(ka if ka is not None else constant_kernel(0.0), x1)
    return RateSet(
        g=g, mu=mu, q=q, kf=kf, ka=kernel,
        gamma=gamma if gamma is not None else uniform_gamma,
        domain=SizeDomain(x1), name=name,
        params=tuple(sorted(checked.items())),
    )


def bind_example2_kernel(rates: RateSet, p_star: Samples, d: Optional[float] = None) -> RateSet:
    """
    Re-bind ka = d(1-x)(1-y) / (p*(x) p*(y)) using a tabulated p*.

    p* is interpolated linearly and floored at max(1e-8, min p*).
    The support cutoff at x + y >= x1 is kept.
    """
    if rates.name != 'example2':
        raise PresetError(f"kernel binding applies to example2 only, got {rates.name!r}")
    if d is None:
        d = rates.param_dict.get('d', 0.0)
    d = validate_nonnegative(d, 'd')
    nodes = p_star.grid.nodes
    values = np.asarray(p_star.values, dtype=float)
    floor = max(1e-8, float(values.min()))
    table = np.maximum(values, floor)
    if floor == 1e-8:
        logger.warning(f"p* floored at {floor:g} when binding the aggregation kernel")

    def pf(x):
        return np.interp(x, nodes, table)

    def kernel(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        return d * (1.0 - x) * (1.0 - y) / (pf(x) * pf(y))

    params = dict(rates.params)
    params['d'] = d
    return rates.replace(ka=with_cutoff(kernel, rates.domain.x1), params=tuple(sorted(params.items())))


# ---------------------------------------------------------------------------
# Assumption audit
# ---------------------------------------------------------------------------

@dataclass
class AssumptionCheck:
    """One sampled check: pass flag, worst violation and where it occurred"""
    passed: bool
    worst: float = 0.0
    location: Optional[Tuple[float, ...]] = None


@dataclass
class AssumptionReport(JsonReport):
    """Outcome of validate_assumptions"""
    checks: Dict[str, AssumptionCheck]
    first_moment_defect: float
    # kernels with a jump across a support edge, with its size
    discontinuous: Dict[str, float]
    tol: float

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def flag(self, name: str) -> bool:
        return self.checks[name].passed

    def failed(self) -> Dict[str, AssumptionCheck]:
        return {k: c for k, c in self.checks.items() if not c.passed}

    def get_summary(self) -> str:
        """
        Human-readable summary

        Returns:
            Formatted summary string
        """
        status = 'PASSED' if self.all_passed else 'FAILED'
        lines = [f"Assumption audit - {status} (tol={self.tol:g})", ""]
        for name, check in self.checks.items():
            line = f"{name}: {'ok' if check.passed else 'violated'}"
            if not check.passed:
                line += f" (worst {check.worst:.3e} at {check.location})"
            lines.append(line)
        lines.append(f"\nFirst-moment defect: {self.first_moment_defect:.3e}")
        if self.discontinuous:
            jumps = ', '.join(f"{k} (jump {v:.3g})" for k, v in self.discontinuous.items())
            lines.append(f"Warning: discontinuous kernel admitted: {jumps}")
        return "\n".join(lines)


def kernel_jumps(rates: RateSet, grid: Grid) -> Dict[str, float]:
    """
    Jumps of gamma across x = y and of ka across x + y = x1

    Each kernel is sampled just inside and just outside its support edge
    next to every node; a kernel is listed when the largest difference
    exceeds 1e-6 (1 + its largest node value).
    """
    table = tabulate(rates, grid)
    x = grid.nodes
    delta = max(1e-9 * grid.h, 10.0 * CUTOFF_RTOL * grid.x1)
    jumps: Dict[str, float] = {}

    y = x[1:]
    gamma_jump = np.abs(_sample(rates.gamma, y - delta, y) - _sample(rates.gamma, y + delta, y))
    if gamma_jump.max() > 1e-6 * (1.0 + np.abs(table.gamma).max()):
        jumps['gamma'] = float(gamma_jump.max())

    s = x[:-1]
    edge = grid.x1 - s
    ka_jump = np.abs(_sample(rates.ka, s, edge - delta) - _sample(rates.ka, s, edge + delta))
    if ka_jump.max() > 1e-6 * (1.0 + np.abs(table.ka_raw).max()):
        jumps['ka'] = float(ka_jump.max())
    return jumps


def _worst(violation: np.ndarray, tol: float, coords) -> AssumptionCheck:
    """violation >= 0 where a check fails; coords maps a flat index to sizes"""
    if violation.size == 0:
        return AssumptionCheck(True)
    k = int(np.argmax(violation))
    worst = float(violation.flat[k])
    if not np.isfinite(worst):
        worst = float('inf')
    if worst <= tol:
        return AssumptionCheck(True, max(worst, 0.0))
    return AssumptionCheck(False, worst, coords(k))


def validate_assumptions(rates: RateSet, grid: Grid, tol: float = 1e-10) -> AssumptionReport:
    """
    Audit the standing assumptions by sampling on grid nodes

    A1 g > 0; A2 ka >= 0, symmetric, zero for x + y >= x1; A3 mu >= 0;
    A4 q >= 0; A5 kf >= 0 and kf(0) = 0; A6 Gamma >= 0 on [0, y] and zero
    above y. Normalization integrates Gamma over nodes 0..k for every
    parent node y = x_k > 0. Violations are reported, never raised.
    """
    table = tabulate(rates, grid)
    x = grid.nodes
    n = grid.size
    at_node = lambda k: (float(x[k]),)
    at_pair = lambda k: (float(x[k // n]), float(x[k % n]))

    checks: Dict[str, AssumptionCheck] = {}
    # strict positivity: g = 0 fails too
    k = int(np.argmin(table.g))
    if table.g[k] > 0.0:
        checks['A1'] = AssumptionCheck(True)
    else:
        checks['A1'] = AssumptionCheck(False, float(-table.g[k]), at_node(k))

    raw = table.ka_raw
    X, Y = np.meshgrid(x, x, indexing='ij')
    outside = (X + Y) >= grid.x1 * (1.0 - CUTOFF_RTOL)
    asymmetry = np.abs(raw - raw.T)
    ka_violation = np.maximum.reduce([
        -raw,
        np.where(asymmetry > 1e-12, asymmetry, 0.0),
        np.where(outside, np.abs(raw), 0.0),
    ])
    checks['A2'] = _worst(ka_violation, tol, at_pair)
    checks['A3'] = _worst(-table.mu, tol, at_node)
    checks['A4'] = _worst(-table.q, tol, at_node)
    kf_violation = -table.kf.copy()
    kf_violation[0] = max(kf_violation[0], abs(table.kf[0]))
    checks['A5'] = _worst(kf_violation, tol, at_node)

    # daughter i, parent j: support is x_i <= y_j
    support = np.triu(np.ones((n, n), dtype=bool))
    gamma = table.gamma
    gamma_violation = np.where(support, -gamma, np.abs(gamma))
    gamma_violation[:, 0] = np.abs(gamma[:, 0])
    checks['A6'] = _worst(gamma_violation, tol, at_pair)

    budget = mass_budget(rates, grid)
    checks['normalization'] = _worst(np.abs(budget.normalization[1:] - 1.0), tol,
                                     lambda k: (float(x[k + 1]),))
    report = AssumptionReport(
        checks=checks,
        first_moment_defect=float(np.max(np.abs(budget.first_moment_defect[1:]))),
        discontinuous=kernel_jumps(rates, grid),
        tol=tol,
    )
    for name, check in report.failed().items():
        logger.warning(f"Assumption {name} violated for '{rates.name}': worst {check.worst:.3e} at {check.location}")
    if report.discontinuous:
        logger.debug(f"Rates '{rates.name}' have discontinuous kernels: {', '.join(report.discontinuous)}")
    return report


# ---------------------------------------------------------------------------
# Moments of the daughter density
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class MassBudget(JsonReport):
    """Per parent node: int Gamma dx and int x Gamma dx - y/2"""
    y: np.ndarray
    normalization: np.ndarray
    first_moment: np.ndarray
    first_moment_defect: np.ndarray


def mass_budget(rates: RateSet, grid: Grid) -> MassBudget:
    """
    Moments of Gamma(.; y) over nodes 0..k for each parent node y = x_k
    """
    table = tabulate(rates, grid)
    x = grid.nodes
    # head row k integrates over [0, x_k]
    normalization = np.einsum('kj,jk->k', table.head, table.gamma)
    first_moment = np.einsum('kj,j,jk->k', table.head, x, table.gamma)
    return MassBudget(
        y=x.copy(),
        normalization=normalization,
        first_moment=first_moment,
        first_moment_defect=first_moment - 0.5 * x,
    )


def gamma_first_moment(rates: RateSet, y: float, grid: Grid) -> float:
    """
    Trapezoid value of int_0^y x Gamma(x; y) dx with grid.n_cells cells on [0, y]

    Raises:
        DomainError: y outside (0, x1]
    """
    if not (0.0 < y <= grid.x1):
        raise DomainError(f"parent size must lie in (0, {grid.x1}], got {y}")
    s = np.linspace(0.0, y, grid.size)
    values = s * _sample(rates.gamma, s, np.full_like(s, y))
    return float(sp_integrate.trapezoid(values, s))
