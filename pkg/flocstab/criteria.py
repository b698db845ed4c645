"""
Stability and instability criteria

Zero solution: the instability integral and the sign test on
q + kf/2 - mu. Non-trivial solution: the instability integral with the
aggregation term in the exponent, and the characteristic function
K(lambda) = A11 A22 - (1 - A12)(1 - A21). Verdicts are three-valued;
every criterion is sufficient only, so "inconclusive" is a normal answer.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import optimize

from .linearization import (
    LinearizedCoefficients, OperatorMatrix, PositivityCheck, assemble_matrix, build_coefficients,
    check_positivity, spectral_abscissa,
)
from .logging_config import logger
from .model import Grid, RateSet, build_preset, tabulate
from .quadrature import integrating_factor
from .reports import JsonReport
from .steady_state import DensityField
from .validation import BracketError, SpectralError, validate_nonnegative, validate_positive

STABLE = 'stable'
UNSTABLE = 'unstable'
INCONCLUSIVE = 'inconclusive'

MAX_DOUBLINGS = 40


@dataclass
class ZeroSolutionReport(JsonReport):
    instability_integral: float
    instability_triggered: bool
    stability_margin: float
    stability_triggered: bool
    verdict: str
    spectral_abscissa: Optional[float] = None


@dataclass
class CharacteristicEvaluation(JsonReport):
    lam: float
    A11: float
    A12: float
    A21: float
    A22: float
    K: float


@dataclass
class NontrivialReport(JsonReport):
    instability_integral: float
    instability_triggered: bool
    c1: float
    A11_0: float
    A12_0: float
    A21_0: float
    A22_0: float
    K_0: float
    stability_triggered: bool
    positivity: PositivityCheck
    verdict: str
    spectral_abscissa: Optional[float] = None
    negative_root: Optional[float] = None

    @property
    def positivity_ok(self) -> bool:
        return self.positivity.holds


def _decaying_integral(rates: RateSet, grid: Grid, A: np.ndarray) -> float:
    """int_0^{x1} q/g exp(-int_0^x A/g ds) dx"""
    table = tabulate(rates, grid)
    factor = integrating_factor(0.0, grid.samples(A), grid.samples(table.g))
    return factor.decaying_integral(table.q / table.g)


def zero_instability_criterion(rates: RateSet, grid: Grid) -> float:
    """
    int_0^{x1} q/g exp(-int_0^x (mu + kf/2)/g ds) dx; the zero solution is unstable above 1
    """
    return _decaying_integral(rates, grid, tabulate(rates, grid).removal)


def zero_stability_criterion(rates: RateSet, grid: Grid) -> float:
    """max over nodes of q + kf/2 - mu; the zero solution is stable when negative"""
    table = tabulate(rates, grid)
    return float(np.max(table.q + 0.5 * table.kf - table.mu))


def assemble_zero_operator(rates: RateSet, grid: Grid) -> OperatorMatrix:
    """
    Discretized linearization at p = 0, assembled stencil by stencil

    Built without the weight matrices of flocstab.quadrature so it can
    cross-check assemble_matrix.
    """
    table = tabulate(rates, grid)
    h = grid.h
    n = grid.size
    g = table.g
    transport = (np.eye(n, k=-1) @ np.diag(g) - np.diag(g)) / h
    renewal_weights = np.full(n, h)
    renewal_weights[[0, -1]] = 0.5 * h
    transport[0] += renewal_weights * table.q / h
    reaction = -np.diag(table.mu + 0.5 * table.kf)

    fragmentation = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            if j == n - 1:
                weight = 0.0 if i == j else 0.5 * h
            else:
                weight = 0.5 * h if i == j else h
            fragmentation[i, j] = weight * table.gamma[i, j] * table.kf[j]
    return OperatorMatrix(entries=transport + reaction + fragmentation, grid=grid)


def zero_verdict(rates: RateSet, grid: Grid, spectral: bool = True) -> ZeroSolutionReport:
    """
    Both zero-solution criteria, a verdict and (optionally) the discrete spectral abscissa
    """
    integral = zero_instability_criterion(rates, grid)
    margin = zero_stability_criterion(rates, grid)
    unstable = integral > 1.0
    stable = margin < 0.0
    if unstable and stable:
        logger.error(f"Zero-solution criteria both triggered (integral {integral:.6g}, margin {margin:.6g})")
        verdict = INCONCLUSIVE
    elif unstable:
        verdict = UNSTABLE
    elif stable:
        verdict = STABLE
    else:
        verdict = INCONCLUSIVE

    abscissa = None
    if spectral:
        abscissa = spectral_abscissa(assemble_zero_operator(rates, grid)).abscissa
    report = ZeroSolutionReport(
        instability_integral=integral, instability_triggered=unstable,
        stability_margin=margin, stability_triggered=stable,
        verdict=verdict, spectral_abscissa=abscissa,
    )
    logger.info(f"Zero solution of '{rates.name}': {verdict} (integral {integral:.6g}, margin {margin:.6g}"
                + (f", abscissa {abscissa:.6g})" if abscissa is not None else ")"))
    return report


def nontrivial_instability_criterion(rates: RateSet, p_star: DensityField) -> float:
    """
    int q/g exp(-int_0^x (mu + kf/2 + int_0^{x1-s} ka(s, y) p*(y) dy)/g ds) dx

    The inner aggregation integral pairs ka(s, y) with p*(y).
    """
    grid = p_star.grid
    table = tabulate(rates, grid)
    inner = np.sum(table.trunc * table.ka * p_star.values[None, :], axis=1)
    return _decaying_integral(rates, grid, table.removal + inner)


def c1_bound(rates: RateSet, p_star: DensityField) -> float:
    """|ka p*|_inf + |Gamma kf|_inf over node pairs (the second over x <= y)"""
    table = tabulate(rates, p_star.grid)
    aggregation = float(np.max(table.ka * p_star.values[:, None]))
    support = np.triu(np.ones(table.gamma.shape, dtype=bool))
    fragmentation = float(np.max(np.where(support, table.gamma * table.kf[None, :], 0.0)))
    return max(aggregation, 0.0) + max(fragmentation, 0.0)


def characteristic_function(lam: float, rates: RateSet, coeffs: LinearizedCoefficients,
                            c1: float) -> CharacteristicEvaluation:
    """
    A_ij(lambda) and K(lambda)

    A11 = int 1/(T g), A12 = c1 int (int_0^x T ds)/(T g),
    A21 = int q/(T g), A22 = c1 int q (int_0^x T ds)/(T g),
    all through exp(logT(s) - logT(x)).
    """
    c1 = validate_nonnegative(c1, 'c1')
    grid = coeffs.grid
    table = tabulate(rates, grid)
    factor = integrating_factor(lam, coeffs.A, grid.samples(table.g))
    decay = factor.decay_weights()
    running = factor.running_ratio() / table.g
    w = table.weights
    A11 = float(decay @ (1.0 / table.g))
    A12 = c1 * float(w @ running)
    A21 = float(decay @ (table.q / table.g))
    A22 = c1 * float(w @ (table.q * running))
    K = A11 * A22 - (1.0 - A12) * (1.0 - A21)
    return CharacteristicEvaluation(lam=float(lam), A11=A11, A12=A12, A21=A21, A22=A22, K=K)


def find_negative_root(rates: RateSet, coeffs: LinearizedCoefficients, c1: float,
                       lam_lo: Optional[float] = None, max_doublings: int = MAX_DOUBLINGS) -> float:
    """
    Negative real root of K

    Expands [lam_lo, 0] leftward (doubling lam_lo) until K changes sign,
    then bisects to 1e-14.

    Raises:
        BracketError: K(0) >= 0, or no sign change within max_doublings
    """
    def K(lam: float) -> float:
        return characteristic_function(lam, rates, coeffs, c1).K

    k_hi = K(0.0)
    if not k_hi < 0.0:
        raise BracketError(f"K(0) = {k_hi:.6g} is not negative; no bracket [lambda, 0]")
    table = tabulate(rates, coeffs.grid)
    lo = lam_lo if lam_lo is not None else -10.0 * (float(np.max(coeffs.A.values)) + float(np.max(table.g)))
    if not lo < 0.0:
        raise BracketError(f"lam_lo must be negative, got {lo}")
    hi = 0.0
    for _ in range(max_doublings + 1):
        k_lo = K(lo)
        if k_lo >= 0.0:
            break
        hi, lo = lo, 2.0 * lo
    else:
        raise BracketError(f"K stays negative down to lambda = {hi:.6g} after {max_doublings} doublings")
    if k_lo == 0.0:
        return lo

    root = float(optimize.bisect(K, lo, hi, xtol=1e-14, maxiter=500))
    delta = 1e-4 * abs(root)
    if not K(root - delta) * K(root + delta) < 0.0:
        logger.warning(f"No sign change of K across lambda0 = {root:.10g} at delta = {delta:.3g}")
    logger.debug(f"Negative root of K at {root:.10g} (bracket [{lo:.6g}, {hi:.6g}])")
    return root


def k_trace(rates: RateSet, coeffs: LinearizedCoefficients, c1: float,
            lambdas: Sequence[float]) -> List[CharacteristicEvaluation]:
    """K(lambda) at each lambda, for CSV export"""
    return [characteristic_function(lam, rates, coeffs, c1) for lam in lambdas]


def nontrivial_verdict(rates: RateSet, p_star: DensityField, spectral: bool = True) -> NontrivialReport:
    """
    Stability report for a stationary solution

    unstable: instability integral > 1 with the positivity conditions;
    stable: K(0) < 0, A12(0) < 1, A21(0) < 1 with the positivity conditions;
    inconclusive otherwise. The discrete spectral abscissa is attached as a hint.
    """
    coeffs = build_coefficients(rates, p_star)
    positivity = check_positivity(coeffs, rates)
    integral = nontrivial_instability_criterion(rates, p_star)
    c1 = c1_bound(rates, p_star)
    at_zero = characteristic_function(0.0, rates, coeffs, c1)

    instability_triggered = integral > 1.0
    stability_triggered = (positivity.holds and at_zero.K < 0.0
                           and at_zero.A12 < 1.0 and at_zero.A21 < 1.0)
    if instability_triggered and positivity.holds:
        verdict = UNSTABLE
    elif stability_triggered:
        verdict = STABLE
    else:
        verdict = INCONCLUSIVE

    root = None
    if stability_triggered:
        try:
            root = find_negative_root(rates, coeffs, c1)
        except BracketError as e:
            logger.warning(f"Negative root search failed: {e}")

    abscissa = None
    if spectral:
        try:
            abscissa = spectral_abscissa(assemble_matrix(coeffs, rates)).abscissa
        except SpectralError as e:
            logger.warning(f"Spectral annotation unavailable: {e}")

    report = NontrivialReport(
        instability_integral=integral, instability_triggered=instability_triggered, c1=c1,
        A11_0=at_zero.A11, A12_0=at_zero.A12, A21_0=at_zero.A21, A22_0=at_zero.A22, K_0=at_zero.K,
        stability_triggered=stability_triggered, positivity=positivity, verdict=verdict,
        spectral_abscissa=abscissa, negative_root=root,
    )
    logger.info(f"Stationary solution of '{rates.name}': {verdict} (K(0) {at_zero.K:.6g}, "
                f"A12(0) {at_zero.A12:.6g}, A21(0) {at_zero.A21:.6g}, integral {integral:.6g})")
    return report


# ---------------------------------------------------------------------------
# Printed closed forms for the second preset
# ---------------------------------------------------------------------------

@dataclass
class PrintedBounds(JsonReport):
    """
    Closed-form inequalities of the exponential-growth preset

    The published value of int_0^1 q/g dx, b(a + e^a - 1 - 2a e^a)/a^2,
    is negative for a > 0; direct integration gives
    b(2a e^a - e^a - a + 1)/a^2. Each inequality is evaluated with both,
    next to the quadrature value.
    """
    a: float
    b: float
    c: float
    q_over_g_printed: float
    q_over_g_direct: float
    q_over_g_quadrature: float
    existence_printed: float
    existence_direct: float
    a12_bound: float
    a11_a22_bound: float
    final_lhs: float
    final_rhs_printed: float
    final_rhs_direct: float
    stable_printed: bool
    stable_direct: bool
    notes: List[str] = field(default_factory=list)


def example2_printed_bounds(a: float, b: float, c: float, n_cells: int = 400) -> PrintedBounds:
    """
    Evaluate the published existence and stability inequalities with c1 replaced by 2c
    """
    a = validate_positive(a, 'a')
    b = validate_nonnegative(b, 'b')
    c = validate_nonnegative(c, 'c')
    ea = math.exp(a)
    printed = b * (a + ea - 1.0 - 2.0 * a * ea) / a**2
    direct = b * (2.0 * a * ea - ea - a + 1.0) / a**2

    rates = build_preset('example2', {'a': a, 'b': b, 'c': c})
    grid = Grid.uniform(1.0, n_cells)
    table = tabulate(rates, grid)
    quadrature = float(table.weights @ (table.q / table.g))

    a12 = 2.0 * c * (ea * (a - 1.0) + 1.0) / a**2
    a11_a22 = 2.0 * c * (ea - 1.0) * (a - 2.0 + (2.0 * a**2 - 3.0 * a + 2.0) * ea) / a**4
    rhs_printed = (1.0 - a12) * (1.0 - printed)
    rhs_direct = (1.0 - a12) * (1.0 - direct)

    notes = []
    if printed < 0.0 < direct:
        notes.append("published int q/g is negative; direct integration is positive")
    return PrintedBounds(
        a=a, b=b, c=c,
        q_over_g_printed=printed, q_over_g_direct=direct, q_over_g_quadrature=quadrature,
        existence_printed=c * ea / a + printed, existence_direct=c * ea / a + direct,
        a12_bound=a12, a11_a22_bound=a11_a22,
        final_lhs=a11_a22, final_rhs_printed=rhs_printed, final_rhs_direct=rhs_direct,
        stable_printed=a12 < 1.0 and printed < 1.0 and a11_a22 < rhs_printed,
        stable_direct=a12 < 1.0 and direct < 1.0 and a11_a22 < rhs_direct,
        notes=notes,
    )
