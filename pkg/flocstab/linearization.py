"""
Linearized operator around a stationary solution

The matrix assembled here is the exact Jacobian of the discrete
right-hand side in flocstab.simulator: both use the same upwind stencil,
the same renewal row and the same trapezoid weights. The renewal boundary
functional is taken as int_0^{x1} q(x) phi(x) dx.
"""

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import linalg

from .logging_config import logger
from .model import Grid, RateSet, tabulate
from .quadrature import Samples
from .reports import JsonReport
from .steady_state import DensityField
from .validation import SpectralError, ValidationError


@dataclass(eq=False)
class LinearizedCoefficients:
    """
    A(x) = kf/2 + mu + int_0^{x1-x} E(y, x) dy with E(x, y) = ka(x, y) p*(x)

    E[i, j] holds E(x_i, y_j).
    """
    A: Samples
    E: np.ndarray
    p_star: DensityField

    @property
    def grid(self) -> Grid:
        return self.p_star.grid


@dataclass
class PositivityCheck(JsonReport):
    cond1_holds: bool
    cond1_worst: float
    cond2_holds: bool
    cond2_worst: float

    @property
    def holds(self) -> bool:
        return self.cond1_holds and self.cond2_holds


@dataclass(eq=False)
class OperatorMatrix:
    entries: np.ndarray
    grid: Optional[Grid] = None

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other):
        values = other.values if isinstance(other, Samples) else other
        return self.entries @ values


@dataclass(eq=False)
class SpectralResult(JsonReport):
    abscissa: float
    rightmost: complex
    eigenvalues: np.ndarray = field(repr=False, metadata={'serialize': False})


def build_coefficients(rates: RateSet, p_star: DensityField) -> LinearizedCoefficients:
    """
    Tabulate E and A at the linearization point

    Raises:
        ValidationError: p_star has negative values
        GridMismatchError: p_star grid does not match the rate domain
    """
    table = tabulate(rates, p_star.grid)
    p = p_star.values
    if p.size and np.min(p) < 0.0:
        raise ValidationError(f"linearization point must be nonnegative, min p* = {np.min(p):.3e}")
    E = table.ka * p[:, None]
    # int_0^{x1-x_i} E(y, x_i) dy over nodes 0..n-i
    A = table.removal + np.sum(table.trunc * E.T, axis=1)
    return LinearizedCoefficients(A=p_star.grid.samples(A), E=E, p_star=p_star)


def check_positivity(coeffs: LinearizedCoefficients, rates: RateSet, tol: float = 1e-12) -> PositivityCheck:
    """
    Positive-semigroup conditions on node pairs

    cond1: d/dx (ka(x, y) p*(x)) <= 0 for y < x, by centered differences at
    interior nodes. cond2: Gamma(x; y) kf(y) >= ka(x, y) p*(x) for y >= x, y > 0.
    """
    grid = coeffs.grid
    table = tabulate(rates, grid)
    E = coeffs.E
    n = grid.size
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing='ij')

    scale = max(1.0, float(np.max(np.abs(E))) / grid.h) if E.size else 1.0
    slope = (E[2:, :] - E[:-2, :]) / (2.0 * grid.h)
    below = (j < i)[1:-1, :]
    cond1_worst = float(np.max(slope[below], initial=0.0))

    above = (j >= i) & (j >= 1)
    excess = E - table.gamma * table.kf[None, :]
    cond2_worst = float(np.max(excess[above], initial=0.0))

    check = PositivityCheck(
        cond1_holds=cond1_worst <= tol * scale, cond1_worst=max(cond1_worst, 0.0),
        cond2_holds=cond2_worst <= tol, cond2_worst=max(cond2_worst, 0.0),
    )
    if not check.holds:
        logger.debug(f"Positivity conditions fail: cond1 worst {check.cond1_worst:.3e}, "
                     f"cond2 worst {check.cond2_worst:.3e}")
    return check


def assemble_matrix(coeffs: LinearizedCoefficients, rates: RateSet) -> OperatorMatrix:
    """
    Dense matrix of L on the grid

    Upwind transport of g*phi with the renewal row at node 0, -A on the
    diagonal, fragmentation gain, aggregation loss -int E(x, y) phi(y) dy and
    gain int_0^x E(x - y, y) phi(y) dy.
    """
    grid = coeffs.grid
    table = tabulate(rates, grid)
    h = grid.h
    n = grid.size
    E = coeffs.E

    m = np.zeros((n, n))
    idx = np.arange(n)
    m[idx, idx] = -table.g / h
    m[idx[1:], idx[:-1]] = table.g[:-1] / h
    m[0, :] += table.weights * table.q / h
    m[idx, idx] -= coeffs.A.values
    m += table.frag_matrix
    m -= table.trunc * E
    m += table.head * E[table.shift, idx[None, :]]
    return OperatorMatrix(entries=m, grid=grid)


def spectral_abscissa(m: Union[OperatorMatrix, np.ndarray]) -> SpectralResult:
    """
    Rightmost eigenvalue of a dense matrix

    Raises:
        SpectralError: The eigenvalue computation failed
    """
    entries = m.entries if isinstance(m, OperatorMatrix) else np.asarray(m, dtype=float)
    try:
        eigenvalues = linalg.eigvals(entries)
    except (linalg.LinAlgError, ValueError) as e:
        logger.error(f"Eigenvalue computation failed: {e}")
        raise SpectralError(f"eigenvalue computation failed: {e}") from e
    k = int(np.argmax(eigenvalues.real))
    result = SpectralResult(abscissa=float(eigenvalues.real[k]), rightmost=complex(eigenvalues[k]),
                            eigenvalues=eigenvalues)
    logger.debug(f"Spectral abscissa {result.abscissa:.6g} from {entries.shape[0]} eigenvalues")
    return result
