"""
Quadrature on the uniform size grid.

Composite trapezoid and Simpson rules, running integrals, the weight
matrices behind every nested integral of the model, and the log-space
integrating factor T(lambda, x) used by the characteristic function.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np
from scipy import integrate as sp_integrate

from .validation import GridMismatchError, QuadratureError

if TYPE_CHECKING:
    from .model import Grid

# exponent cap for exp() of log-space differences
EXP_CAP = 300.0
# below this |d| the cell kernels use their Taylor series
SERIES_CUTOFF = 1e-2


@dataclass(eq=False)
class Samples:
    """Real values tabulated at every node of a grid"""
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise GridMismatchError(
                f"expected {self.grid.size} node values, got shape {self.values.shape}")

    def __len__(self) -> int:
        return self.values.size

    def like(self, values) -> 'Samples':
        """Samples of the same class on the same grid"""
        return type(self)(self.grid, values)


def _mean_kernel(d: np.ndarray) -> np.ndarray:
    """int_0^1 exp(-d t) dt for d >= 0"""
    safe = np.where(d > 0.0, d, 1.0)
    return np.where(d > 0.0, -np.expm1(-safe) / safe, 1.0)


def _ramp_kernel(d: np.ndarray) -> np.ndarray:
    """int_0^1 t exp(-d t) dt for d >= 0"""
    safe = np.where(d >= SERIES_CUTOFF, d, 1.0)
    direct = (-np.expm1(-safe) - safe * np.exp(-safe)) / safe**2
    s = np.minimum(d, SERIES_CUTOFF)
    series = 1/2 - s/3 + s**2/8 - s**3/30 + s**4/144 - s**5/840
    return np.where(d >= SERIES_CUTOFF, direct, series)


def _falling_kernel(d: np.ndarray) -> np.ndarray:
    """int_0^1 (1 - t) exp(-d t) dt for d >= 0"""
    safe = np.where(d >= SERIES_CUTOFF, d, 1.0)
    direct = (safe + np.expm1(-safe)) / safe**2
    s = np.minimum(d, SERIES_CUTOFF)
    series = 1/2 - s/6 + s**2/24 - s**3/120 + s**4/720 - s**5/5040
    return np.where(d >= SERIES_CUTOFF, direct, series)


def _endpoint_weight(near: np.ndarray, far: np.ndarray, h: float) -> np.ndarray:
    """
    h int_0^1 t exp(-L(t)) dt with L linear from far (t = 0) to near (t = 1).

    This is the weight of the node where L = near when exp(-L) times a
    linear function is integrated exactly over one cell.
    """
    d = near - far
    low = np.minimum(near, far)
    scale = np.exp(np.minimum(-low, EXP_CAP))
    return h * scale * np.where(d >= 0.0, _ramp_kernel(np.abs(d)), _falling_kernel(np.abs(d)))


@dataclass(eq=False)
class IntegratingFactor:
    """
    logT(x) = int_0^x (lambda + A(y)) / g(y) dy, kept in log space

    Integrals against exp(-logT) use exponentially fitted weights: logT is
    taken linear in each cell and the exponential is integrated exactly.
    The weights tend to 0 as lambda grows.
    """
    lam: float
    logT: Samples

    def decay_weights(self) -> np.ndarray:
        """w with w @ f = int_0^{x1} f(x) / T(lambda, x) dx for f linear in each cell"""
        log_t = self.logT.values
        h = self.logT.grid.h
        left, right = log_t[:-1], log_t[1:]
        w = np.zeros_like(log_t)
        w[1:] += _endpoint_weight(right, left, h)
        w[:-1] += _endpoint_weight(left, right, h)
        return w

    def decaying_integral(self, f: np.ndarray) -> float:
        """int_0^{x1} f(x) / T(lambda, x) dx"""
        return float(self.decay_weights() @ f)

    def running_ratio(self) -> np.ndarray:
        """int_0^x T(lambda, s) ds / T(lambda, x) at every node"""
        log_t = self.logT.values
        h = self.logT.grid.h
        n = log_t.size
        # cell k spans nodes k, k+1; its exact integral of exp(L) is h exp(max L) * mean kernel
        step = np.abs(np.diff(log_t))
        top = np.maximum(log_t[:-1], log_t[1:])
        cell = h * _mean_kernel(step)
        # rows: x nodes, columns: cells lying left of x
        below = np.arange(n - 1)[None, :] < np.arange(n)[:, None]
        diff = np.minimum(top[None, :] - log_t[:, None], EXP_CAP)
        return np.sum(np.where(below, cell[None, :] * np.exp(np.where(below, diff, 0.0)), 0.0), axis=1)


def require_same_grid(*grids: Grid):
    """Raise GridMismatchError unless all grids are equal"""
    first = grids[0]
    for other in grids[1:]:
        if other != first:
            raise GridMismatchError(f"grid mismatch: {first} vs {other}")


def trapezoid_weights(n_cells: int, h: float) -> np.ndarray:
    """Composite trapezoid weights over all n_cells + 1 nodes"""
    w = np.full(n_cells + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


def head_weights(n_cells: int, h: float) -> np.ndarray:
    """
    Row i holds the trapezoid weights of int_0^{x_i} over nodes 0..i.

    Row 0 is zero (empty interval).
    """
    n = n_cells + 1
    w = h * np.tril(np.ones((n, n)))
    w[:, 0] *= 0.5
    w[np.arange(n), np.arange(n)] *= 0.5
    w[0, 0] = 0.0
    return w


def tail_weights(n_cells: int, h: float) -> np.ndarray:
    """
    Row i holds the trapezoid weights of int_{x_i}^{x1} over nodes i..n.

    Row n is zero (empty interval).
    """
    n = n_cells + 1
    w = h * np.triu(np.ones((n, n)))
    w[:, -1] *= 0.5
    w[np.arange(n), np.arange(n)] *= 0.5
    w[-1, -1] = 0.0
    return w


def truncated_weights(n_cells: int, h: float) -> np.ndarray:
    """
    Row i holds the trapezoid weights of int_0^{x1 - x_i} over nodes 0..n-i.

    On a uniform grid x1 - x_i is the node x_{n-i}, so the upper limit is exact.
    """
    return head_weights(n_cells, h)[::-1].copy()


def shift_indices(n_cells: int) -> np.ndarray:
    """idx[i, j] = i - j for j <= i, else 0 (node of x - y for y = x_j)"""
    n = n_cells + 1
    idx = np.arange(n)[:, None] - np.arange(n)[None, :]
    return np.where(idx >= 0, idx, 0)


def integrate(s: Samples, rule: str = 'trapezoid') -> float:
    """
    Composite quadrature of the samples over the whole interval.

    Args:
        s: Samples to integrate
        rule: 'trapezoid' or 'simpson' (Simpson needs an even cell count)

    Raises:
        QuadratureError: Unknown rule or odd cell count for Simpson
    """
    grid = s.grid
    if rule == 'trapezoid':
        return float(sp_integrate.trapezoid(s.values, dx=grid.h))
    if rule == 'simpson':
        if grid.n_cells % 2:
            raise QuadratureError(f"simpson rule needs an even number of cells, got {grid.n_cells}")
        return float(sp_integrate.simpson(s.values, dx=grid.h))
    raise QuadratureError(f"unknown quadrature rule: {rule}")


def cumulative_integral(s: Samples) -> Samples:
    """Running trapezoid integral F(x_k) = int_0^{x_k} s, with F(0) = 0"""
    return s.like(sp_integrate.cumulative_trapezoid(s.values, dx=s.grid.h, initial=0.0))


def integrating_factor(lam: float, A: Samples, g: Samples) -> IntegratingFactor:
    """
    Log of T(lambda, x) = exp(int_0^x (lambda + A) / g dy).

    Raises:
        QuadratureError: g has a nonpositive sample
    """
    require_same_grid(A.grid, g.grid)
    if np.any(g.values <= 0.0):
        k = int(np.argmin(g.values))
        raise QuadratureError(f"growth rate must be positive, g = {g.values[k]} at node {k}")
    integrand = A.like((lam + A.values) / g.values)
    return IntegratingFactor(lam=float(lam), logT=cumulative_integral(integrand))


def convolution_integral(f: Samples, kernel: Callable, x_index: int) -> float:
    """
    Trapezoid value of int_0^x kernel(x - y, y) f(x - y) f(y) dy at x = x_index node.

    The shifted arguments x - y land on nodes because the grid is uniform.
    """
    grid = f.grid
    if not 0 <= x_index <= grid.n_cells:
        raise QuadratureError(f"node index {x_index} outside grid with {grid.size} nodes")
    if x_index == 0:
        return 0.0
    nodes = grid.nodes
    j = np.arange(x_index + 1)
    k = np.broadcast_to(np.asarray(kernel(nodes[x_index - j], nodes[j]), dtype=float), j.shape)
    values = k * f.values[x_index - j] * f.values[j]
    return float(sp_integrate.trapezoid(values, dx=grid.h))
