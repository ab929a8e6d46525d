"""Energy-axis quadrature on [0, omega_max].

The default rule is Gauss-Legendre in u = sqrt(omega / omega_max), which
resolves the sqrt(omega) threshold behaviour of the form factors used by the
model.  Plain Gauss-Legendre in omega is available as ``mapping="linear"``.

Principal-value integrals use singularity subtraction:

    PV int f(w) / (x0 - w) dw = int [f(w) - f(x0)] / (x0 - w) dw
                                + f(x0) * ln(x0 / (omega_max - x0))
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np

logger = logging.getLogger(__name__)

MAPPINGS = ("sqrt", "linear")

ArrayFunc = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


class LowAccuracyWarning(UserWarning):
    """Emitted when a principal value is requested next to a segment end."""


@dataclass(frozen=True, eq=False)
class EnergyGrid:
    """Quadrature nodes and positive weights on the open interval (0, omega_max)."""

    nodes: np.ndarray
    weights: np.ndarray
    omega_max: float
    mapping: str = "sqrt"

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def t_max(self) -> float:
        """Largest time for which exp(i w t) is treated as resolved on this grid."""
        return np.pi * self.n / (2.0 * self.omega_max)

    def integrate(self, f: ArrayFunc) -> complex:
        return integrate(self, f)

    @cached_property
    def pv_matrix(self) -> np.ndarray:
        """Matrix P with (P @ f)_i = PV int f(w) / (x_i - w) dw for node samples f.

        Off-diagonal entries are w_j / (x_i - x_j).  The diagonal absorbs the
        subtracted f(x_i) terms and the analytic log, and the i = j limit of the
        subtracted integrand, -w_i f'(x_i), is supplied through a local
        9-point Lagrange derivative.
        """
        x, w = self.nodes, self.weights
        n = self.n
        dx = x[:, None] - x[None, :]
        np.fill_diagonal(dx, 1.0)
        P = w[None, :] / dx
        np.fill_diagonal(P, 0.0)
        P[np.diag_indices(n)] = -P.sum(axis=1) + np.log(x / (self.omega_max - x))
        P -= w[:, None] * local_derivative_matrix(x)
        return P

    def __repr__(self) -> str:
        return f"EnergyGrid(n={self.n}, omega_max={self.omega_max}, mapping={self.mapping!r})"


def build_grid(n: int, omega_max: float = 20.0, mapping: str = "sqrt") -> EnergyGrid:
    """Gauss-Legendre rule on [0, omega_max].

    With ``mapping="linear"`` the rule is exact for polynomials of degree
    2n - 1 in omega.  With ``mapping="sqrt"`` (omega = omega_max * u**2) it is
    exact for polynomials in sqrt(omega) of degree 2n - 2, hence for
    polynomials in omega of degree n - 1, and integrates sqrt(omega)-type
    threshold integrands to near machine precision.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    if not np.isfinite(omega_max) or omega_max <= 0:
        raise ValueError(f"omega_max must be positive, got {omega_max!r}")
    if mapping not in MAPPINGS:
        raise ValueError(f"unknown mapping {mapping!r}; choose from {MAPPINGS}")
    n = int(n)
    s, W = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (s + 1.0)
    W = 0.5 * W
    if mapping == "linear":
        nodes, weights = omega_max * u, omega_max * W
    else:
        nodes, weights = omega_max * u**2, 2.0 * omega_max * u * W
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return EnergyGrid(nodes=nodes, weights=weights, omega_max=float(omega_max), mapping=mapping)


def _samples(grid: EnergyGrid, f: ArrayFunc) -> np.ndarray:
    vals = f(grid.nodes) if callable(f) else np.asarray(f)
    vals = np.broadcast_to(vals, grid.nodes.shape)
    if not np.all(np.isfinite(vals)):
        raise ValueError("integrand is not finite at every node")
    return vals


def integrate(grid: EnergyGrid, f: ArrayFunc) -> complex:
    """Sum of w_i f(w_i); ``f`` is a callable or an array of node samples."""
    vals = _samples(grid, f)
    out = np.sum(grid.weights * vals)
    return complex(out) if np.iscomplexobj(out) else float(out)


def _derivative(f: Callable, x0: float) -> complex:
    h = 1e-4 * max(1.0, abs(x0))
    h = min(h, 0.25 * x0)
    return (f(x0 - 2 * h) - 8 * f(x0 - h) + 8 * f(x0 + h) - f(x0 + 2 * h)) / (12 * h)


def principal_value(grid: EnergyGrid, f: Callable, x0: float) -> complex:
    """PV int_0^omega_max f(w) / (x0 - w) dw by singularity subtraction.

    ``f`` must be a callable so that f(x0) is available off the grid.
    """
    x, w, om = grid.nodes, grid.weights, grid.omega_max
    if not (0.0 < x0 < om):
        raise ValueError(f"x0={x0} must lie strictly inside (0, {om})")
    if x0 < x[1] or x0 > x[-2]:
        warnings.warn(
            f"principal value at x0={x0} is within one node spacing of a segment end",
            LowAccuracyWarning,
            stacklevel=2,
        )
    fx0 = f(np.asarray(x0))
    fy = f(x)
    diff = x0 - x
    hit = np.abs(diff) < 1e-12 * om
    safe = np.where(hit, 1.0, diff)
    terms = np.where(hit, 0.0, (fy - fx0) / safe)
    total = np.sum(w * terms)
    if np.any(hit):
        total -= np.sum(w[hit]) * _derivative(f, x0)
    total += fx0 * np.log(x0 / (om - x0))
    total = complex(total)
    return total.real if total.imag == 0.0 else total


def boundary_value(grid: EnergyGrid, f: Callable, x0: float, side: str = "above") -> complex:
    """Limit of int f(w) / (x0 +- i eps - w) dw: PV -+ i pi f(x0) (Plemelj)."""
    sign = {"above": -1.0, "below": 1.0}[side]
    return principal_value(grid, f, x0) + sign * 1j * np.pi * complex(f(np.asarray(x0)))


def _barycentric_weights(xs: np.ndarray) -> np.ndarray:
    diff = xs[:, :, None] - xs[:, None, :]
    m = xs.shape[1]
    diff[:, np.arange(m), np.arange(m)] = 1.0
    return 1.0 / np.prod(diff, axis=2)


def _stencils(n: int, m: int) -> np.ndarray:
    """Index windows of m + 1 consecutive nodes, centred where possible."""
    m = min(m, n - 1)
    lo = np.clip(np.arange(n) - m // 2, 0, n - m - 1)
    return lo[:, None] + np.arange(m + 1)[None, :]


def local_derivative_matrix(x: np.ndarray, order: int = 8) -> np.ndarray:
    """Sparse-in-practice matrix D with (D @ f)_i ~ f'(x_i) from local Lagrange fits."""
    n = len(x)
    idx = _stencils(n, order)
    xs = x[idx]
    lam = _barycentric_weights(xs)
    pos = np.argmax(idx == np.arange(n)[:, None], axis=1)
    xi = x[:, None]
    lam_s = lam[np.arange(n), pos][:, None]
    diff = xi - xs
    diff[np.arange(n), pos] = 1.0
    rows = (lam / lam_s) / diff
    rows[np.arange(n), pos] = 0.0
    rows[np.arange(n), pos] = -rows.sum(axis=1)
    D = np.zeros((n, n))
    np.put_along_axis(D, idx, rows, axis=1)
    return D


def diagonal_limit(K: np.ndarray, x: np.ndarray, order: int = 8) -> np.ndarray:
    """Estimate K(x_i, x_i) from the off-diagonal samples K[i, j], j != i.

    Row i is interpolated at x_i through the ``order`` nearest nodes j != i.
    Used for kernels whose closed form is a removable 0/0 on the diagonal.
    """
    n = len(x)
    m = min(order, n - 1)
    offsets = np.concatenate([[d, -d] for d in range(1, n)])[: 2 * n]
    cand = np.arange(n)[:, None] + offsets[None, :]
    valid = (cand >= 0) & (cand < n)
    idx = np.empty((n, m), dtype=int)
    for i in range(n):
        idx[i] = cand[i][valid[i]][:m]
    idx.sort(axis=1)
    xs = x[idx]
    lam = _barycentric_weights(xs)
    c = lam / (x[:, None] - xs)
    vals = np.take_along_axis(K, idx, axis=1)
    return (c * vals).sum(axis=1) / c.sum(axis=1)
