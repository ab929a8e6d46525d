"""Lippmann-Schwinger vectors of the rank-one model and the "+" representation.

The outgoing generalized eigenvectors are

    <y|w+> = delta(y - w) + b(w) g(y) / (w - y + i0),   b(w) = kappa g(w) / eta(w + i0).

Products of these distributions are never formed on the grid.  Every
+-i0 denominator is split by Plemelj into a principal value (grid PV matrix)
plus a delta term that is integrated analytically.  This gives the Moller
matrix M with (M psi)_i = <w_i+|psi> for smooth psi, and closed forms for
the two kernels needed by the evolution:

    F_O(w, w')  = <w+|O|w'+> - O_w delta(w - w')      (fluctuating kernel)
    R_o(y, y')  = <y|o(H)|y'> - o(y) delta(y - y')     (invariant part o(H))
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .functionals import ObservableKernel, StateFunctional
from .grid import diagonal_limit
from .model import ScatteringModel

logger = logging.getLogger(__name__)

THRESHOLD_NODES = 2


@dataclass(frozen=True)
class LSKernel:
    """|w+> in closed form: unit delta at y = w plus b g(y) / (w - y + i0).

    The regular part is stored as its principal-value function
    ``pv_part(y) = b g(y) / (w - y)`` together with the delta coefficient
    ``-i pi b g(w)`` produced by the +i0 prescription.
    """

    model: ScatteringModel
    omega: float
    index: int
    b: complex

    @property
    def delta_coefficient(self) -> complex:
        return -1j * np.pi * self.b * float(self.model.g_nodes[self.index])

    def pv_part(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.b * np.real(self.model.g(y)) / (self.omega - y)

    def discretize(self, scheme: str = "direct") -> np.ndarray:
        """Vector in the oracle basis |i> ~ sqrt(w_i) |w_i>, delta-normalized.

        ``direct`` samples the PV part at all other nodes and puts the delta
        terms, plus the PV self-cell weight that makes the node sum of
        g^2 / (w - y) equal the PV integral, on the diagonal.  This makes
        (H - w) v vanish away from the node itself.

        ``unitary`` uses the odd-offset discrete Hilbert kernel
        2 / (w - y_j) for |i - j| odd, 0 for even, which is norm-preserving at
        grid scale and so keeps the Gram matrix of the family close to the
        identity.  The two schemes agree on smooth test functions.
        """
        m = self.model
        x, w = m.grid.nodes, m.grid.weights
        i = self.index
        g = m.g_nodes
        offs = np.arange(m.grid.n) - i
        dx = self.omega - x
        dx[i] = 1.0
        if scheme == "direct":
            ker = 1.0 / dx
        elif scheme == "unitary":
            ker = np.where(offs % 2 == 1, 2.0 / dx, 0.0)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        ker[i] = 0.0
        pv_exact = (m.grid.pv_matrix @ m.rho_nodes)[i]
        self_cell = (pv_exact - np.sum(w * g**2 * ker)) / g[i] ** 2
        v = np.sqrt(w) * self.b * g * ker
        v[i] = (1.0 + self.b * g[i] * (self_cell - 1j * np.pi)) / np.sqrt(w[i])
        return v * np.sqrt(w[i])


def ls_plus(model: ScatteringModel, omega: float) -> LSKernel:
    """|w+> for an interior grid node w."""
    x = model.grid.nodes
    i = int(np.argmin(np.abs(x - omega)))
    if abs(x[i] - omega) > 1e-9 * model.omega_max:
        raise ValueError(f"w={omega} is not a grid node")
    if i == 0 or i == model.grid.n - 1:
        raise ValueError(f"w={omega} is at a segment end")
    return LSKernel(model, float(x[i]), i, complex(model.b_nodes[i]))


def moller_matrix(model: ScatteringModel) -> np.ndarray:
    """M with (M psi)_i = <w_i+|psi> = psi_i + a_i [PV + i pi](g psi)(w_i)."""
    g = model.g_nodes
    a = model.a_nodes
    P = model.grid.pv_matrix
    n = model.grid.n
    return np.eye(n) + a[:, None] * (P * g[None, :] + 1j * np.pi * np.diag(g))


def synthesis_matrix(model: ScatteringModel) -> np.ndarray:
    """S with (S s)(y) = int dw s(w) <y|w+> for smooth coefficient samples s."""
    g = model.g_nodes
    b = model.b_nodes
    P = model.grid.pv_matrix
    n = model.grid.n
    return np.eye(n) - g[:, None] * ((P + 1j * np.pi * np.eye(n)) * b[None, :])


@dataclass(frozen=True, eq=False)
class PlusRepresentation:
    """c(w) = (rho||w+><w+|) and c(w, w') = (rho||w+><w'+|) on the grid."""

    model: ScatteringModel
    c_diag: np.ndarray
    c_off: np.ndarray
    low_accuracy_nodes: tuple = ()

    @property
    def trace(self) -> float:
        return float(np.sum(self.model.grid.weights * self.c_diag))


def to_plus_representation(model: ScatteringModel, rho: StateFunctional) -> PlusRepresentation:
    """Transform (d, k) into the outgoing basis.

    With K = M k M^dag the regular-regular, delta-regular and regular-delta
    terms are the entries of K; the delta-delta term is rho's own diagonal
    density, so c(w) = d + diag(K) - diag(k) and c(w, w') = conj(K).
    """
    M = moller_matrix(model)
    K = M @ rho.k @ M.conj().T
    K = 0.5 * (K + K.conj().T)
    c_diag = rho.d + np.real(np.diag(K)) - np.real(np.diag(rho.k))
    c_off = np.conj(K)
    return PlusRepresentation(model, c_diag, c_off, tuple(range(THRESHOLD_NODES)))


def _diag_fluctuation(model: ScatteringModel, o: np.ndarray) -> np.ndarray:
    """Regular part of <w+|o(H0)|w'+> in closed form.

    For w != w' it equals [a(w) U(w') - b(w') W(w)] / (w - w') with
    U = o g + b C+, W = o g + a C-, C+- = PV(o g^2) -+ i pi o g^2.
    The diagonal is the removable limit, taken by local interpolation.
    """
    x = model.grid.nodes
    g, a, b = model.g_nodes, model.a_nodes, model.b_nodes
    f = o * g**2
    pv = model.grid.pv_matrix @ f
    Cp = pv - 1j * np.pi * f
    Cm = pv + 1j * np.pi * f
    U = o * g + b * Cp
    W = o * g + a * Cm
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    F = (a[:, None] * U[None, :] - b[None, :] * W[:, None]) / dx
    np.fill_diagonal(F, 0.0)
    F[np.diag_indices(len(x))] = diagonal_limit(F, x)
    return F


def fluctuating_kernel(model: ScatteringModel, obs: ObservableKernel) -> np.ndarray:
    """F_O(w_i, w_j) = <w_i+|O_fluc|w_j+>; vanishes for O = I and O = H."""
    M = moller_matrix(model)
    F = _diag_fluctuation(model, obs.diag) + M @ obs.reg @ M.conj().T
    return 0.5 * (F + F.conj().T)


def invariant_regular_kernel(model: ScatteringModel, o: np.ndarray) -> np.ndarray:
    """Regular part R_o of o(H) = int o(w) |w+><w+| dw in the free basis.

    For y != y':  kappa g g' / (y - y') * [o(y)/eta-(y) - o(y')/eta+(y')
                                           + kappa (D+(y) - D-(y'))]
    with D+-(y) = int h(w) / (w - y +- i0) dw and h = o |g|^2 / |eta+|^2.
    R_1 = 0 is the completeness of the outgoing family; R_w = kappa g g'.
    """
    x = model.grid.nodes
    g = model.g_nodes
    ep = model.eta_plus_nodes
    em = np.conj(ep)
    kap = model.coupling
    h = o * model.rho_nodes / np.abs(ep) ** 2
    pvh = model.grid.pv_matrix @ h
    Dp = -pvh - 1j * np.pi * h
    Dm = -pvh + 1j * np.pi * h
    Lft = o / em + kap * Dp
    Rgt = o / ep + kap * Dm
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    R = kap * np.outer(g, g) * (Lft[:, None] - Rgt[None, :]) / dx
    np.fill_diagonal(R, 0.0)
    R[np.diag_indices(len(x))] = diagonal_limit(R, x)
    return 0.5 * (R + R.conj().T)


def split_observable(model: ScatteringModel, obs: ObservableKernel):
    """O = O_inv + O_fluc with O_inv = o(H) and O_fluc free of diagonal singularity."""
    R = invariant_regular_kernel(model, obs.diag)
    o_inv = ObservableKernel(model.grid, obs.diag.copy(), R, f"{obs.name}[inv]")
    o_fluc = ObservableKernel(model.grid, np.zeros(model.grid.n), obs.reg - R, f"{obs.name}[fluc]")
    return o_inv, o_fluc


def ls_gram(model: ScatteringModel, scheme: str = "unitary", indices=None) -> np.ndarray:
    """Oracle Gram matrix <w_i+|w_j+> of the discretized family (delta-normalized)."""
    n = model.grid.n
    idx = range(1, n - 1) if indices is None else indices
    V = np.stack([ls_plus(model, model.grid.nodes[i]).discretize(scheme) for i in idx], axis=1)
    return V.conj().T @ V


def completeness_matrix(model: ScatteringModel) -> np.ndarray:
    """Oracle matrix of sum_i w_i |w_i+><w_i+| with delta factors integrated analytically."""
    sw = np.sqrt(model.grid.weights)
    R = invariant_regular_kernel(model, np.ones(model.grid.n))
    return np.eye(model.grid.n) + sw[:, None] * R * sw[None, :]
