"""Dense-matrix reference for the continuum formulas.

Basis convention: |i> ~ sqrt(w_i) |w_i>.  A regular kernel A(w, w') maps to
sqrt(w_i w_j) A(w_i, w_j) and a singular diagonal a(w) delta(w - w') maps to
delta_ij a(w_i), so the free Hamiltonian is exactly diag(w_i) and

    H_or = diag(w_i) + kappa sqrt(w_i w_j) g(w_i) g(w_j).

States map as the duals of that convention: off-diagonal entries of rho_or
are sqrt(w_i w_j) k_ij and diagonal entries are w_i d_i.  Then
Tr(rho_or O_or) equals pair(rho, O) exactly whenever k_ii = d_i (pure states
and mixtures of pure states).  For other states the two differ by
sum_i w_i^2 (d_i - k_ii) O_reg(w_i, w_i), which is O(max w).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .functionals import ObservableKernel, StateFunctional
from .model import ScatteringModel

logger = logging.getLogger(__name__)


class NearDegeneracyWarning(UserWarning):
    pass


class DiscretizedSystem:
    def __init__(self, model: ScatteringModel):
        self.model = model
        self.grid = model.grid
        sw = np.sqrt(self.grid.weights)
        self.coupling_vector = sw * model.g_nodes
        u = self.coupling_vector
        self.H = np.diag(self.grid.nodes).astype(complex) + model.coupling * np.outer(u, u)

    @cached_property
    def eig(self):
        return np.linalg.eigh(self.H)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eig[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        return self.eig[1]

    def eigenvalue_bounds(self):
        """Interval guaranteed to contain the spectrum (rank-one positive shift)."""
        u = self.coupling_vector
        x = self.grid.nodes
        return float(x[0]), float(x[-1] + self.model.coupling * np.dot(u, u))

    # mapping conventions
    def map_observable(self, obs: ObservableKernel) -> np.ndarray:
        sw = np.sqrt(self.grid.weights)
        return np.diag(obs.diag).astype(complex) + sw[:, None] * obs.reg * sw[None, :]

    def map_state(self, rho: StateFunctional) -> np.ndarray:
        sw = np.sqrt(self.grid.weights)
        R = sw[:, None] * rho.k * sw[None, :]
        R[np.diag_indices(self.grid.n)] = self.grid.weights * rho.d
        return R

    def wavefunction_vector(self, phi) -> np.ndarray:
        return np.sqrt(self.grid.weights) * np.asarray(phi, dtype=complex)

    def resolvent_apply(self, z: complex, v: np.ndarray) -> np.ndarray:
        return np.linalg.solve(z * np.eye(self.grid.n) - self.H, v)


def evolve_oracle(sys: DiscretizedSystem, rho_or: np.ndarray, t: float) -> np.ndarray:
    """exp(-iHt) rho exp(iHt) through the eigenbasis."""
    if rho_or.shape != sys.H.shape:
        raise ValueError("shape mismatch")
    E, U = sys.eig
    if t == 0:
        return rho_or.copy()
    ph = np.exp(-1j * E * t)
    Ut = (U * ph[None, :]) @ U.conj().T
    return Ut @ rho_or @ Ut.conj().T


def mean_oracle(sys: DiscretizedSystem, rho_or: np.ndarray, obs) -> complex:
    """Tr(rho_or O_or); ``obs`` is an ObservableKernel or an already mapped matrix."""
    O = sys.map_observable(obs) if isinstance(obs, ObservableKernel) else np.asarray(obs)
    return complex(np.sum(rho_or * O.T))


def mean_oracle_at(sys: DiscretizedSystem, rho_or: np.ndarray, obs, times) -> np.ndarray:
    """Tr(rho_t O) for several times using one eigenbasis rotation."""
    O = sys.map_observable(obs) if isinstance(obs, ObservableKernel) else np.asarray(obs)
    E, U = sys.eig
    r = U.conj().T @ rho_or @ U
    o = U.conj().T @ O @ U
    dE = E[:, None] - E[None, :]
    return np.array([np.sum(r * np.exp(-1j * dE * t) * o.T) for t in np.atleast_1d(times)])


def _check_degeneracy(E: np.ndarray, tol: float = 1e-10):
    gaps = np.diff(E)
    close = np.where(gaps < tol * max(1.0, np.max(np.abs(E))))[0]
    if close.size:
        warnings.warn(f"near-degenerate eigenvalue pairs at indices {close.tolist()}",
                      NearDegeneracyWarning, stacklevel=3)
    return close


def longtime_diagonal(sys: DiscretizedSystem, rho_or: np.ndarray) -> np.ndarray:
    """Free-basis diagonal density of the infinite-time average of rho_t.

    Averaging removes eigenbasis coherences, leaving
    d_i = sum_m |U_im|^2 (U^dag rho U)_mm / w_i.
    """
    E, U = sys.eig
    _check_degeneracy(E)
    pops = np.real(np.einsum("im,ij,jm->m", U.conj(), rho_or, U))
    return (np.abs(U) ** 2 @ pops) / sys.grid.weights


def spectral_density(sys: DiscretizedSystem, rho_or: np.ndarray):
    """Eigenvalues and energy density (U^dag rho U)_mm / (level spacing)."""
    E, U = sys.eig
    pops = np.real(np.einsum("im,ij,jm->m", U.conj(), rho_or, U))
    spacing = np.gradient(E)
    return E, pops / spacing
