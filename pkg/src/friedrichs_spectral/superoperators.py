"""Projector-partitioned resolvent of the Liouvillian on finite matrices.

Matrices O (n x n) are vectorized column-major, so the Liouvillian
L: O -> [H, O] becomes the n^2 x n^2 matrix kron(I, H) - kron(H^T, I).
With a pair of complementary projectors P + Q = I the resolvent splits as

    (L - z)^-1 = [P + C(z)] (PLP + Psi(z) - z)^-1_P [P + D(z)] + (QLQ - z)^-1_Q Q
    Psi(z) = -PLQ (QLQ - z)^-1_Q QLP
    C(z)   = -(QLQ - z)^-1_Q QLP
    D(z)   = -PLQ (QLQ - z)^-1_Q

where (A)^-1_P denotes the inverse of A restricted to the range of P.  The
dual form for (L^dag + z)^-1 is assembled the same way.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

COND_LIMIT = 1e12


class IllConditionedError(np.linalg.LinAlgError):
    pass


def vec(O: np.ndarray) -> np.ndarray:
    return np.asarray(O).reshape(-1, order="F")


def unvec(v: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(v).reshape((n, n), order="F")


@dataclass(frozen=True, eq=False)
class FiniteLiouvillian:
    hamiltonian: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.hamiltonian, dtype=complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError("hamiltonian must be square")
        if np.max(np.abs(H - H.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(H))):
            raise ValueError("hamiltonian must be Hermitian")
        object.__setattr__(self, "hamiltonian", H)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @cached_property
    def matrix(self) -> np.ndarray:
        """n^2 x n^2 matrix of O -> [H, O] (also the matrix of L^dag)."""
        H = self.hamiltonian
        I = np.eye(self.dim)
        return np.kron(I, H) - np.kron(H.T, I)

    def __call__(self, O: np.ndarray) -> np.ndarray:
        return apply_Ldag(self, O)


def apply_Ldag(L: FiniteLiouvillian, O: np.ndarray) -> np.ndarray:
    O = np.asarray(O)
    if O.shape != (L.dim, L.dim):
        raise ValueError(f"shape mismatch: {O.shape} vs ({L.dim}, {L.dim})")
    H = L.hamiltonian
    return H @ O - O @ H


@dataclass(frozen=True, eq=False)
class ProjectorPair:
    """Orthogonal projectors P, Q = I - P on vectorized n x n matrices."""

    P: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=complex)
        if np.max(np.abs(P @ P - P)) > 1e-12:
            raise ValueError("P is not idempotent")
        object.__setattr__(self, "P", P)

    @cached_property
    def Q(self) -> np.ndarray:
        return np.eye(self.P.shape[0]) - self.P

    @cached_property
    def p_basis(self) -> np.ndarray:
        return _range_basis(self.P)

    @cached_property
    def q_basis(self) -> np.ndarray:
        return _range_basis(self.Q)

    def apply_P(self, O: np.ndarray) -> np.ndarray:
        n = O.shape[0]
        return unvec(self.P @ vec(O), n)

    def apply_Q(self, O: np.ndarray) -> np.ndarray:
        n = O.shape[0]
        return unvec(self.Q @ vec(O), n)


def _range_basis(M: np.ndarray) -> np.ndarray:
    u, s, _ = np.linalg.svd(M)
    r = int(np.sum(s > 0.5))
    return u[:, :r]


def diagonal_projectors(n: int) -> ProjectorPair:
    """P extracts the matrix diagonal; Q keeps the off-diagonal entries."""
    mask = vec(np.eye(n)).real
    return ProjectorPair(np.diag(mask).astype(complex))


def restricted_inverse(A: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Inverse of A on range(basis), extended by zero on the complement."""
    if basis.shape[1] == 0:
        return np.zeros_like(A)
    block = basis.conj().T @ A @ basis
    cond = np.linalg.cond(block)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedError(f"restricted block is ill-conditioned (cond={cond:.2e})")
    return basis @ np.linalg.solve(block, basis.conj().T)


@dataclass(frozen=True)
class PartitionBlocks:
    collision: np.ndarray
    creation: np.ndarray
    destruction: np.ndarray
    q_resolvent: np.ndarray


def partition_blocks(L: FiniteLiouvillian, proj: ProjectorPair, z: complex) -> PartitionBlocks:
    """Psi(z), C(z), D(z) and (QLQ - z)^-1_Q for the state-side Liouvillian."""
    Lm, P, Q = L.matrix, proj.P, proj.Q
    Id = np.eye(Lm.shape[0])
    RQ = restricted_inverse(Q @ Lm @ Q - z * Id, proj.q_basis)
    psi = -P @ Lm @ Q @ RQ @ Q @ Lm @ P
    C = -RQ @ Q @ Lm @ P
    D = -P @ Lm @ Q @ RQ
    return PartitionBlocks(psi, C, D, RQ)


def collision(L: FiniteLiouvillian, proj: ProjectorPair, z: complex) -> np.ndarray:
    """Observable-side collision superoperator -P L Q (Q L Q + z)^-1_Q Q L P."""
    if np.imag(z) == 0:
        raise ValueError("collision needs Im z != 0")
    Lm, P, Q = L.matrix, proj.P, proj.Q
    Id = np.eye(Lm.shape[0])
    RQ = restricted_inverse(Q @ Lm @ Q + z * Id, proj.q_basis)
    return -P @ Lm @ Q @ RQ @ Q @ Lm @ P


def verify_resolvent_partition(L: FiniteLiouvillian, proj: ProjectorPair, z: complex,
                               dual: bool = False) -> float:
    """Spectral-norm residual between the partitioned and the direct resolvent.

    ``dual=False`` checks (L - z)^-1; ``dual=True`` checks (L^dag + z)^-1
    assembled from the observable-side blocks.
    """
    if np.imag(z) == 0:
        raise ValueError("z must be off the real axis")
    Lm, P, Q = L.matrix, proj.P, proj.Q
    Id = np.eye(Lm.shape[0])
    if not dual:
        direct = np.linalg.inv(Lm - z * Id)
        blocks = partition_blocks(L, proj, z)
        RP = restricted_inverse(P @ Lm @ P + blocks.collision - z * Id, proj.p_basis)
        rhs = (P + blocks.creation) @ RP @ (P + blocks.destruction) + blocks.q_resolvent @ Q
    else:
        Ld = Lm.conj().T
        direct = np.linalg.inv(Ld + z * Id)
        RQ = restricted_inverse(Q @ Ld @ Q + z * Id, proj.q_basis)
        psi = -P @ Ld @ Q @ RQ @ Q @ Ld @ P
        Cd = -P @ Ld @ Q @ RQ
        Dd = -RQ @ Q @ Ld @ P
        RP = restricted_inverse(P @ Ld @ P + psi + z * Id, proj.p_basis)
        rhs = (P + Dd) @ RP @ (P + Cd) + Q @ RQ
    return float(np.linalg.norm(rhs - direct, 2))


def support_defects(L: FiniteLiouvillian, proj: ProjectorPair, z: complex) -> dict:
    """How far Psi, C, D are from P Psi P, Q C P and P D Q."""
    b = partition_blocks(L, proj, z)
    P, Q = proj.P, proj.Q
    return {
        "collision": float(np.max(np.abs(b.collision - P @ b.collision @ P))),
        "creation": float(np.max(np.abs(b.creation - Q @ b.creation @ P))),
        "destruction": float(np.max(np.abs(b.destruction - P @ b.destruction @ Q))),
    }


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (A + A.conj().T)


def diagonal_commutator_defect(H: np.ndarray, diag_values: np.ndarray) -> float:
    """max |diag([H, diag(o)])|; identically zero for any H."""
    C = H @ np.diag(diag_values) - np.diag(diag_values) @ H
    return float(np.max(np.abs(np.diag(C))))


def relative_diagonal_norm(H: np.ndarray, O: np.ndarray, weights: np.ndarray) -> float:
    """max_i |diag([H, O])_i| over the largest delta-normalized off-diagonal entry.

    Off-diagonal entries of [H, O] are divided by sqrt(w_i w_j) so that both
    numerator and denominator compare kernel values, not matrix entries.
    The continuum statement P^dag L^dag = 0 corresponds to this ratio
    shrinking like max w_i under refinement.
    """
    C = H @ O - O @ H
    sw = np.sqrt(weights)
    off = C / np.outer(sw, sw)
    np.fill_diagonal(off, 0.0)
    return float(np.max(np.abs(np.diag(C))) / np.max(np.abs(off)))


def partition_suite(n_instances: int = 20, dims=range(2, 9), seed: int = 0) -> list:
    """Random (H, z) instances of the partition identity; returns residual records."""
    rng = np.random.default_rng(seed)
    dims = list(dims)
    out = []
    for i in range(n_instances):
        n = dims[i % len(dims)]
        H = random_hermitian(n, rng)
        z = complex(rng.normal(), rng.uniform(0.2, 2.0) * rng.choice([-1, 1]))
        L = FiniteLiouvillian(H)
        proj = diagonal_projectors(n)
        out.append({
            "n": n,
            "z": z,
            "residual": verify_resolvent_partition(L, proj, z),
            "dual_residual": verify_resolvent_partition(L, proj, z, dual=True),
        })
    return out
