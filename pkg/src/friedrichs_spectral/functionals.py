"""States as functionals over observables with a diagonal singularity.

An observable on the energy half-line is stored as

    O(w, w') = O_w delta(w - w') + O_{w w'}          (diag, reg)

and a state as a pair (d, k) acting on observables through

    (rho|O) = sum_i w_i d_i O_i + sum_ij w_i w_j conj(k_ij) O_ij.

For a wavefunction phi the state is d_i = |phi_i|^2, k_ij = phi_i conj(phi_j),
so that the pairing reproduces <phi|O|phi>.  The diagonal part d is always
kept separate from the kernel k.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .grid import EnergyGrid

HERMITIAN_TOL = 1e-12


def _as_grid_vector(grid: EnergyGrid, v, name: str, dtype=float) -> np.ndarray:
    v = np.asarray(v, dtype=dtype)
    if v.shape != (grid.n,):
        raise ValueError(f"{name} must have shape ({grid.n},), got {v.shape}")
    return v


def _as_grid_matrix(grid: EnergyGrid, m, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.shape != (grid.n, grid.n):
        raise ValueError(f"{name} must have shape ({grid.n}, {grid.n}), got {m.shape}")
    return m


def _hermitian_defect(m: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    return float(np.max(np.abs(m - m.conj().T))) / scale if m.size else 0.0


@dataclass(frozen=True, eq=False)
class ObservableKernel:
    """Node samples of the singular diagonal O_w and the regular kernel O_{ww'}."""

    grid: EnergyGrid
    diag: np.ndarray
    reg: np.ndarray
    name: str = ""

    def __post_init__(self):
        diag = np.asarray(self.diag)
        if np.iscomplexobj(diag):
            if np.max(np.abs(diag.imag), initial=0.0) > HERMITIAN_TOL:
                raise ValueError("observable diagonal must be real")
            diag = diag.real
        object.__setattr__(self, "diag", _as_grid_vector(self.grid, diag, "diag"))
        reg = _as_grid_matrix(self.grid, self.reg, "reg")
        if _hermitian_defect(reg) > HERMITIAN_TOL:
            raise ValueError("observable regular kernel must be Hermitian")
        object.__setattr__(self, "reg", reg)

    def offdiagonal_part(self) -> "ObservableKernel":
        """The observable with its singular diagonal removed (Q-dual part)."""
        return replace(self, diag=np.zeros(self.grid.n), name=f"{self.name}[reg]")

    def __add__(self, other: "ObservableKernel") -> "ObservableKernel":
        _same_grid(self.grid, other.grid)
        return ObservableKernel(self.grid, self.diag + other.diag, self.reg + other.reg)

    def scaled(self, c: float) -> "ObservableKernel":
        return ObservableKernel(self.grid, c * self.diag, c * self.reg, self.name)


@dataclass(frozen=True, eq=False)
class StateFunctional:
    """Diagonal density d (singular part) and kernel k (regular part)."""

    grid: EnergyGrid
    d: np.ndarray
    k: np.ndarray
    trace_tol: float = 1e-10

    def __post_init__(self):
        d = _as_grid_vector(self.grid, self.d, "d")
        k = _as_grid_matrix(self.grid, self.k, "k")
        if np.min(d, initial=0.0) < -1e-10:
            raise ValueError("state diagonal density must be non-negative")
        tr = float(np.sum(self.grid.weights * d))
        if abs(tr - 1.0) > self.trace_tol:
            raise ValueError(f"state trace {tr!r} differs from 1 by more than {self.trace_tol}")
        if _hermitian_defect(k) > HERMITIAN_TOL:
            raise ValueError("state kernel must be Hermitian")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "k", k)

    @property
    def is_diagonal(self) -> bool:
        return not np.any(self.k)

    def purity_defect(self) -> float:
        """max_i |k_ii - d_i|; zero for states built from one wavefunction."""
        return float(np.max(np.abs(np.diag(self.k).real - self.d)))


def _same_grid(a: EnergyGrid, b: EnergyGrid):
    if a is b:
        return
    if a.n != b.n or a.omega_max != b.omega_max or not np.array_equal(a.nodes, b.nodes):
        raise ValueError("state and observable live on different grids")


def pair(rho: StateFunctional, obs: ObservableKernel) -> complex:
    """(rho|O) = sum w d O_w + sum w w conj(k) O_ww'."""
    _same_grid(rho.grid, obs.grid)
    w = rho.grid.weights
    singular = np.sum(w * rho.d * obs.diag)
    regular = np.sum(np.outer(w, w) * np.conj(rho.k) * obs.reg)
    return complex(singular + regular)


def normalize_wavefunction(grid: EnergyGrid, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=complex)
    norm2 = float(np.sum(grid.weights * np.abs(phi) ** 2))
    if not norm2 > 0:
        raise ValueError("wavefunction has zero norm")
    return phi / np.sqrt(norm2)


def from_wavefunction(grid: EnergyGrid, phi, normalize: bool = True) -> StateFunctional:
    """Pure state d = |phi|^2, k_ij = phi_i conj(phi_j)."""
    phi = _as_grid_vector(grid, phi, "phi", dtype=complex)
    if normalize:
        phi = normalize_wavefunction(grid, phi)
    elif abs(np.sum(grid.weights * np.abs(phi) ** 2) - 1.0) > 1e-8:
        raise ValueError("wavefunction is not normalized")
    d = np.abs(phi) ** 2
    k = np.outer(phi, np.conj(phi))
    return StateFunctional(grid, d, k, trace_tol=1e-10 if normalize else 1e-8)


def mixture(states: Sequence[StateFunctional], probs: Sequence[float]) -> StateFunctional:
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
        raise ValueError("mixture probabilities must be non-negative and sum to 1")
    grid = states[0].grid
    d = sum(p * s.d for p, s in zip(probs, states))
    k = sum(p * s.k for p, s in zip(probs, states))
    return StateFunctional(grid, d, k, trace_tol=1e-8)


def diagonal_state(grid: EnergyGrid, d) -> StateFunctional:
    d = _as_grid_vector(grid, d, "d")
    d = d / np.sum(grid.weights * d)
    return StateFunctional(grid, d, np.zeros((grid.n, grid.n), complex))


def time_invert(rho: StateFunctional) -> StateFunctional:
    """Antiunitary time reversal in the energy representation: k -> conj(k)."""
    return StateFunctional(rho.grid, rho.d.copy(), np.conj(rho.k), trace_tol=rho.trace_tol)


def decompose(rho: StateFunctional):
    """Split into the diagonal part P rho (k = 0) and the kernel part Q rho (d = 0).

    Q rho carries no trace and is returned as a raw (d, k) pair of arrays
    wrapped in a ``KernelPart``, since it is not itself a normalized state.
    """
    p_part = StateFunctional(rho.grid, rho.d.copy(), np.zeros_like(rho.k), trace_tol=rho.trace_tol)
    q_part = KernelPart(rho.grid, rho.k.copy())
    return p_part, q_part


@dataclass(frozen=True, eq=False)
class KernelPart:
    """Off-diagonal component of a state: d = 0, kernel k."""

    grid: EnergyGrid
    k: np.ndarray

    @property
    def d(self) -> np.ndarray:
        return np.zeros(self.grid.n)

    def pair(self, obs: ObservableKernel) -> complex:
        w = self.grid.weights
        return complex(np.sum(np.outer(w, w) * np.conj(self.k) * obs.reg))


def recompose(p_part: StateFunctional, q_part: KernelPart) -> StateFunctional:
    return StateFunctional(p_part.grid, p_part.d, p_part.k + q_part.k, trace_tol=p_part.trace_tol)


# Closed-form presets.  Each carries its analytic continuation and the
# singular points of that continuation, which the complex decomposition
# needs to decide whether a contour deformation is admissible.


@dataclass(frozen=True)
class AnalyticWavefunction:
    """phi(z) analytic off the negative real axis except at ``poles``."""

    name: str
    func: Callable
    poles: tuple = ()
    params: dict = field(default_factory=dict)

    def normalization(self, grid: EnergyGrid) -> float:
        vals = self.func(grid.nodes.astype(complex))
        return float(1.0 / np.sqrt(np.sum(grid.weights * np.abs(vals) ** 2)))

    def normalized(self, grid: EnergyGrid) -> "AnalyticWavefunction":
        c = self.normalization(grid)
        f = self.func
        return AnalyticWavefunction(self.name, lambda z: c * f(z), self.poles, dict(self.params, norm=c))

    def samples(self, grid: EnergyGrid) -> np.ndarray:
        return self.func(grid.nodes.astype(complex))

    def state(self, grid: EnergyGrid) -> StateFunctional:
        return from_wavefunction(grid, self.samples(grid))


def lorentzian_packet(center: float = 2.0, width: float = 1.0) -> AnalyticWavefunction:
    """phi(w) ~ sqrt(w) / ((w - center)^2 + width^2); poles at center +- i width."""

    def f(z):
        z = np.asarray(z, dtype=complex)
        return np.sqrt(z) / ((z - center) ** 2 + width**2)

    poles = (complex(center, width), complex(center, -width))
    return AnalyticWavefunction("lorentzian_packet", f, poles, {"center": center, "width": width})


def threshold_packet(scale: float = 1.0) -> AnalyticWavefunction:
    """phi(w) ~ sqrt(w) / (scale + w)^2; only singular point off the cut is -scale."""

    def f(z):
        z = np.asarray(z, dtype=complex)
        return np.sqrt(z) / (scale + z) ** 2

    return AnalyticWavefunction("threshold_packet", f, (complex(-scale, 0.0),), {"scale": scale})


STATE_PRESETS = {
    "lorentzian_packet": lorentzian_packet,
    "threshold_packet": threshold_packet,
}
DEFAULT_STATE = "lorentzian_packet"


def make_state_preset(name: str, **params) -> AnalyticWavefunction:
    try:
        factory = STATE_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown state preset {name!r}; known: {sorted(STATE_PRESETS)}") from None
    return factory(**params)


@dataclass(frozen=True)
class AnalyticObservable:
    """O = diag(w) delta + sum_t c_t left_t(w) right_t(w').

    ``diag``, ``left_t`` and ``right_t`` are real on the positive axis and
    analytic off the negative real axis except at ``poles``.
    """

    name: str
    diag: Callable
    terms: tuple = ()
    poles: tuple = ()

    def kernel(self, grid: EnergyGrid) -> ObservableKernel:
        x = grid.nodes
        diag = np.real(np.asarray(self.diag(x.astype(complex)), dtype=complex))
        diag = np.broadcast_to(diag, x.shape).copy()
        reg = np.zeros((grid.n, grid.n), complex)
        for c, left, right in self.terms:
            reg += c * np.outer(np.real(left(x.astype(complex))), np.real(right(x.astype(complex))))
        return ObservableKernel(grid, diag, reg, self.name)

    def offdiagonal_part(self) -> "AnalyticObservable":
        return AnalyticObservable(f"{self.name}[reg]", _zero, self.terms, self.poles)


def _zero(z):
    return np.zeros_like(np.asarray(z, dtype=complex))


def _one(z):
    return np.ones_like(np.asarray(z, dtype=complex))


def _h1(z):
    z = np.asarray(z, dtype=complex)
    return np.sqrt(z) / (1.0 + z) ** 2


def _h2(z):
    z = np.asarray(z, dtype=complex)
    return z / (1.0 + z) ** 3


def identity_observable() -> AnalyticObservable:
    return AnalyticObservable("identity", _one)


def hamiltonian_observable(model) -> AnalyticObservable:
    """H = w delta(w - w') + kappa g(w) g(w')."""
    g = model.g
    terms = ((model.coupling, g, g),) if model.coupling else ()
    return AnalyticObservable("hamiltonian", lambda z: np.asarray(z, dtype=complex), terms,
                              tuple(model.form_factor.poles))


def free_hamiltonian_observable() -> AnalyticObservable:
    return AnalyticObservable("free_hamiltonian", lambda z: np.asarray(z, dtype=complex))


def window_observable() -> AnalyticObservable:
    return AnalyticObservable("window", lambda z: 1.0 / (1.0 + np.asarray(z, dtype=complex)),
                              poles=(-1.0 + 0j,))


def projector_observable() -> AnalyticObservable:
    return AnalyticObservable("projector", _zero, ((1.0, _h1, _h1),), poles=(-1.0 + 0j,))


def mixed_observable() -> AnalyticObservable:
    return AnalyticObservable(
        "mixed",
        lambda z: np.asarray(z, dtype=complex) / (1.0 + np.asarray(z, dtype=complex)) ** 2,
        ((1.0, _h1, _h2), (1.0, _h2, _h1)),
        poles=(-1.0 + 0j,),
    )


def position_like_observable() -> AnalyticObservable:
    """Antisymmetric imaginary kernel i(h1 h2' - h2 h1'), like a generator of energy shifts."""
    return AnalyticObservable("position_like", _zero, ((1j, _h1, _h2), (-1j, _h2, _h1)),
                              poles=(-1.0 + 0j,))


def observable_presets(model) -> dict:
    return {
        "identity": identity_observable(),
        "hamiltonian": hamiltonian_observable(model),
        "free_hamiltonian": free_hamiltonian_observable(),
        "window": window_observable(),
        "projector": projector_observable(),
        "mixed": mixed_observable(),
        "position_like": position_like_observable(),
    }


DEFAULT_PROBES = ("window", "projector", "mixed", "position_like", "hamiltonian")
