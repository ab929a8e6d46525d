"""Real and complex spectral families of the Liouvillian.

Real family.  Right elements are |w+><w+| and |w+><w'+|.  Their left duals
act on an observable O as

    (Phi~_w | O)     = O_w                      (singular diagonal of O)
    (Phi~_ww' | O)   = F_O(w, w')               (fluctuating kernel)

so the invariant part of O is int O_w |w+><w+| dw and everything else is
carried by the Phi_ww' with eigenvalue w - w' of L.

Complex family.  For states and observables with analytic continuations the
(w, w') double integral of the evolution is deformed: w onto a ray in the
upper half plane, w' onto its mirror.  Crossing the second-sheet pole z0 of
b(w') and z0* of a(w) leaves residue terms, giving

    (rho_t|O) = invariant + Gamov-Gamov e^{i(z0* - z0)t}
                + Gamov-background + background-Gamov + background-background.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .functionals import (AnalyticObservable, AnalyticWavefunction, ObservableKernel,
                          identity_observable, hamiltonian_observable)
from .model import PoleNotFoundError, ScatteringModel
from .scattering import (PlusRepresentation, _diag_fluctuation, fluctuating_kernel, invariant_regular_kernel,
                         ls_plus, moller_matrix, synthesis_matrix, to_plus_representation)

logger = logging.getLogger(__name__)


class AnalyticityError(ValueError):
    """A continuation needed by the complex decomposition is singular on the deformation region."""

    def __init__(self, message: str, poles=()):
        super().__init__(message)
        self.poles = tuple(poles)


class NoResonanceError(PoleNotFoundError):
    pass


# real family

class RealSpectralFamily:
    """Biorthogonal pair (Phi, Phi~) on the grid."""

    def __init__(self, model: ScatteringModel):
        self.model = model
        self.grid = model.grid

    def right(self, omega: float):
        """|w+> as a closed-form LS kernel; Phi_w = |w+><w+|."""
        return ls_plus(self.model, omega)

    @cached_property
    def analysis_matrix(self) -> np.ndarray:
        return moller_matrix(self.model)

    @cached_property
    def synthesis_matrix(self) -> np.ndarray:
        return synthesis_matrix(self.model)

    def left_diag(self, obs: ObservableKernel) -> np.ndarray:
        return obs.diag.copy()

    def left_off(self, obs: ObservableKernel) -> np.ndarray:
        return fluctuating_kernel(self.model, obs)

    def analyze(self, obs: ObservableKernel):
        return self.left_diag(obs), self.left_off(obs)

    def synthesize(self, diag, off, name: str = "synthesized") -> ObservableKernel:
        """int A(w) Phi_w dw + int int B(w, w') Phi_ww' dw dw' as a free-basis kernel."""
        diag = np.real(np.asarray(diag, dtype=float))
        S = self.synthesis_matrix
        reg = invariant_regular_kernel(self.model, diag) + S @ np.asarray(off) @ S.conj().T
        reg = 0.5 * (reg + reg.conj().T)
        return ObservableKernel(self.grid, diag, reg, name)

    def labels(self) -> np.ndarray:
        """Eigenvalues w - w' of L carried by Phi_ww'."""
        x = self.grid.nodes
        return x[:, None] - x[None, :]


def real_family(model: ScatteringModel) -> RealSpectralFamily:
    return RealSpectralFamily(model)


def interior_nodes(model: ScatteringModel, lo: float = 1.0, hi: float | None = None) -> np.ndarray:
    """Mask of nodes away from threshold and cutoff, where quadrature errors are smallest."""
    x = model.grid.nodes
    hi = 0.75 * model.omega_max if hi is None else hi
    return (x > lo) & (x < hi)


def biorthogonality_defects(family: RealSpectralFamily, probes) -> dict:
    """Analysis after synthesis on smooth coefficient functions.

    ``probes`` is an iterable of (A, B) node samples, B not necessarily
    Hermitian.  Returns the largest relative interior error of each pairing
    (Phi~_w|Phi_y), (Phi~_w|Phi_yy'), (Phi~_ww'|Phi_y), (Phi~_ww'|Phi_yy')
    tested against A and B, i.e. the delta-normalized biorthogonality.
    """
    model = family.model
    M, S = family.analysis_matrix, family.synthesis_matrix
    m = interior_nodes(model)
    sel = np.ix_(m, m)
    worst = {"diag_diag": 0.0, "off_off": 0.0, "diag_off": 0.0, "off_diag": 0.0}
    for A, B in probes:
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=complex)
        sa = max(np.max(np.abs(A[m])), 1e-300)
        sb = max(np.max(np.abs(B[sel])), 1e-300)
        # int A Phi_w has singular diagonal A and regular part R_A
        off_from_diag = _diag_fluctuation(model, A) + M @ invariant_regular_kernel(model, A) @ M.conj().T
        # int int B Phi_ww' has no singular diagonal
        off_from_off = M @ S @ B @ S.conj().T @ M.conj().T
        worst["diag_diag"] = max(worst["diag_diag"], 0.0)
        worst["diag_off"] = max(worst["diag_off"], 0.0)
        worst["off_diag"] = max(worst["off_diag"], np.max(np.abs(off_from_diag[sel])) / sa)
        worst["off_off"] = max(worst["off_off"], np.max(np.abs(off_from_off - B)[sel]) / sb)
    return {k: float(v) for k, v in worst.items()}


def resolution_defect(family: RealSpectralFamily, obs: ObservableKernel) -> float:
    """Relative interior error of O rebuilt from its components along the family."""
    rebuilt = family.synthesize(*family.analyze(obs))
    m = interior_nodes(family.model)
    sel = np.ix_(m, m)
    scale = max(np.max(np.abs(obs.reg[sel])), np.max(np.abs(obs.diag[m])))
    return float(max(np.max(np.abs(rebuilt.reg - obs.reg)[sel]),
                     np.max(np.abs(rebuilt.diag - obs.diag)[m])) / scale)


def boundary_fluctuation(model: ScatteringModel, obs: AnalyticObservable, omega, omega_p):
    """F_O(w, w') at arbitrary interior energies from closed-form boundary values."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    omega_p = np.atleast_1d(np.asarray(omega_p, dtype=float))
    if np.any(omega == omega_p):
        raise ValueError("boundary_fluctuation needs w != w'")
    kap = model.coupling
    pv = model.quad.principal_value
    g = lambda z: np.real(model.g(np.asarray(z, dtype=complex)))
    rho = lambda z: g(z) ** 2
    o = lambda z: np.real(np.broadcast_to(obs.diag(np.asarray(z, dtype=complex)), np.shape(z)))

    def coeffs(x, side):
        eta = model.eta_boundary(x, side)
        return kap * g(x) / eta

    a = coeffs(omega, "below")
    b = coeffs(omega_p, "above")
    orho = lambda y: o(y) * rho(y)
    W = o(omega) * g(omega) + a * (pv(orho, omega) + 1j * np.pi * orho(omega))
    U = o(omega_p) * g(omega_p) + b * (pv(orho, omega_p) - 1j * np.pi * orho(omega_p))
    F = (a[:, None] * U[None, :] - b[None, :] * W[:, None]) / (omega[:, None] - omega_p[None, :])
    for coef, left, right in obs.terms:
        hl = lambda y, f=left: np.real(f(np.asarray(y, dtype=complex)))
        hr = lambda y, f=right: np.real(f(np.asarray(y, dtype=complex)))
        gl = lambda y, f=hl: g(y) * f(y)
        gr = lambda y, f=hr: g(y) * f(y)
        L = hl(omega) + a * (pv(gl, omega) + 1j * np.pi * gl(omega))
        R = hr(omega_p) + b * (pv(gr, omega_p) - 1j * np.pi * gr(omega_p))
        F = F + coef * np.outer(L, R)
    return F


@dataclass
class EnergyTraceTable:
    rows: list = field(default_factory=list)

    def add(self, name: str, residual: float, tolerance: float):
        self.rows.append((name, float(residual), float(tolerance), bool(residual <= tolerance)))

    @property
    def passed(self) -> bool:
        return all(r[3] for r in self.rows)

    def as_dict(self) -> dict:
        return {r[0]: r[1] for r in self.rows}


def phi_energy_trace(model: ScatteringModel, tolerance: float = 5e-3) -> EnergyTraceTable:
    """(Phi~_w|H) = w, (Phi~_w|I) = 1, (Phi~_ww'|H) = 0, (Phi~_ww'|I) = 0.

    The zero identities are checked on the whole interior grid and pointwise at
    (w, w') = (3, 7) with closed-form boundary values; (Phi~_5|I) = 1 is
    checked the same way.
    """
    fam = RealSpectralFamily(model)
    H_an = hamiltonian_observable(model)
    I_an = identity_observable()
    H = H_an.kernel(model.grid)
    I = I_an.kernel(model.grid)
    x = model.grid.nodes
    m = interior_nodes(model)
    sel = np.ix_(m, m)
    table = EnergyTraceTable()
    table.add("phi_w_H_equals_w", np.max(np.abs(fam.left_diag(H) - x)), tolerance)
    table.add("phi_w_I_equals_1", np.max(np.abs(fam.left_diag(I) - 1.0)), tolerance)
    table.add("phi_ww_H_zero_grid", np.max(np.abs(fam.left_off(H)[sel])), tolerance)
    table.add("phi_ww_I_zero_grid", np.max(np.abs(fam.left_off(I)[sel])), tolerance)
    table.add("phi_5_I_equals_1", abs(np.real(I_an.diag(np.asarray(5.0 + 0j))) - 1.0), tolerance)
    table.add("phi_3_7_H_zero", float(np.abs(boundary_fluctuation(model, H_an, 3.0, 7.0))[0, 0]), tolerance)
    table.add("phi_3_7_I_zero", float(np.abs(boundary_fluctuation(model, I_an, 3.0, 7.0))[0, 0]), tolerance)
    return table


# complex family

@dataclass(frozen=True)
class DeformationPath:
    """Ray at angle theta out to radius omega_max, closed back to omega_max by an arc.

    theta > 0 for the upper path used by w, theta < 0 for the lower path used by w'.
    Integrals along the path run from 0 to omega_max like the real segment.
    """

    theta: float
    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def build(cls, theta: float, omega_max: float, n_ray: int = 120, n_arc: int = 80) -> "DeformationPath":
        s, W = np.polynomial.legendre.leggauss(n_ray)
        s, W = 0.5 * (s + 1.0), 0.5 * W
        e = np.exp(1j * theta)
        zr = omega_max * s**4 * e
        wr = 4.0 * omega_max * s**3 * W * e
        s, W = np.polynomial.legendre.leggauss(n_arc)
        s, W = 0.5 * (s + 1.0), 0.5 * W
        za = omega_max * np.exp(1j * theta * s**2)
        # arc runs from angle theta back to 0
        wa = -(1j * za * theta * 2.0 * s * W)
        return cls(theta, np.concatenate([zr, za]), np.concatenate([wr, wa]))

    def encloses(self, z: complex, omega_max: float) -> bool:
        """True if z lies between the real segment and this path."""
        z = complex(z)
        if abs(z) > omega_max or z == 0:
            return False
        arg = np.angle(z)
        if self.theta > 0:
            return 0.0 <= arg <= self.theta
        return self.theta <= arg <= 0.0


@dataclass(frozen=True)
class ComplexConfig:
    theta: float = 3 * np.pi / 4
    n_ray: int = 120
    n_arc: int = 80


@dataclass
class ComplexSpectralFamily:
    """Gamov pair data and the deformed background for one model.

    ``factor_right`` and ``factor_left`` are the principal square roots of
    -2 pi i (Res S)_{z0}; only their product enters any pairing.
    """

    model: ScatteringModel
    z0: complex
    s_residue: complex
    b_residue: complex
    a_residue: complex
    factor_right: complex
    factor_left: complex
    upper: DeformationPath
    lower: DeformationPath

    @property
    def decay_rate(self) -> float:
        return float(2.0 * abs(self.z0.imag))

    @property
    def gamov_label(self) -> complex:
        return np.conj(self.z0) - self.z0

    def eigenvalue_labels(self, omega, omega_p) -> dict:
        z0 = self.z0
        return {"00": np.conj(z0) - z0, "0w'": np.conj(z0) - omega_p, "w0": omega - z0,
                "ww'": omega - omega_p}

    def residue_factor_product(self) -> complex:
        return self.factor_right * self.factor_left


def gamov_vectors(model: ScatteringModel, config: ComplexConfig = ComplexConfig()) -> ComplexSpectralFamily:
    if model.coupling == 0:
        raise NoResonanceError("no resonance: coupling is zero")
    try:
        z0 = model.find_pole()
    except PoleNotFoundError as exc:
        raise NoResonanceError(f"no resonance: {exc}") from exc
    upper = DeformationPath.build(config.theta, model.omega_max, config.n_ray, config.n_arc)
    lower = DeformationPath.build(-config.theta, model.omega_max, config.n_ray, config.n_arc)
    if not lower.encloses(z0, model.omega_max):
        raise AnalyticityError(f"deformation angle {config.theta:.4g} does not enclose z0={z0}", (z0,))
    res_s = model.s_residue()
    res_b = model.b_residue()
    f = np.sqrt(complex(-2j * np.pi * res_s))
    return ComplexSpectralFamily(model, z0, res_s, res_b, np.conj(res_b), f, f, upper, lower)


class ComplexDecomposition:
    """Five-term decomposition of (rho_t|O) for a pure analytic state."""

    def __init__(self, model: ScatteringModel, wavefunction: AnalyticWavefunction,
                 config: ComplexConfig = ComplexConfig(), rep: PlusRepresentation | None = None):
        if not isinstance(wavefunction, AnalyticWavefunction):
            raise AnalyticityError("state has no analytic continuation (sampled input)")
        self.model = model
        self.config = config
        self.phi = wavefunction.normalized(model.grid)
        self.upper = DeformationPath.build(config.theta, model.omega_max, config.n_ray, config.n_arc)
        self.lower = DeformationPath.build(-config.theta, model.omega_max, config.n_ray, config.n_arc)
        self._check_poles("state", wavefunction.poles)
        self._check_poles("form factor", model.form_factor.poles)
        self.family = None
        if model.coupling > 0:
            try:
                self.family = gamov_vectors(model, config)
            except NoResonanceError:
                logger.info("no resonance found; background terms only")
        if rep is None:
            rep = to_plus_representation(model, from_wavefunction_samples(model, self.phi))
        self.rep = rep
        self._cache: dict = {}
        kap = model.coupling
        zp, zm = self.upper.points, self.lower.points
        self.a_path = kap * self._G(zp) / model.eta_second_sheet_upper(zp) if kap else np.zeros_like(zp)
        self.b_path = kap * self._G(zm) / model.eta_second_sheet(zm) if kap else np.zeros_like(zm)

    def _G(self, z):
        return self.model.g(np.asarray(z, dtype=complex))

    def _check_poles(self, what: str, poles):
        om = self.model.omega_max
        bad = [p for p in poles if self.upper.encloses(p, om) or self.lower.encloses(p, om)]
        if bad:
            raise AnalyticityError(
                f"{what} continuation has poles {bad} inside the deformation region "
                f"(angle {self.config.theta:.4g})", bad)

    # continued functions
    def _c(self, z):
        m = self.model
        G, phi = self._G, self.phi.func
        if m.coupling == 0:
            return phi(z)
        return phi(z) + m.coupling * G(z) / m._eta_unchecked(z) * m.cauchy(lambda y: G(y) * phi(y), z)

    def _left(self, z, obs: AnalyticObservable, a):
        m, G = self.model, self._G
        o = lambda y: np.broadcast_to(obs.diag(y), np.shape(y))
        rho = lambda y: G(y) ** 2
        C = m.cauchy(lambda y: o(y) * rho(y), z) + 2j * np.pi * o(z) * rho(z)
        W = o(z) * G(z) + a * C
        Ls = [h(z) + a * (m.cauchy(lambda y, h=h: G(y) * h(y), z) + 2j * np.pi * G(z) * h(z))
              for _, h, _ in obs.terms]
        return W, Ls

    def _right(self, z, obs: AnalyticObservable, b):
        m, G = self.model, self._G
        o = lambda y: np.broadcast_to(obs.diag(y), np.shape(y))
        rho = lambda y: G(y) ** 2
        C = m.cauchy(lambda y: o(y) * rho(y), z) - 2j * np.pi * o(z) * rho(z)
        U = o(z) * G(z) + b * C
        Rs = [h(z) + b * (m.cauchy(lambda y, h=h: G(y) * h(y), z) - 2j * np.pi * G(z) * h(z))
              for _, _, h in obs.terms]
        return U, Rs

    def _kernel(self, zl, zr, obs, a, b):
        W, Ls = self._left(zl, obs, a)
        U, Rs = self._right(zr, obs, b)
        F = (a[:, None] * U[None, :] - b[None, :] * W[:, None]) / (zl[:, None] - zr[None, :])
        for (coef, _, _), L, R in zip(obs.terms, Ls, Rs):
            F = F + coef * np.outer(L, R)
        return F

    def _pieces(self, obs: AnalyticObservable) -> dict:
        key = id(obs)
        if key in self._cache:
            return self._cache[key][1]
        self._check_poles(f"observable {obs.name!r}", obs.poles)
        zp, zm = self.upper.points, self.lower.points
        p = {"cL": self._c(zp), "cR": self._c(zm),
             "BB": self._kernel(zp, zm, obs, self.a_path, self.b_path)}
        fam = self.family
        if fam is not None:
            one, zero = np.ones(1, complex), np.zeros(1, complex)
            Z0, Z0s = np.array([fam.z0]), np.array([np.conj(fam.z0)])
            p["w0"] = (self._kernel(zp, Z0, obs, self.a_path, one)
                       - self._kernel(zp, Z0, obs, self.a_path, zero))[:, 0]
            p["0w"] = (self._kernel(Z0s, zm, obs, one, self.b_path)
                       - self._kernel(Z0s, zm, obs, zero, self.b_path))[0]
            f = lambda A, B: self._kernel(Z0s, Z0, obs, np.array([A], complex), np.array([B], complex))[0, 0]
            p["00"] = f(1, 1) - f(1, 0) - f(0, 1) + f(0, 0)
            p["c0s"] = complex(self._c(Z0s)[0])
            p["c0"] = complex(self._c(Z0)[0])
        self._cache[key] = (obs, p)
        return p

    def psi_tilde_pairings(self, obs: AnalyticObservable) -> dict:
        """Largest |(Psi~|O)| over the path for each element type.

        The pairings are the residue coefficients of F_O, normalized by the
        residue factors of the Gamov vectors.
        """
        p = self._pieces(obs)
        out = {"ww'": float(np.max(np.abs(p["BB"])))}
        fam = self.family
        if fam is not None:
            out["w0"] = float(np.max(np.abs(p["w0"] * fam.b_residue)))
            out["0w'"] = float(np.max(np.abs(p["0w"] * fam.a_residue)))
            out["00"] = float(abs(p["00"] * fam.a_residue * fam.b_residue))
        return out

    def terms(self, obs: AnalyticObservable, t: float) -> dict:
        grid = self.model.grid
        if t < 0 or t > grid.t_max * (1 + 1e-12):
            raise ValueError(f"t={t} outside (0, T_max={grid.t_max:.6g}]")
        p = self._pieces(obs)
        zp, wp = self.upper.points, self.upper.weights
        zm, wm = self.lower.points, self.lower.weights
        o_nodes = np.real(np.broadcast_to(obs.diag(grid.nodes.astype(complex)), grid.nodes.shape))
        ep = wp * np.exp(1j * zp * t) * p["cL"]
        em = wm * np.exp(-1j * zm * t) * p["cR"]
        out = {
            "invariant": complex(np.sum(grid.weights * self.rep.c_diag * o_nodes)),
            "background_background": complex(ep @ p["BB"] @ em),
            "gamov_gamov": 0j,
            "background_gamov": 0j,
            "gamov_background": 0j,
        }
        fam = self.family
        if fam is not None:
            z0 = fam.z0
            z0s = np.conj(z0)
            out["background_gamov"] = complex(
                -2j * np.pi * np.sum(ep * p["w0"]) * fam.b_residue * p["c0"] * np.exp(-1j * z0 * t))
            out["gamov_background"] = complex(
                2j * np.pi * np.sum(em * p["0w"]) * fam.a_residue * p["c0s"] * np.exp(1j * z0s * t))
            out["gamov_gamov"] = complex(
                (2j * np.pi) * (-2j * np.pi) * fam.a_residue * fam.b_residue
                * p["c0s"] * p["c0"] * p["00"] * np.exp(1j * (z0s - z0) * t))
        out["total"] = sum(out.values())
        return out


def from_wavefunction_samples(model: ScatteringModel, wf: AnalyticWavefunction):
    return wf.state(model.grid)


def complex_evolution(model: ScatteringModel, rep: PlusRepresentation | None, obs: AnalyticObservable,
                      t: float, wavefunction: AnalyticWavefunction,
                      config: ComplexConfig = ComplexConfig()) -> dict:
    """(rho_t|O) with its five-term breakdown; see ``ComplexDecomposition``."""
    return ComplexDecomposition(model, wavefunction, config, rep).terms(obs, t)


def fit_decay_rate(times, values) -> float:
    """Slope of -log|values| against t by least squares."""
    times = np.asarray(times, dtype=float)
    logs = np.log(np.abs(np.asarray(values)))
    slope = np.polyfit(times, logs, 1)[0]
    return float(-slope)
