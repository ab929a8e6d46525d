"""Rank-one scattering model H = H0 + kappa |g><g| on L2[0, omega_max].

For a rank-one potential the resolvent is carried by one scalar function

    eta(z) = 1 - kappa * int_0^omega_max |g(y)|^2 / (z - y) dy,

whose boundary values give the S-matrix S(w) = eta(w - i0) / eta(w + i0).
Continuing eta(w + i0) from above into the lower half plane gives

    eta_II(z) = eta(z) + 2 pi i kappa rho(z),   rho(z) = continuation of |g|^2,

and a zero z0 of eta_II is the resonance pole of the continued S.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .grid import EnergyGrid

logger = logging.getLogger(__name__)

# Search rectangle for the resonance: (re_min, re_max, im_min, im_max).
DEFAULT_SEARCH_RECT = (-4.0, 10.0, -4.0, -0.05)


class PoleNotFoundError(RuntimeError):
    pass


class MultiplePolesError(RuntimeError):
    pass


@dataclass(frozen=True)
class FormFactor:
    """Real non-negative form factor g(w) with an analytic continuation g(z).

    ``g`` must accept complex arrays and use the principal branch (cut on the
    negative real axis).  ``poles`` lists the singular points of g(z) off the
    branch cut.
    """

    name: str
    g: Callable[[np.ndarray], np.ndarray]
    poles: tuple = ()

    def rho(self, z):
        """Continuation of |g(w)|^2 (g real on the positive axis)."""
        return self.g(z) ** 2


def _g_default(z):
    z = np.asarray(z)
    return z**0.25 / (1.0 + z)


FORM_FACTORS = {
    "sqrt_lorentzian": FormFactor("sqrt_lorentzian", _g_default, poles=(-1.0 + 0j,)),
}
FORM_FACTORS["default"] = FORM_FACTORS["sqrt_lorentzian"]


def get_form_factor(entry) -> FormFactor:
    if isinstance(entry, FormFactor):
        return entry
    try:
        return FORM_FACTORS[entry]
    except KeyError:
        raise ValueError(f"unknown form factor {entry!r}; known: {sorted(FORM_FACTORS)}") from None


class CauchyQuadrature:
    """int_0^omega_max f(y) / (z - y) dy for analytic f, by subtraction of f(z).

    Uses y = omega_max * s**4 with Gauss-Legendre in s, so that integrands
    with y**(1/4) and y**(1/2) threshold factors become smooth.
    """

    def __init__(self, omega_max: float, n: int = 400):
        s, W = np.polynomial.legendre.leggauss(n)
        s = 0.5 * (s + 1.0)
        W = 0.5 * W
        self.omega_max = omega_max
        self.y = omega_max * s**4
        self.w = 4.0 * omega_max * s**3 * W

    def __call__(self, f: Callable, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        zf = z.reshape(-1, 1)
        fy = f(self.y.astype(complex))
        fz = f(zf)
        log_term = np.log(zf[:, 0]) - np.log(zf[:, 0] - self.omega_max)
        out = np.sum(self.w * (fy[None, :] - fz) / (zf - self.y), axis=1) + fz[:, 0] * log_term
        return out.reshape(shape)

    def principal_value(self, f: Callable, x) -> np.ndarray:
        """PV int f(y) / (x - y) dy for real x strictly inside the segment."""
        x = np.asarray(x, dtype=float)
        shape = x.shape
        xf = x.reshape(-1, 1)
        fy = f(self.y)
        fx = f(xf)
        diff = xf - self.y
        diff = np.where(diff == 0.0, np.finfo(float).tiny, diff)
        out = np.sum(self.w * (fy[None, :] - fx) / diff, axis=1)
        out = out + fx[:, 0] * np.log(xf[:, 0] / (self.omega_max - xf[:, 0]))
        return out.reshape(shape)


def _central_derivative(f: Callable, z, h: float = 1e-4):
    return (f(z - 2 * h) - 8 * f(z - h) + 8 * f(z + h) - f(z + 2 * h)) / (12 * h)


def winding_number(f: Callable, rect: Sequence[float], n_side: int = 64, max_refine: int = 8) -> int:
    """Number of zeros of analytic f inside the rectangle (argument principle).

    The boundary is sampled until successive phase increments stay below
    pi/4, then the unwrapped phase change is divided by 2 pi.
    """
    x0, x1, y0, y1 = rect
    for _ in range(max_refine):
        t = np.linspace(0.0, 1.0, n_side, endpoint=False)
        path = np.concatenate([
            x0 + (x1 - x0) * t + 1j * y0,
            x1 + 1j * (y0 + (y1 - y0) * t),
            x1 - (x1 - x0) * t + 1j * y1,
            x0 + 1j * (y1 - (y1 - y0) * t),
        ])
        vals = f(path)
        if np.any(vals == 0):
            raise ZeroDivisionError("zero on the winding contour")
        ph = np.angle(np.concatenate([vals, vals[:1]]))
        dph = np.angle(np.exp(1j * np.diff(ph)))
        if np.max(np.abs(dph)) < np.pi / 4:
            return int(np.rint(dph.sum() / (2 * np.pi)))
        n_side *= 2
    raise RuntimeError("argument-principle contour could not be resolved")


class ScatteringModel:
    """H = H0 + kappa |g><g| with H0 multiplication by w on [0, omega_max]."""

    def __init__(
        self,
        grid: EnergyGrid,
        coupling: float = 0.25,
        form_factor="default",
        search_rect: Sequence[float] = DEFAULT_SEARCH_RECT,
        cauchy_points: int = 400,
    ):
        if not np.isfinite(coupling) or coupling < 0:
            raise ValueError(f"coupling must be >= 0, got {coupling!r}")
        self.grid = grid
        self.coupling = float(coupling)
        self.form_factor = get_form_factor(form_factor)
        self.search_rect = tuple(float(v) for v in search_rect)
        self.quad = CauchyQuadrature(grid.omega_max, cauchy_points)
        self._pole = None
        g0 = self.form_factor.g(np.asarray(1e-12))
        if abs(g0) > 1e-2:
            raise ValueError("form factor must vanish at threshold")
        if np.min(np.abs(self.eta_plus_nodes)) < 1e-8:
            raise ValueError("eta(w + i0) vanishes on the real axis: resonance on axis")

    # form factor helpers
    def g(self, z):
        return self.form_factor.g(z)

    def rho(self, z):
        return self.form_factor.rho(z)

    @property
    def omega_max(self) -> float:
        return self.grid.omega_max

    # first sheet
    def cauchy(self, f: Callable, z) -> np.ndarray:
        """int_0^omega_max f(y) / (z - y) dy on the first sheet."""
        return self.quad(f, z)

    def _check_off_cut(self, z):
        z = np.asarray(z, dtype=complex)
        on_cut = (z.imag == 0) & (z.real >= 0) & (z.real <= self.omega_max)
        if np.any(on_cut):
            raise ValueError("z lies on the cut [0, omega_max]; use eta_boundary")
        return z

    def eta(self, z):
        z = self._check_off_cut(z)
        if self.coupling == 0:
            return np.ones_like(z)
        return 1.0 - self.coupling * self.cauchy(self.rho, z)

    def _eta_unchecked(self, z):
        return 1.0 - self.coupling * self.cauchy(self.rho, z)

    def eta_boundary(self, omega, side: str = "above"):
        """eta(w + i0) (side="above") or eta(w - i0) (side="below")."""
        omega = np.asarray(omega, dtype=float)
        if np.any((omega <= 0) | (omega >= self.omega_max)):
            raise ValueError("boundary values need w strictly inside (0, omega_max)")
        if side not in ("above", "below"):
            raise ValueError("side must be 'above' or 'below'")
        pv = self.quad.principal_value(self.rho, omega)
        sign = 1.0 if side == "above" else -1.0
        return 1.0 - self.coupling * pv + sign * 1j * np.pi * self.coupling * self.rho(omega)

    def s_matrix(self, omega):
        """S(w) = eta(w - i0) / eta(w + i0); unimodular by construction."""
        ep = self.eta_boundary(omega, "above")
        if np.any(np.abs(ep) < 1e-10):
            raise ValueError("eta(w + i0) vanishes: resonance on the real axis")
        return np.conj(ep) / ep

    # second sheet
    def eta_second_sheet(self, z):
        """Continuation of eta(w + i0) into the lower half plane."""
        z = np.asarray(z, dtype=complex)
        if np.any(z.imag >= 0):
            raise ValueError("eta_second_sheet needs Im z < 0")
        return self._eta_unchecked(z) + 2j * np.pi * self.coupling * self.rho(z)

    def eta_second_sheet_upper(self, z):
        """Continuation of eta(w - i0) into the upper half plane (mirror of eta_II)."""
        z = np.asarray(z, dtype=complex)
        if np.any(z.imag <= 0):
            raise ValueError("eta_second_sheet_upper needs Im z > 0")
        return self._eta_unchecked(z) - 2j * np.pi * self.coupling * self.rho(z)

    def eta_second_sheet_derivative(self, z):
        return _central_derivative(self.eta_second_sheet, np.asarray(z, dtype=complex))

    def s_continued(self, z):
        """S continued from the real axis into the lower half plane."""
        return self._eta_unchecked(np.asarray(z, dtype=complex)) / self.eta_second_sheet(z)

    # resonance
    def count_zeros(self, rect: Sequence[float] | None = None) -> int:
        rect = self.search_rect if rect is None else rect
        if self.coupling == 0:
            return 0
        return winding_number(self.eta_second_sheet, rect)

    def find_pole(self, tol: float = 1e-12, max_iter: int = 50) -> complex:
        """Zero z0 of eta_II in the search rectangle (argument principle + Newton)."""
        if self._pole is not None:
            return self._pole
        if self.coupling == 0:
            raise PoleNotFoundError("no resonance: coupling is zero")
        count = self.count_zeros()
        if count == 0:
            raise PoleNotFoundError(f"no resonance in search window {self.search_rect}")
        if count > 1:
            raise MultiplePolesError(
                f"multiple resonances ({count}) in {self.search_rect}, rectangle must be split"
            )
        rect = list(self.search_rect)
        while max(rect[1] - rect[0], rect[3] - rect[2]) > 1e-2:
            rect = self._bisect(rect)
        z = 0.5 * (rect[0] + rect[1]) + 0.5j * (rect[2] + rect[3])
        for it in range(max_iter):
            f = self.eta_second_sheet(z)
            step = f / self.eta_second_sheet_derivative(z)
            z = z - step
            if abs(step) < tol * max(1.0, abs(z)):
                break
        else:
            raise PoleNotFoundError("Newton iteration for the pole did not converge")
        resid = abs(self.eta_second_sheet(z))
        dz = abs(self.eta_second_sheet_derivative(z))
        if resid > 1e-10:
            raise PoleNotFoundError(f"pole residual {resid:.2e} above 1e-10")
        if dz < 1e-8:
            raise PoleNotFoundError("zero of eta_II is not simple")
        logger.info("resonance z0=%s after %d Newton steps, |eta_II|=%.1e", z, it + 1, resid)
        self._pole = complex(z)
        return self._pole

    def _bisect(self, rect):
        x0, x1, y0, y1 = rect
        if x1 - x0 >= y1 - y0:
            xm = 0.5 * (x0 + x1)
            halves = [(x0, xm, y0, y1), (xm, x1, y0, y1)]
        else:
            ym = 0.5 * (y0 + y1)
            halves = [(x0, x1, y0, ym), (x0, x1, ym, y1)]
        for h in halves:
            if winding_number(self.eta_second_sheet, h) == 1:
                return list(h)
        # zero sits on the split line; nudge the split
        x0, x1, y0, y1 = rect
        return self._bisect([x0 - 1e-3 * (x1 - x0), x1, y0 - 1e-3 * (y1 - y0), y1])

    @property
    def pole(self) -> complex:
        return self.find_pole()

    def b_residue(self) -> complex:
        """Residue at z0 of b(z) = kappa g(z) / eta_II(z)."""
        z0 = self.find_pole()
        return self.coupling * complex(self.g(z0)) / complex(self.eta_second_sheet_derivative(z0))

    def s_residue(self) -> complex:
        """(Res S)_{z0} = -2 pi i kappa rho(z0) / eta_II'(z0)."""
        z0 = self.find_pole()
        return complex(-2j * np.pi * self.coupling * self.rho(z0) / self.eta_second_sheet_derivative(z0))

    # grid-consistent node data used by the real-axis transforms
    @cached_property
    def g_nodes(self) -> np.ndarray:
        return np.real(self.g(self.grid.nodes))

    @cached_property
    def rho_nodes(self) -> np.ndarray:
        return self.g_nodes**2

    @cached_property
    def eta_plus_nodes(self) -> np.ndarray:
        """eta(w_i + i0) with the PV evaluated by the grid's PV matrix."""
        r = self.rho_nodes
        return 1.0 - self.coupling * (self.grid.pv_matrix @ r - 1j * np.pi * r)

    @cached_property
    def b_nodes(self) -> np.ndarray:
        """kappa g(w) / eta(w + i0): coefficient of the outgoing LS correction."""
        return self.coupling * self.g_nodes / self.eta_plus_nodes

    @cached_property
    def a_nodes(self) -> np.ndarray:
        """kappa g(w) / eta(w - i0) = conj(b)."""
        return np.conj(self.b_nodes)

    def __repr__(self) -> str:
        return (f"ScatteringModel(coupling={self.coupling}, form_factor={self.form_factor.name!r}, "
                f"grid={self.grid!r})")
