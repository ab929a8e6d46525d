"""Mean values of evolving functional states in the outgoing representation.

With c the "+" representation of rho_0 and F_O the fluctuating kernel of O,

    (rho_t|O) = sum_i w_i c(w_i) O_i
              + sum_ij w_i w_j exp(i (w_i - w_j) t) c(w_i, w_j) F_O(w_i, w_j).

The first term is time independent, so a diagonal state never evolves in
mean value, and the second decays as t grows (Riemann-Lebesgue), which
leaves the weak limit rho_inf = sum_i c(w_i) (w_i|.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .functionals import ObservableKernel, StateFunctional, pair, time_invert
from .model import ScatteringModel
from .scattering import PlusRepresentation, fluctuating_kernel, to_plus_representation

logger = logging.getLogger(__name__)


class TimeRangeError(ValueError):
    pass


@dataclass(frozen=True)
class EvolutionResult:
    t: float
    means: dict
    trace: float
    energy: float
    offdiag: dict = field(default_factory=dict)


class Evolver:
    """Caches fluctuating kernels per observable for repeated (O, t) queries."""

    def __init__(self, model: ScatteringModel, rep: PlusRepresentation):
        self.model = model
        self.rep = rep
        self._kernels: dict = {}

    def kernel(self, obs: ObservableKernel) -> np.ndarray:
        key = id(obs)
        if key not in self._kernels:
            self._kernels[key] = (obs, fluctuating_kernel(self.model, obs))
        return self._kernels[key][1]

    def _check_t(self, t: float):
        tmax = self.model.grid.t_max
        if t < 0:
            raise TimeRangeError("negative times are not supported")
        if t > tmax * (1 + 1e-12):
            raise TimeRangeError(f"t={t} exceeds T_max={tmax:.6g} of the grid")

    def invariant_part(self, obs: ObservableKernel) -> float:
        return float(np.sum(self.model.grid.weights * self.rep.c_diag * obs.diag))

    def fluctuating_part(self, obs: ObservableKernel, t: float) -> complex:
        self._check_t(t)
        x, w = self.model.grid.nodes, self.model.grid.weights
        F = self.kernel(obs)
        e = w * np.exp(1j * x * t)
        return complex(e @ (self.rep.c_off * F) @ np.conj(e))

    def mean(self, obs: ObservableKernel, t: float) -> complex:
        return self.invariant_part(obs) + self.fluctuating_part(obs, t)

    def offdiag_mean(self, obs: ObservableKernel, t: float) -> complex:
        """(Q rho_t|O): the part of the mean carried by the kernel of rho_t."""
        return self.mean(obs.offdiagonal_part(), t)


def evolve_mean(model: ScatteringModel, rep: PlusRepresentation, obs: ObservableKernel, t: float) -> complex:
    return Evolver(model, rep).mean(obs, t)


def evolve(model: ScatteringModel, rho: StateFunctional, observables: Mapping[str, ObservableKernel],
           times: Iterable[float], identity: ObservableKernel, hamiltonian: ObservableKernel,
           probe: ObservableKernel | None = None) -> list:
    """Evaluate all observables at all times with trace/energy/off-diagonal diagnostics."""
    rep = to_plus_representation(model, rho)
    ev = Evolver(model, rep)
    probe = probe if probe is not None else next(iter(observables.values()))
    out = []
    for t in times:
        means = {name: ev.mean(O, t) for name, O in observables.items()}
        out.append(EvolutionResult(
            t=float(t),
            means=means,
            trace=float(np.real(ev.mean(identity, t))),
            energy=float(np.real(ev.mean(hamiltonian, t))),
            offdiag={"probe": abs(ev.offdiag_mean(probe, t))},
        ))
    return out


def final_state(model: ScatteringModel, rho: StateFunctional) -> StateFunctional:
    """Weak limit rho_inf: diagonal density c(w), no kernel."""
    rep = to_plus_representation(model, rho)
    d = np.clip(rep.c_diag, 0.0, None)
    return StateFunctional(model.grid, d, np.zeros_like(rho.k), trace_tol=1e-8)


@dataclass
class IrreversibilityReport:
    stationarity: float
    inverted_stationarity: float
    recovery_margin: float
    purity_violation: float
    times: tuple
    details: dict = field(default_factory=dict)

    def passed(self, tol: float = 1e-8) -> bool:
        return self.stationarity <= tol and self.inverted_stationarity <= tol


def irreversibility_suite(model: ScatteringModel, rho: StateFunctional,
                          probes: Mapping[str, ObservableKernel], times=None) -> IrreversibilityReport:
    """Stationarity of rho_inf and T rho_inf, non-recovery of T rho_0, mixedness of rho_inf.

    (a) max |(rho_inf_t|O) - (rho_inf|O)| over probes and times
    (b) the same for T rho_inf
    (c) max over probes of |(T rho_inf evolved|O) - (T rho_0|O)|; since T rho_inf
        is stationary this distance is the same at every time
    (d) max |d_inf - diag(k_inf)|, the violation of the purity condition
    """
    grid = model.grid
    times = tuple(np.linspace(0.0, grid.t_max, 6)) if times is None else tuple(times)
    rho_inf = final_state(model, rho)
    t_rho_inf = time_invert(rho_inf)
    t_rho0 = time_invert(rho)

    def drift(state):
        ev = Evolver(model, to_plus_representation(model, state))
        worst = 0.0
        for O in probes.values():
            ref = pair(state, O)
            for t in times:
                worst = max(worst, abs(ev.mean(O, t) - ref))
        return worst

    ev_inv = Evolver(model, to_plus_representation(model, t_rho_inf))
    distances = {}
    for name, O in probes.items():
        distances[name] = max(abs(ev_inv.mean(O, t) - pair(t_rho0, O)) for t in times)
    margin = max(distances.values()) if distances else 0.0
    return IrreversibilityReport(
        stationarity=drift(rho_inf),
        inverted_stationarity=drift(t_rho_inf),
        recovery_margin=float(margin),
        purity_violation=rho_inf.purity_defect(),
        times=times,
        details={"distances": distances, "final_trace": float(np.sum(grid.weights * rho_inf.d))},
    )
