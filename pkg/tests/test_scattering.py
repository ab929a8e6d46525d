import numpy as np
import pytest

from friedrichs_spectral.functionals import StateFunctional, diagonal_state, pair
from friedrichs_spectral.oracle import spectral_density
from friedrichs_spectral.scattering import (completeness_matrix, fluctuating_kernel, ls_gram, ls_plus,
                                            moller_matrix, split_observable, synthesis_matrix,
                                            to_plus_representation)


def interior(grid, lo=1.0, hi=15.0):
    return np.where((grid.nodes > lo) & (grid.nodes < hi))[0]


def test_free_kernel_is_delta(free_model, grid):
    k = ls_plus(free_model, grid.nodes[40])
    assert k.b == 0
    v = k.discretize()
    assert v[40] == 1 and np.count_nonzero(v) == 1


def test_ls_rejects_ends_and_off_grid(model, grid):
    with pytest.raises(ValueError):
        ls_plus(model, grid.nodes[0])
    with pytest.raises(ValueError):
        ls_plus(model, grid.nodes[-1])
    with pytest.raises(ValueError):
        ls_plus(model, 0.5 * (grid.nodes[10] + grid.nodes[11]))


def test_eigen_residual(model, system, grid):
    worst = 0.0
    for i in interior(grid):
        v = ls_plus(model, grid.nodes[i]).discretize("direct")
        r = (system.H - grid.nodes[i] * np.eye(grid.n)) @ v
        worst = max(worst, np.linalg.norm(r) / np.linalg.norm(v))
    assert worst <= 5e-3


def test_gram_leakage(model, grid):
    G = ls_gram(model, "unitary", interior(grid))
    off = G - np.diag(np.diag(G))
    assert np.max(np.abs(off)) <= 5e-3
    assert np.max(np.abs(np.diag(G) - 1)) <= 5e-3


def test_completeness(model):
    C = completeness_matrix(model)
    assert np.linalg.norm(C - np.eye(C.shape[0]), 2) <= 5e-3


def test_plus_rep_free(free_model, rho0):
    rep = to_plus_representation(free_model, rho0)
    assert np.allclose(rep.c_diag, rho0.d, atol=1e-15)
    assert np.allclose(rep.c_off, np.conj(rho0.k), atol=1e-15)


def test_plus_rep_invariants(model, rho0):
    rep = to_plus_representation(model, rho0)
    assert abs(rep.trace - 1) <= 1e-8
    assert rep.c_diag.min() >= -1e-10
    assert np.max(np.abs(rep.c_off - rep.c_off.conj().T)) <= 1e-10
    assert rep.low_accuracy_nodes == (0, 1)


def test_plus_rep_against_oracle_density(model, rho0, system, grid):
    rep = to_plus_representation(model, rho0)
    E, dens = spectral_density(system, system.map_state(rho0))
    idx = interior(grid)
    ref = np.interp(grid.nodes[idx], E, dens)
    assert np.max(np.abs(rep.c_diag[idx] - ref)) <= 5e-3


def test_kappa_continuity(grid, rho0):
    from friedrichs_spectral.model import ScatteringModel

    errs = []
    for k in (0.1, 0.01, 0.001):
        rep = to_plus_representation(ScatteringModel(grid, k), rho0)
        errs.append(np.max(np.abs(rep.c_off - np.conj(rho0.k))))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


def test_diagonal_state_unchanged(model, grid):
    rho = diagonal_state(grid, np.exp(-grid.nodes))
    rep = to_plus_representation(model, rho)
    assert np.array_equal(rep.c_diag, rho.d)
    assert not np.any(rep.c_off)


def test_split_identity_and_hamiltonian(model, obs, system):
    for name in ("identity", "hamiltonian"):
        O = obs[name]
        inv, fluc = split_observable(model, O)
        assert np.linalg.norm(system.map_observable(fluc), 2) <= 5e-3
        assert np.linalg.norm(system.map_observable(inv) - system.map_observable(O), 2) <= 5e-3


def test_split_offdiagonal(model, obs):
    inv, fluc = split_observable(model, obs["projector"])
    assert not np.any(inv.diag) and not np.any(inv.reg)
    assert np.array_equal(fluc.reg, obs["projector"].reg)


@pytest.mark.parametrize("name", ["window", "mixed", "hamiltonian"])
def test_invariant_part_is_stationary(model, obs, system, name):
    inv, _ = split_observable(model, obs[name])
    A = system.map_observable(inv)
    E, U = system.eig
    V = (U * np.exp(1j * E * 10.0)) @ U.conj().T
    assert np.linalg.norm(V @ A @ V.conj().T - A, 2) <= 5e-3


def test_fluctuating_kernel_vanishes_for_conserved(model, obs, grid):
    idx = interior(grid)
    sel = np.ix_(idx, idx)
    assert np.max(np.abs(fluctuating_kernel(model, obs["identity"])[sel])) < 1e-8
    assert np.max(np.abs(fluctuating_kernel(model, obs["hamiltonian"])[sel])) < 1e-8


def test_moller_and_synthesis_free(free_model):
    n = free_model.grid.n
    assert np.array_equal(moller_matrix(free_model), np.eye(n))
    assert np.array_equal(synthesis_matrix(free_model), np.eye(n))
