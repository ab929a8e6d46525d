import numpy as np
import pytest

from friedrichs_spectral.evolution import (Evolver, TimeRangeError, evolve, evolve_mean, final_state,
                                           irreversibility_suite)
from friedrichs_spectral.functionals import decompose, diagonal_state, pair
from friedrichs_spectral.oracle import mean_oracle_at
from friedrichs_spectral.scattering import to_plus_representation


@pytest.fixture(scope="module")
def evolver(model, rho0):
    return Evolver(model, to_plus_representation(model, rho0))


def test_diagonal_state_does_not_evolve(model, grid, obs):
    rho = diagonal_state(grid, np.exp(-grid.nodes))
    rep = to_plus_representation(model, rho)
    vals = [evolve_mean(model, rep, obs["window"], t) for t in (0.0, 1.0, 7.0, grid.t_max)]
    assert all(v == vals[0] for v in vals)


def test_initial_value(evolver, rho0, probes):
    for O in probes.values():
        assert abs(evolver.mean(O, 0.0) - pair(rho0, O)) <= 1e-6


def test_imaginary_part_small(evolver, probes):
    for O in probes.values():
        for t in (0.5, 3.0, 9.0):
            assert abs(evolver.mean(O, t).imag) <= 1e-8


def test_position_probe_against_oracle(evolver, system, rho0, obs):
    O = obs["position_like"]
    times = [1.0, 5.0, 10.0]
    ref = mean_oracle_at(system, system.map_state(rho0), O, times)
    got = np.array([evolver.mean(O, t) for t in times])
    assert np.all(np.abs(got - ref) <= 1e-3 * np.abs(ref))


def test_time_beyond_t_max(evolver, grid, obs):
    with pytest.raises(TimeRangeError, match=f"{grid.t_max:.6g}"):
        evolver.mean(obs["window"], grid.t_max * 1.01)
    with pytest.raises(TimeRangeError):
        evolver.mean(obs["window"], -1.0)


def test_evolve_batch_diagnostics(model, rho0, obs, probes):
    res = evolve(model, rho0, probes, [0.0, 1.0, 2.0, 5.0, 10.0], obs["identity"], obs["hamiltonian"],
                 obs["projector"])
    e0 = res[0].energy
    for r in res:
        assert abs(r.trace - 1) <= 1e-8
        assert abs(r.energy - e0) <= 1e-6 * abs(e0)
        assert set(r.means) == set(probes)
    assert res[-1].offdiag["probe"] < res[0].offdiag["probe"]


def test_final_state_free(free_model, rho0):
    f = final_state(free_model, rho0)
    p, _ = decompose(rho0)
    assert np.allclose(f.d, p.d, atol=1e-15)
    assert not np.any(f.k)


def test_final_state_diagonal_input(model, grid):
    rho = diagonal_state(grid, np.exp(-grid.nodes))
    f = final_state(model, rho)
    assert np.array_equal(f.d, rho.d) and not np.any(f.k)


def test_final_state_is_long_time_limit(model, grid, rho0, obs, evolver):
    f = final_state(model, rho0)
    assert abs(np.sum(grid.weights * f.d) - 1) <= 1e-8
    for name in ("window", "mixed"):
        ref = pair(f, obs[name])
        assert abs(evolver.mean(obs[name], grid.t_max) - ref) <= 0.05 * abs(ref)


def test_irreversibility_default(model, rho0, probes):
    rep = irreversibility_suite(model, rho0, probes)
    assert rep.stationarity <= 1e-8
    assert rep.inverted_stationarity <= 1e-8
    assert rep.recovery_margin > 0
    assert rep.purity_violation > 0
    assert rep.passed()


def test_irreversibility_diagonal_state(model, grid, probes):
    rho = diagonal_state(grid, np.exp(-grid.nodes))
    rep = irreversibility_suite(model, rho, probes)
    assert rep.recovery_margin == 0


def test_irreversibility_free_offdiagonal(free_model, rho0, probes):
    rep = irreversibility_suite(free_model, rho0, probes)
    assert rep.stationarity <= 1e-8
    f = final_state(free_model, rho0)
    assert np.array_equal(rho0.k - f.k, rho0.k)
    assert np.allclose(f.d, rho0.d)
