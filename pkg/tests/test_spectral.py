import numpy as np
import pytest

from friedrichs_spectral.evolution import Evolver
from friedrichs_spectral.functionals import (AnalyticWavefunction, DEFAULT_PROBES, identity_observable,
                                             lorentzian_packet, threshold_packet)
from friedrichs_spectral.scattering import to_plus_representation
from friedrichs_spectral.spectral import (AnalyticityError, ComplexConfig, ComplexDecomposition,
                                          DeformationPath, NoResonanceError, biorthogonality_defects,
                                          boundary_fluctuation, complex_evolution, fit_decay_rate,
                                          gamov_vectors, phi_energy_trace, real_family, resolution_defect)


def smooth_probes(grid):
    x = grid.nodes
    h1 = np.sqrt(x) / (1 + x) ** 2
    h2 = x / (1 + x) ** 3
    h3 = np.exp(-((x - 5) ** 2))
    return [(1 / (1 + x), np.outer(h1, h2) + 1j * np.outer(h2, h1)), (h3, np.outer(h3, h3))]


def test_free_family_reduces_to_free_basis(free_model, obs):
    fam = real_family(free_model)
    for O in obs.values():
        assert np.array_equal(fam.left_off(O), O.reg)
        assert np.array_equal(fam.left_diag(O), O.diag)


def test_biorthogonality(model, grid):
    d = biorthogonality_defects(real_family(model), smooth_probes(grid))
    assert max(d.values()) <= 5e-3


def test_resolution_of_identity(model, probes):
    fam = real_family(model)
    for O in probes.values():
        assert resolution_defect(fam, O) <= 5e-3


def test_labels(model, grid):
    lab = real_family(model).labels()
    assert lab[3, 7] == grid.nodes[3] - grid.nodes[7]


def test_energy_trace_identities(model, free_model):
    t = phi_energy_trace(model)
    assert t.passed
    r = t.as_dict()
    assert r["phi_5_I_equals_1"] <= 5e-3
    assert r["phi_3_7_H_zero"] <= 5e-3 and r["phi_3_7_I_zero"] <= 5e-3
    t0 = phi_energy_trace(free_model)
    assert max(t0.as_dict().values()) <= 1e-10


def test_boundary_fluctuation_matches_grid(model, grid, analytic_obs, obs):
    fam = real_family(model)
    i, j = 90, 140
    for name in ("projector", "mixed", "window"):
        pt = boundary_fluctuation(model, analytic_obs[name], grid.nodes[i], grid.nodes[j])[0, 0]
        assert abs(pt - fam.left_off(obs[name])[i, j]) < 1e-6


def test_gamov_free_model(free_model):
    with pytest.raises(NoResonanceError, match="no resonance"):
        gamov_vectors(free_model)


def test_residue_factors(model):
    fam = gamov_vectors(model)
    assert abs(fam.residue_factor_product() - (-2j * np.pi * fam.s_residue)) <= 1e-10
    assert fam.gamov_label.imag > 0
    assert fam.decay_rate == pytest.approx(2 * abs(model.find_pole().imag))
    labels = fam.eigenvalue_labels(3.0, 7.0)
    assert labels["ww'"] == -4.0


@pytest.fixture(scope="module")
def threshold_setup(model, grid):
    wf = threshold_packet()
    rho = wf.normalized(grid).state(grid)
    rep = to_plus_representation(model, rho)
    return wf, rep, Evolver(model, rep), ComplexDecomposition(model, wf, rep=rep)


def test_psi_tilde_annihilates_h_and_i(threshold_setup, analytic_obs):
    dec = threshold_setup[3]
    for name in ("hamiltonian", "identity"):
        vals = dec.psi_tilde_pairings(analytic_obs[name])
        assert set(vals) == {"ww'", "w0", "0w'", "00"}
        assert max(vals.values()) <= 5e-3


def test_route_equivalence_small_t(threshold_setup, analytic_obs, obs):
    _, rep, ev, dec = threshold_setup
    for name in DEFAULT_PROBES:
        real = ev.mean(obs[name], 0.1)
        cx = dec.terms(analytic_obs[name], 0.1)["total"]
        assert abs(cx - real) <= 1e-3 * abs(real)


def test_gamov_decay(threshold_setup, analytic_obs, model):
    dec = threshold_setup[3]
    times = (2.0, 4.0, 6.0)
    gg = [dec.terms(analytic_obs["projector"], t)["gamov_gamov"] for t in times]
    rate = fit_decay_rate(times, gg)
    assert abs(rate - 2 * abs(model.find_pole().imag)) <= 0.05 * rate


def test_free_model_background_only(free_model, grid, analytic_obs):
    wf = threshold_packet()
    rho = wf.normalized(grid).state(grid)
    rep = to_plus_representation(free_model, rho)
    res = complex_evolution(free_model, rep, analytic_obs["projector"], 1.0, wf)
    assert res["gamov_gamov"] == 0 and res["gamov_background"] == 0 and res["background_gamov"] == 0
    real = Evolver(free_model, rep).mean(analytic_obs["projector"].kernel(grid), 1.0)
    assert abs(res["total"] - real) <= 1e-6 * abs(real)


def test_path_independence(model, grid, analytic_obs):
    wf = threshold_packet()
    rep = to_plus_representation(model, wf.normalized(grid).state(grid))
    a = ComplexDecomposition(model, wf, rep=rep)
    b = ComplexDecomposition(model, wf, ComplexConfig(theta=0.85 * np.pi), rep=rep)
    for name in ("projector", "mixed"):
        for t in (0.5, 3.0):
            assert abs(a.terms(analytic_obs[name], t)["total"] - b.terms(analytic_obs[name], t)["total"]) <= 1e-6


def test_refuses_default_packet(model):
    with pytest.raises(AnalyticityError) as err:
        ComplexDecomposition(model, lorentzian_packet())
    assert complex(2, 1) in err.value.poles and complex(2, -1) in err.value.poles
    assert "(2+1j)" in str(err.value)


def test_refuses_sampled_state(model, rho0):
    with pytest.raises(AnalyticityError):
        ComplexDecomposition(model, rho0)


def test_refuses_observable_pole_in_region(model):
    from friedrichs_spectral.functionals import AnalyticObservable

    bad = AnalyticObservable("bad", lambda z: 1 / ((z - 3) ** 2 + 1), poles=(3 + 1j, 3 - 1j))
    dec = ComplexDecomposition(model, threshold_packet())
    with pytest.raises(AnalyticityError, match="bad"):
        dec.terms(bad, 1.0)


def test_path_quadrature():
    p = DeformationPath.build(3 * np.pi / 4, 20.0)
    # int over the path of a polynomial equals the segment integral (Cauchy)
    assert abs(np.sum(p.weights * p.points**3) - 20.0**4 / 4) < 1e-12 * 20.0**4
    assert p.encloses(2 + 1j, 20.0) and not p.encloses(-1 + 0j, 20.0)


def test_path_must_enclose_pole(model):
    with pytest.raises(AnalyticityError):
        gamov_vectors(model, ComplexConfig(theta=np.pi / 4))
