"""Randomized invariants."""

import numpy as np
from hypothesis import given, settings, strategies as st

from friedrichs_spectral.functionals import (KernelPart, ObservableKernel, decompose, from_wavefunction, mixture,
                                             pair, recompose, time_invert)
from friedrichs_spectral.grid import build_grid
from friedrichs_spectral.model import ScatteringModel
from friedrichs_spectral.scattering import to_plus_representation
from friedrichs_spectral.superoperators import (FiniteLiouvillian, diagonal_projectors, random_hermitian,
                                                verify_resolvent_partition)

GRID = build_grid(24, 20.0)
MODEL = ScatteringModel(build_grid(200, 20.0), 0.25)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _rng(seed):
    return np.random.default_rng(seed)


def _observable(rng, grid=GRID):
    A = rng.normal(size=(grid.n, grid.n)) + 1j * rng.normal(size=(grid.n, grid.n))
    return ObservableKernel(grid, rng.normal(size=grid.n), 0.5 * (A + A.conj().T))


def _state(rng, grid=GRID, parts=2):
    pures = [from_wavefunction(grid, rng.normal(size=grid.n) + 1j * rng.normal(size=grid.n)) for _ in range(parts)]
    p = rng.dirichlet(np.ones(parts))
    return mixture(pures, p)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_pair_is_real(seed):
    rng = _rng(seed)
    assert abs(pair(_state(rng), _observable(rng)).imag) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(seeds, st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_pair_antilinear_in_state_linear_in_observable(seed, a, b):
    rng = _rng(seed)
    r1, r2 = _state(rng), _state(rng)
    O1, O2 = _observable(rng), _observable(rng)
    combo = KernelPart(GRID, a * r1.k + b * r2.k).pair(O1)
    split = np.conj(a) * KernelPart(GRID, r1.k).pair(O1) + np.conj(b) * KernelPart(GRID, r2.k).pair(O1)
    assert abs(combo - split) <= 1e-10 * max(1.0, abs(combo))
    # linear in O
    Osum = O1 + O2
    assert abs(pair(r1, Osum) - pair(r1, O1) - pair(r1, O2)) <= 1e-12 * max(1, abs(pair(r1, Osum)))


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_time_inversion_involution_and_trace(seed):
    rng = _rng(seed)
    rho = _state(rng)
    t = time_invert(rho)
    assert np.array_equal(time_invert(t).k, rho.k)
    assert abs(np.sum(GRID.weights * t.d) - 1) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_decompose_partition(seed):
    rng = _rng(seed)
    rho = _state(rng)
    p, q = decompose(rho)
    back = recompose(p, q)
    assert np.array_equal(back.k, rho.k) and np.array_equal(back.d, rho.d)
    O = _observable(rng)
    assert abs(pair(p, O) + q.pair(O) - pair(rho, O)) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_plus_representation_trace_and_hermiticity(seed):
    rng = _rng(seed)
    x = MODEL.grid.nodes
    c = rng.uniform(0.5, 8.0)
    phi = np.sqrt(x) * np.exp(-((x - c) ** 2)) * np.exp(1j * rng.uniform(0, 3) * x)
    rep = to_plus_representation(MODEL, from_wavefunction(MODEL.grid, phi))
    assert abs(rep.trace - 1) <= 1e-6
    assert rep.c_diag.min() >= -1e-10
    assert np.max(np.abs(rep.c_off - rep.c_off.conj().T)) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0.01, max_value=19.9))
def test_s_matrix_unimodular(w):
    assert abs(abs(MODEL.s_matrix(w)) - 1) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.complex_numbers(max_magnitude=30, allow_nan=False, allow_infinity=False).filter(lambda z: abs(z.imag) > 1e-3))
def test_eta_schwarz_reflection(z):
    assert abs(MODEL.eta(np.conj(z)) - np.conj(MODEL.eta(z))) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(min_value=2, max_value=8))
def test_resolvent_partition(seed, n):
    rng = _rng(seed)
    L = FiniteLiouvillian(random_hermitian(n, rng))
    z = complex(rng.normal(), rng.uniform(0.2, 2.0) * rng.choice([-1, 1]))
    proj = diagonal_projectors(n)
    assert verify_resolvent_partition(L, proj, z) <= 1e-9
    assert verify_resolvent_partition(L, proj, z, dual=True) <= 1e-9
