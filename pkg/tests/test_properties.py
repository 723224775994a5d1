import warnings

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from phonon_radiance import correlation as corr
from phonon_radiance import dicke
from phonon_radiance import lindblad as lb
from phonon_radiance import waveguide as wg
from phonon_radiance.errors import MarkovValidityWarning

U_values = st.floats(0.2, 8.0)
K_values = st.floats(-np.pi, np.pi)


@given(U=U_values, K=K_values)
def test_bound_state_below_continuum(U, K):
    p = wg.WaveguideParams(11, nonlinearity=U)
    E = wg.bound_state_energy(K, p)
    assert E <= -4 * abs(np.cos(K / 2)) + 1e-12
    assert E == wg.bound_state_energy(-K, p)


@given(U=U_values, K=st.floats(0.0, 3.0), r=st.integers(0, 12))
@settings(max_examples=40, deadline=None)
def test_correlation_even_and_bounded(U, K, r):
    p = wg.WaveguideParams(21, nonlinearity=U)
    omega = corr.frequency_for_momentum(K, p)
    assume(omega < -2.001)
    e = corr.SpinEnsemble((0,), omega)
    f_pos, f_neg, f0 = corr.two_phonon_correlation(K, [r, -r, 0], e, p)
    assert abs(f_pos - f_neg) <= 1e-12 * max(1.0, abs(f0))
    assert abs(f_pos) <= abs(f0) + 1e-12


@given(U=U_values, K=st.floats(0.05, 3.0))
def test_solve_k0_inverts_band(U, K):
    p = wg.WaveguideParams(11, nonlinearity=U)
    e = corr.SpinEnsemble((0,), corr.frequency_for_momentum(K, p))
    assert abs(corr.solve_K0(e, p) - K) < 1e-8


@given(kind=st.sampled_from(dicke.KINDS), N=st.integers(1, 30), rate=st.floats(0.01, 5.0),
       t=st.floats(0.0, 3.0))
@settings(max_examples=30, deadline=None)
def test_dicke_populations_are_probabilities(kind, N, rate, t):
    _, snaps = dicke.dicke_evolve(kind, N, rate, [0.0, t + 1e-3], snapshots=[t + 1e-3])
    p = snaps[0].populations
    assert abs(p.sum() - 1) < 1e-10
    assert p.min() >= 0


@given(positions=st.lists(st.integers(0, 6), min_size=2, max_size=3), seed=st.integers(0, 2**31))
@settings(max_examples=15, deadline=None)
def test_generator_preserves_trace_and_hermiticity(positions, seed):
    p = wg.WaveguideParams(21, nonlinearity=4.0)
    K0 = 0.46 * np.pi
    e = corr.SpinEnsemble(tuple(positions), corr.frequency_for_momentum(K0, p))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MarkovValidityWarning)
        L = lb.build_pair_liouvillian(corr.pairwise_rate_matrix(e, p, K0=K0), e)
    rng = np.random.default_rng(seed)
    d = 2 ** len(positions)
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = A @ A.conj().T
    drho = L.rhs(rho / np.trace(rho))
    scale = max(1e-300, np.abs(drho).max())
    assert abs(np.trace(drho)) < 1e-12 * max(1.0, scale)
    assert np.abs(drho - drho.conj().T).max() < 1e-12 * max(1.0, scale)
