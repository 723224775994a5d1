import warnings

import numpy as np
import pytest

from phonon_radiance import correlation as corr
from phonon_radiance import waveguide as wg
from phonon_radiance.errors import MarkovValidityWarning, NoResonanceError, ValidationError

U4 = wg.WaveguideParams(41, nonlinearity=4.0)


def _ensemble(K0, params=U4, positions=(0, 0), g=0.1):
    return corr.SpinEnsemble(positions, corr.frequency_for_momentum(K0, params), g)


def _direct_double_sum(K, r, ensemble, params, n=301):
    """f_K(r) from the momentum-space definition with the dimer wavefunction summed in real space."""
    k = wg.momentum_grid(n)
    d = np.arange(-60, 61)
    phi = wg.relative_wavefunction(K, d, params)
    q = k - K / 2
    overlap = np.array([np.sum(phi * np.cos(qq * d)) for qq in q])
    delta = wg.single_phonon_dispersion(k, params) - ensemble.frequency
    return 2 * np.sqrt(2) / n * np.sum(params.hopping * np.cos(q * r) * overlap / delta)


def test_correlation_matches_real_space_oracle():
    K0 = 0.46 * np.pi
    e = _ensemble(K0)
    for r in (0, 1, 3, 6):
        assert corr.two_phonon_correlation(K0, r, e, U4) == pytest.approx(_direct_double_sum(K0, r, e, U4), abs=1e-9)


def test_correlation_even_in_r():
    e = _ensemble(0.46 * np.pi)
    r = np.arange(-10, 11)
    f = corr.two_phonon_correlation(0.46 * np.pi, r, e, U4)
    assert np.max(np.abs(f - f[::-1])) <= 1e-12


def test_correlation_zero_near_r3():
    K0 = 0.46 * np.pi
    e = _ensemble(K0)
    f0, f3 = corr.two_phonon_correlation(K0, [0, 3], e, U4)
    assert abs(f3 / f0) < 0.05


def test_correlation_rejects_in_band_frequency():
    e = corr.SpinEnsemble((0,), -1.0)
    with pytest.raises(ValidationError):
        corr.two_phonon_correlation(0.0, 0, e, U4)


def test_solve_k0_roundtrip():
    for K in (0.1, 0.46 * np.pi, 2.9):
        assert corr.solve_K0(_ensemble(K), U4) == pytest.approx(K, abs=1e-10)


def test_solve_k0_band_top_and_out_of_band():
    p = wg.WaveguideParams(41, nonlinearity=5.0)
    assert corr.solve_K0(corr.SpinEnsemble((0,), -2.5), p) == pytest.approx(np.pi)
    with pytest.raises(NoResonanceError):
        corr.solve_K0(corr.SpinEnsemble((0,), -1.99), U4)
    with pytest.raises(NoResonanceError):
        corr.solve_K0(corr.SpinEnsemble((0,), -3.5), U4)


def test_group_velocity_matches_finite_difference():
    K = np.linspace(0.05, np.pi - 0.05, 50)
    h = 1e-6
    fd = (wg.bound_state_energy(K + h, U4) - wg.bound_state_energy(K - h, U4)) / (2 * h)
    assert np.max(np.abs(corr.group_velocity(K, U4) - fd)) < 1e-6


def test_rate_tensor_symmetries():
    p = wg.WaveguideParams(41, nonlinearity=1.0)
    e = corr.SpinEnsemble((0, 1, 3), -2.04, 0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MarkovValidityWarning)
        R = corr.pairwise_rate_matrix(e, p)
    A = R.A
    assert np.allclose(A, A.transpose(1, 0, 2, 3))
    assert np.allclose(A, A.transpose(2, 3, 0, 1))
    assert np.allclose(R.Gamma, R.Gamma0 * A.real)
    assert np.allclose(R.Ucoh, 0.5 * R.Gamma0 * A.imag)
    json_dict = R.to_json_dict()
    assert json_dict["n_spins"] == 3 and len(json_dict["A_real"]) == 3


def test_pair_rate_equals_markov_formula():
    K0 = 0.46 * np.pi
    e = _ensemble(K0, positions=(0, 2))
    R = corr.pairwise_rate_matrix(e, U4, K0=K0)
    assert R.pair_rate == pytest.approx(corr.markov_pair_rate(2, e, U4), rel=1e-10)
    assert R.Gamma0 == pytest.approx(2 * 0.1**4 / corr.group_velocity(K0, U4))


def test_markov_warning_near_band_edge():
    p = wg.WaveguideParams(60, nonlinearity=0.7)
    with pytest.warns(MarkovValidityWarning):
        corr.pairwise_rate_matrix(corr.SpinEnsemble((0, 0), -2.03, 0.1), p)


def test_correlation_context_shapes():
    e = _ensemble(0.46 * np.pi)
    ctx = corr.correlation_context(e, wg.WaveguideParams(11, nonlinearity=4.0), r_max=3)
    assert ctx.f_table.shape == (11, 7)
    assert np.all(ctx.detunings > 0)
