import itertools
import warnings

import numpy as np
import pytest

from phonon_radiance import correlation as corr
from phonon_radiance import dicke
from phonon_radiance import lindblad as lb
from phonon_radiance import waveguide as wg
from phonon_radiance.errors import DimensionError, MarkovValidityWarning, PositivityError, ValidationError

warnings.simplefilter("ignore", MarkovValidityWarning)

U1 = wg.WaveguideParams(41, nonlinearity=1.0)
U4 = wg.WaveguideParams(41, nonlinearity=4.0)


def _liouvillian(positions, params=U1, frequency=-2.04, K0=None):
    e = corr.SpinEnsemble(positions, frequency if K0 is None else corr.frequency_for_momentum(K0, params), 0.1)
    R = corr.pairwise_rate_matrix(e, params, K0=K0)
    return R, lb.build_pair_liouvillian(R, e)


def _double_sum_rhs(rho, Gamma, Ucoh):
    """Pair master equation written out term by term over ordered pairs."""
    N = Gamma.shape[0]
    sm = [lb.lowering(N, j) for j in range(N)]
    pairs = [(i, j) for i in range(N) for j in range(N) if i != j]
    H = np.zeros_like(rho)
    out = np.zeros_like(rho)
    for (i, j), (k, l) in itertools.product(pairs, pairs):
        La = sm[i] @ sm[j]
        Lb = sm[k] @ sm[l]
        H += 0.5 * Ucoh[i, j, k, l] * (Lb.T @ La + La.T @ Lb)
        g = Gamma[i, j, k, l]
        out += g * (La @ rho @ Lb.T - 0.5 * (Lb.T @ La @ rho + rho @ Lb.T @ La))
    return out - 1j * (H @ rho - rho @ H)


def _random_density(d, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = A @ A.conj().T
    return rho / np.trace(rho)


@pytest.mark.parametrize("positions", [(0, 2), (0, 1, 3), (0, 0, 4, 4), (0, 2, 4, 6)])
def test_effective_jump_form_equals_double_sum(positions):
    R, L = _liouvillian(positions, U4, K0=0.46 * np.pi)
    rho = _random_density(2 ** len(positions), 1)
    assert np.allclose(L.rhs(rho), _double_sum_rhs(rho, R.Gamma, R.Ucoh), atol=1e-12 * np.abs(R.Gamma).max())


def test_superoperator_trace_preserving_and_consistent():
    _, L = _liouvillian((0, 1, 3), U4, K0=0.46 * np.pi)
    S = L.superoperator()
    d = 8
    trace_row = np.eye(d).ravel()
    assert np.max(np.abs(trace_row @ S)) < 1e-14
    rho = _random_density(d, 2)
    assert np.allclose(S @ rho.ravel(), L.rhs(rho).ravel(), atol=1e-15)


def test_zero_rates_give_identity_dynamics():
    Z = np.zeros((3,) * 4)
    L = lb.build_pair_liouvillian(None, Gamma=Z, Ucoh=Z)
    rho = _random_density(8, 3)
    series, snaps = lb.evolve_density_matrix(rho, L, [0.0, 1.0, 5.0], snapshots=True)
    assert np.allclose(snaps[-1], rho)


def test_ground_state_is_stationary():
    _, L = _liouvillian((0, 1, 2))
    g = np.zeros((8, 8), dtype=complex)
    g[0, 0] = 1
    assert np.abs(L.rhs(g)).max() == 0


def test_two_spin_same_site_equals_collective_square_jump():
    R, L = _liouvillian((0, 0))
    G = R.Gamma0 * R.correlations[0] ** 2
    S = lb.lowering(2, 0) + lb.lowering(2, 1)
    S2 = S @ S
    rho = _random_density(4, 4)
    ref = G * (S2 @ rho @ S2.T - 0.5 * (S2.T @ S2 @ rho + rho @ S2.T @ S2))
    assert np.allclose(L.rhs(rho), ref, atol=1e-12 * G)


def test_two_spin_decay_is_exponential_with_pair_rate():
    R, L = _liouvillian((0, 2), U4, K0=0.46 * np.pi)
    t = np.linspace(0, 1 / R.pair_rate, 11)
    s, _ = lb.evolve_density_matrix(lb.all_excited_density(2), L, t)
    assert np.allclose(s["P_e"], np.exp(-4 * R.pair_rate * t), atol=1e-12)


def test_rejects_asymmetric_tensor_and_size_cap():
    G = np.zeros((2,) * 4)
    G[0, 1, 1, 0] = 1.0
    with pytest.raises(ValidationError):
        lb.build_pair_liouvillian(None, Gamma=G)
    with pytest.raises(DimensionError):
        lb.build_pair_liouvillian(None, Gamma=np.zeros((9,) * 4))


def test_invalid_initial_state_rejected():
    _, L = _liouvillian((0, 1))
    with pytest.raises(ValidationError):
        lb.evolve_density_matrix(2 * lb.all_excited_density(2), L, [0, 1])


def test_positivity_violation_aborts():
    Z = np.zeros((2,) * 4)
    L = lb.build_pair_liouvillian(None, Gamma=Z)
    broken = lb.PairLiouvillian(2, Z, Z, L.pairs, L.hamiltonian, np.array([-1.0]),
                                (lb.lowering(2, 0) @ lb.lowering(2, 1),),
                                0.5j * (lb.lowering(2, 0) @ lb.lowering(2, 1)).T @ (lb.lowering(2, 0) @ lb.lowering(2, 1)))
    with pytest.raises(PositivityError) as info:
        lb.evolve_density_matrix(lb.all_excited_density(2), broken, np.linspace(0, 2, 5))
    assert "min_eigenvalue" in info.value.diagnostics


def test_permutation_symmetry_same_site():
    R, L = _liouvillian((0, 0, 0))
    t = np.linspace(0, 20, 11)
    rho0 = np.zeros((8, 8), dtype=complex)
    rho0[6, 6] = 1  # spins 0 and 1 excited
    base, _ = lb.evolve_density_matrix(rho0, L, t)
    for perm in itertools.permutations(range(3)):
        Gp = R.Gamma[np.ix_(perm, perm, perm, perm)]
        Up = R.Ucoh[np.ix_(perm, perm, perm, perm)]
        Lp = lb.build_pair_liouvillian(None, Gamma=Gp, Ucoh=Up)
        s, _ = lb.evolve_density_matrix(rho0, Lp, t)
        assert np.allclose(s["P_e"], base["P_e"], atol=1e-12)


def test_parity_conserved():
    _, L = _liouvillian((0, 1, 3), U4, K0=0.46 * np.pi)
    psi = lb.basis_state(3, [0, 1]) + lb.basis_state(3, [])  # even parity superposition
    rho0 = np.outer(psi, psi.conj()) / 2
    _, snaps = lb.evolve_density_matrix(rho0, L, np.linspace(0, 1e5, 6), snapshots=True)
    odd = lb.excitation_numbers(3) % 2 == 1
    for rho in snaps:
        assert np.abs(rho[np.ix_(odd, odd)]).max() < 1e-14
        assert np.abs(rho[np.ix_(odd, ~odd)]).max() < 1e-14


def test_dark_states_same_site():
    _, L = _liouvillian((0, 0, 0, 0))
    dark = lb.find_subradiant_states(L)
    assert sum(d.excitations == 1 for d in dark) == 4
    # above one excitation, only non-symmetric states (S < N/2) are dark
    sym = {n: sum(lb.basis_state(4, c) for c in itertools.combinations(range(4), n)) for n in range(5)}
    for d in dark:
        if d.excitations >= 2:
            assert abs(np.vdot(sym[d.excitations], d.vector)) < 1e-10
    assert {d.excitations for d in dark} <= {0, 1, 2}


def test_dark_state_at_correlation_zero():
    R, L = _liouvillian((0, 3), U4, K0=0.46 * np.pi)
    # f(3) is small but not exactly zero; kill it to test the exact statement
    L0 = lb.build_pair_liouvillian(None, Gamma=np.zeros_like(R.Gamma))
    assert any(d.excitations == 2 and d.initial_overlap == pytest.approx(1) for d in lb.find_subradiant_states(L0))
    assert not any(d.excitations == 2 for d in lb.find_subradiant_states(L))


def test_plateau_prediction_matches_long_time_dynamics():
    R, L = _liouvillian((0, 1, 2, 3))
    rho0 = lb.all_excited_density(4)
    G = R.Gamma0 * R.correlations[0] ** 2
    s, _ = lb.evolve_density_matrix(rho0, L, np.array([0, 50, 5000]) / G)
    pred = lb.predict_plateau(L, rho0)
    assert pred > 0
    assert s["P_e"][-1] == pytest.approx(pred, abs=1e-3)
    occ = sum(d.occupation * d.excitations for d in lb.find_subradiant_states(L, rho0)) / 4
    assert occ == pytest.approx(pred, abs=1e-10)


def test_same_site_equals_dicke_supercorrelated():
    R, L = _liouvillian((0, 0, 0, 0), U4, K0=0.46 * np.pi)
    G = R.Gamma0 * R.correlations[0] ** 2
    t = np.linspace(0, 2 / G, 101)
    s, _ = lb.evolve_density_matrix(lb.all_excited_density(4), L, t)
    d, _ = dicke.dicke_evolve("supercorrelated", 4, G, t)
    assert np.max(np.abs(s["P_e"] - d["P_e"])) < 1e-6


def test_grouped_reduced_model_equals_dicke_superradiance():
    t = np.linspace(0, 3, 31)
    assert np.allclose(lb.group_lindblad_evolution(2, 0.7, t), lb.dicke_reference(2, 0.7, t), atol=1e-10)


def test_grouped_experiment_validates_layout():
    with pytest.raises(ValidationError):
        lb.grouped_superradiance_experiment(4.0, positions=(0, 0, 4))
    with pytest.raises(ValidationError):
        lb.grouped_superradiance_experiment(4.0, positions=(0, 1, 4, 4))


def test_grouped_experiment_fits_at_u4():
    rep = lb.grouped_superradiance_experiment(4.0)
    assert rep.deviation_max < 0.05
    assert rep.to_json_dict()["params"]["Gamma_D"] == pytest.approx(4 * rep.group_rate)
