"""Two-phonon correlation function, resonant momentum and pair decay rates.

``f_K(r)`` is the amplitude with which two spins a distance ``r`` apart jointly
emit into the dimer with centre-of-mass momentum ``K``; it is obtained by
summing the virtual single-phonon channel over the periodic k-grid:

    f_K(r) = (2 sqrt 2 / M) sum_k J cos(q r) / delta_k * S(q) * phi_K(0),
    q = k - K/2,  S(q) = sinh(a) / (cosh(a) - cos q),  a = 1/lambda_K,

with ``delta_k = omega_k - omega_e``. The summand is smooth and periodic, so
plain summation converges exponentially in the number of k-points ``M``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from . import waveguide as wg
from .errors import ConvergenceError, MarkovValidityWarning, NoResonanceError, ValidationError

DEFAULT_K_POINTS = 401
CONVERGENCE_RTOL = 1e-4
MARKOV_MARGIN = 5.0


@dataclass(frozen=True)
class SpinEnsemble:
    positions: tuple
    frequency: float
    coupling: float = 0.1

    def __post_init__(self):
        pos = tuple(int(p) for p in self.positions)
        if len(pos) == 0:
            raise ValidationError("an ensemble needs at least one spin", "N >= 1")
        object.__setattr__(self, "positions", pos)
        if not self.coupling > 0:
            raise ValidationError(f"coupling must be positive, got {self.coupling}", "g > 0")

    @property
    def n_spins(self) -> int:
        return len(self.positions)

    def validate(self, params: wg.WaveguideParams) -> None:
        """Check the invariants that depend on the lattice."""
        for p in self.positions:
            if not 0 <= p < params.n_sites:
                raise ValidationError(f"spin position {p} outside [0, {params.n_sites})",
                                      "0 <= n_j < N_r")
        if not self.frequency - params.base_frequency < -2 * params.hopping:
            raise ValidationError(
                f"spin frequency {self.frequency} lies inside the single-phonon band "
                f"[{params.base_frequency - 2 * params.hopping}, {params.base_frequency + 2 * params.hopping}]",
                "omega_e - omega_r < -2J",
            )

    def replace(self, **changes) -> "SpinEnsemble":
        values = dict(positions=self.positions, frequency=self.frequency, coupling=self.coupling)
        values.update(changes)
        return SpinEnsemble(**values)


def frequency_for_momentum(K0: float, params: wg.WaveguideParams) -> float:
    """Spin frequency whose pair energy 2*omega_e is resonant with the dimer at K0."""
    return float(wg.bound_state_energy(K0, params)) / 2


def _dimer_overlap(q, a):
    """sinh(a)/(cosh(a) - cos q), written to stay finite as a -> infinity."""
    if np.isinf(a):
        return np.ones_like(q)
    e = np.exp(-a)
    return (1 - e * e) / (1 - 2 * e * np.cos(q) + e * e)


def _correlation_terms(K, r, frequency, params, n_k):
    k = wg.momentum_grid(n_k)
    delta = wg.single_phonon_dispersion(k, params) - frequency
    if np.any(delta <= 0):
        raise ValidationError("spin frequency must lie below the single-phonon band", "delta_k > 0")
    a = float(wg.inverse_localization_length(K, params))
    phi0 = np.sqrt(np.tanh(a))
    q = k - K / 2
    r = np.atleast_1d(np.asarray(r, dtype=float))
    weight = params.hopping * _dimer_overlap(q, a) * phi0 / delta
    return 2 * np.sqrt(2) / n_k * np.cos(np.outer(r, q)) * weight


def two_phonon_correlation(K, r, ensemble: SpinEnsemble, params: wg.WaveguideParams,
                           n_k: int = DEFAULT_K_POINTS, check: bool = True):
    """f_K(r) on an ``n_k``-point grid.

    With ``check`` the sum is repeated on ``2*n_k + 1`` points and a
    ConvergenceError is raised if the two disagree by more than 1e-4 relative
    to the sum of absolute summands (the natural scale near zeros of f).
    """
    terms = _correlation_terms(K, r, ensemble.frequency, params, n_k)
    value = terms.sum(axis=1)
    if check:
        fine = _correlation_terms(K, r, ensemble.frequency, params, 2 * n_k + 1).sum(axis=1)
        scale = np.abs(terms).sum(axis=1)
        bad = np.abs(fine - value) > CONVERGENCE_RTOL * scale
        if np.any(bad):
            raise ConvergenceError(
                f"f_K(r) not converged on {n_k} k-points (max change {np.max(np.abs(fine - value)):.3e})"
            )
    return value if np.ndim(r) else float(value[0])


@dataclass(frozen=True)
class CorrelationContext:
    k_grid: np.ndarray
    detunings: np.ndarray
    K_grid: np.ndarray
    bound_detunings: np.ndarray
    separations: np.ndarray
    f_table: np.ndarray  # shape (len(K_grid), len(separations))


def correlation_context(ensemble: SpinEnsemble, params: wg.WaveguideParams, r_max: int = 10,
                        n_k: int = DEFAULT_K_POINTS, K_grid=None) -> CorrelationContext:
    k = wg.momentum_grid(n_k)
    K_grid = wg.momentum_grid(params.n_sites) if K_grid is None else np.asarray(K_grid, dtype=float)
    r = np.arange(-r_max, r_max + 1)
    table = np.array([two_phonon_correlation(K, r, ensemble, params, n_k) for K in K_grid])
    return CorrelationContext(
        k_grid=k,
        detunings=wg.single_phonon_dispersion(k, params) - ensemble.frequency,
        K_grid=K_grid,
        bound_detunings=wg.bound_state_energy(K_grid, params) - 2 * ensemble.frequency,
        separations=r,
        f_table=table,
    )


def group_velocity(K, params: wg.WaveguideParams):
    wg._require_bound(params)
    J, U = params.hopping, params.nonlinearity
    return 4 * J**2 * np.sin(K) / np.sqrt(U**2 + 16 * J**2 * np.cos(K / 2) ** 2)


def solve_K0(ensemble: SpinEnsemble, params: wg.WaveguideParams) -> float:
    """Centre-of-mass momentum in (0, pi] with E_K0 = 2*omega_e, by bisection."""
    wg._require_bound(params)
    target = 2 * ensemble.frequency
    lo, hi = float(wg.bound_state_energy(0.0, params)), float(wg.bound_state_energy(np.pi, params))
    if np.isclose(target, hi, rtol=0, atol=1e-12):
        return float(np.pi)
    if not lo < target < hi:
        raise NoResonanceError(
            f"no resonant bound state: 2*omega_e = {target:.6g} outside the dimer band ({lo:.6g}, {hi:.6g})"
        )

    def residual(K):
        return float(wg.bound_state_energy(K, params)) - target

    K0 = bisect(residual, 0.0, np.pi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return float(K0)


@dataclass(frozen=True)
class RateMatrix:
    """Pair-emission coefficients for an ensemble.

    Tensors are indexed ``[i, j, k, l]`` over spin labels in ensemble order:
    ``A[i,j,k,l] = f(n_i-n_j) f(n_k-n_l) exp(i K0 |(n_k+n_l)-(n_i+n_j)|/2)``,
    ``Gamma = Gamma0 Re A`` and ``Ucoh = Gamma0/2 Im A``.
    """

    K0: float
    vg: float
    Gamma0: float
    A: np.ndarray
    Gamma: np.ndarray
    Ucoh: np.ndarray
    correlations: dict = field(default_factory=dict)
    pair_rate: float | None = None
    markov_ratio: float = np.inf

    def to_json_dict(self) -> dict:
        n = self.A.shape[0]
        return {
            "index_order": "[i][j][k][l] over spins in ensemble order; "
                           "A_ij,kl couples pair (i,j) emission with pair (k,l)",
            "n_spins": n,
            "K0": self.K0,
            "vg": self.vg,
            "Gamma0": self.Gamma0,
            "pair_rate": self.pair_rate,
            "markov_ratio": self.markov_ratio,
            "correlations": {str(k): v for k, v in sorted(self.correlations.items())},
            "A_real": self.A.real.tolist(),
            "A_imag": self.A.imag.tolist(),
            "Gamma": self.Gamma.tolist(),
            "Ucoh": self.Ucoh.tolist(),
        }


def pairwise_rate_matrix(ensemble: SpinEnsemble, params: wg.WaveguideParams, K0: float | None = None,
                         n_k: int = DEFAULT_K_POINTS) -> RateMatrix:
    ensemble.validate(params)
    if K0 is None:
        K0 = solve_K0(ensemble, params)
    vg = float(group_velocity(K0, params))
    g, J = ensemble.coupling, params.hopping
    markov_ratio = vg / (g**2 / J)
    if markov_ratio < MARKOV_MARGIN:
        warnings.warn(
            f"Markov approximation marginal: v_g(K0)/(g^2/J) = {markov_ratio:.3g} < {MARKOV_MARGIN}",
            MarkovValidityWarning,
            stacklevel=2,
        )
    Gamma0 = 2 * g**4 / (J**2 * vg)

    pos = np.array(ensemble.positions)
    seps = sorted({abs(int(a - b)) for a in pos for b in pos})
    fvals = two_phonon_correlation(K0, np.array(seps), ensemble, params, n_k)
    corr = dict(zip(seps, (float(x) for x in np.atleast_1d(fvals))))

    f_pair = np.vectorize(lambda d: corr[abs(int(d))])(pos[:, None] - pos[None, :])
    centre = pos[:, None] + pos[None, :]
    phase = np.exp(1j * K0 * np.abs(centre[None, None, :, :] - centre[:, :, None, None]) / 2)
    A = f_pair[:, :, None, None] * f_pair[None, None, :, :] * phase

    pair_rate = None
    if len(pos) == 2:
        pair_rate = Gamma0 * corr[abs(int(pos[0] - pos[1]))] ** 2
    return RateMatrix(
        K0=float(K0), vg=vg, Gamma0=Gamma0, A=A, Gamma=Gamma0 * A.real, Ucoh=0.5 * Gamma0 * A.imag,
        correlations=corr, pair_rate=pair_rate, markov_ratio=markov_ratio,
    )


def markov_pair_rate(separation: int, ensemble: SpinEnsemble, params: wg.WaveguideParams,
                     n_k: int = DEFAULT_K_POINTS) -> float:
    """Golden-rule decay rate 2 g^4 f_K0(r)^2 / (J^2 v_g(K0)) of a doubly excited spin pair."""
    K0 = solve_K0(ensemble, params)
    vg = group_velocity(K0, params)
    f = two_phonon_correlation(K0, separation, ensemble, params, n_k)
    return float(2 * ensemble.coupling**4 / (params.hopping**2 * vg) * f**2)
