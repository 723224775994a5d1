"""Wavefunction dynamics of spins coupled to the lattice.

Two models live here:

* the full spin + lattice Hamiltonian restricted to one excitation-number
  sector (at most two quanta), with phonon loss as a non-Hermitian
  ``-i kappa/2 * n_phonon`` term (no-jump evolution; a loss event removes the
  pair from the re-excitation channel so it never returns to P_e);
* the reduced two-spin model where the single-phonon amplitudes have been
  eliminated and the doubly excited pair couples directly to the dimer band.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
from scipy.integrate import solve_ivp

from . import waveguide as wg
from .correlation import SpinEnsemble, two_phonon_correlation
from .errors import AdiabaticityWarning, DimensionError, IntegrationError, ValidationError
from .series import TimeSeries

MAX_NONZEROS = 200_000
R2_THRESHOLD = 0.98


@dataclass(frozen=True)
class SectorBasis:
    """Basis of the sector with ``excitations`` quanta shared by spins and phonons.

    Each state is ``(excited_spins, phonon_sites)`` with both tuples sorted;
    bosonic states |n,m> are stored once (n <= m) and are unit normalized.
    """

    n_spins: int
    n_sites: int
    excitations: int
    states: tuple
    index: dict

    @classmethod
    def build(cls, n_spins: int, n_sites: int, excitations: int = 2) -> "SectorBasis":
        if excitations not in (1, 2):
            raise ValidationError("only the one- and two-excitation sectors are supported", "excitations <= 2")
        states = []
        for n_exc_spins in range(min(excitations, n_spins), -1, -1):
            n_ph = excitations - n_exc_spins
            for spins in itertools.combinations(range(n_spins), n_exc_spins):
                for ph in itertools.combinations_with_replacement(range(n_sites), n_ph):
                    states.append((spins, ph))
        states = tuple(states)
        return cls(n_spins, n_sites, excitations, states, {s: i for i, s in enumerate(states)})

    @property
    def dimension(self) -> int:
        return len(self.states)

    def spin_excitation(self, j: int) -> np.ndarray:
        return np.array([1.0 if j in s else 0.0 for s, _ in self.states])

    def phonon_number(self) -> np.ndarray:
        return np.array([float(len(p)) for _, p in self.states])

    def all_excited(self) -> np.ndarray:
        key = (tuple(range(self.n_spins)), ())
        if key not in self.index:
            raise ValidationError(
                f"the fully excited state of {self.n_spins} spins is not in the "
                f"{self.excitations}-excitation sector", "N <= 2 for the default initial state")
        psi = np.zeros(self.dimension, dtype=complex)
        psi[self.index[key]] = 1.0
        return psi


def expected_dimension(n_spins: int, n_sites: int, excitations: int = 2) -> int:
    if excitations == 1:
        return n_spins + n_sites
    return n_spins * (n_spins - 1) // 2 + n_spins * n_sites + n_sites * (n_sites + 1) // 2


def build_sector_hamiltonian(ensemble: SpinEnsemble, params: wg.WaveguideParams, excitations: int | None = None,
                             max_nonzeros: int = MAX_NONZEROS) -> tuple[sparse.csr_matrix, SectorBasis]:
    for p in ensemble.positions:
        if not 0 <= p < params.n_sites:
            raise ValidationError(f"spin position {p} outside the lattice", "0 <= n_j < N_r")
    N = ensemble.n_spins
    excitations = min(N, 2) if excitations is None else excitations
    dim = expected_dimension(N, params.n_sites, excitations)
    # diagonal + 4 hops per phonon pair + two couplings per excited spin
    estimate = dim * (1 + 2 * excitations + 2 * excitations)
    if estimate > max_nonzeros:
        raise DimensionError(f"sector of dimension {dim} needs ~{estimate} nonzeros (cap {max_nonzeros})")
    basis = SectorBasis.build(N, params.n_sites, excitations)

    J, U, kappa = params.hopping, params.nonlinearity, params.phonon_loss
    n_r, w_r, w_e, g = params.n_sites, params.base_frequency, ensemble.frequency, ensemble.coupling
    rows, cols, vals = [], [], []
    for i, (spins, ph) in enumerate(basis.states):
        diag = w_e * len(spins) + (w_r - 0.5j * kappa) * len(ph)
        if len(ph) == 2 and ph[0] == ph[1]:
            diag -= U
        rows.append(i)
        cols.append(i)
        vals.append(diag)
        # -J a^dag_{n+-1} a_n; move each distinct occupied site once
        for site in set(ph):
            occ = ph.count(site)
            rest = list(ph)
            rest.remove(site)
            for step in (1, -1):
                dest = (site + step) % n_r
                new = tuple(sorted(rest + [dest]))
                amp = np.sqrt(occ) * np.sqrt(new.count(dest))
                rows.append(basis.index[(spins, new)])
                cols.append(i)
                vals.append(-J * amp)
        # g a^dag_{n_j} sigma_j^- and its conjugate
        for j in spins:
            site = ensemble.positions[j]
            new_ph = tuple(sorted(ph + (site,)))
            new_spins = tuple(s for s in spins if s != j)
            k = basis.index[(new_spins, new_ph)]
            amp = g * np.sqrt(new_ph.count(site))
            rows += [k, i]
            cols += [i, k]
            vals += [amp, amp]
    H = sparse.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(basis.dimension,) * 2)
    H.sum_duplicates()
    return H, basis


def _observables(basis: SectorBasis, psi: np.ndarray) -> dict:
    prob = np.abs(psi) ** 2
    N = basis.n_spins
    per_spin = [basis.spin_excitation(j) @ prob for j in range(N)]
    out = {"P_e": sum(per_spin) / N}
    for j, v in enumerate(per_spin):
        out[f"P_e_spin_{j}"] = v
    out["phonon_number"] = basis.phonon_number() @ prob
    out["norm"] = np.sqrt(prob.sum())
    return out


def evolve_full(ensemble: SpinEnsemble, params: wg.WaveguideParams, t_grid, state0=None,
                rtol: float = 1e-9, atol: float = 1e-12, method: str = "DOP853") -> TimeSeries:
    """Integrate i d psi/dt = H psi in the sector of the initial state.

    Defaults to all spins excited with the lattice in vacuum (N <= 2).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    H, basis = build_sector_hamiltonian(ensemble, params)
    psi0 = basis.all_excited() if state0 is None else np.asarray(state0, dtype=complex)
    if psi0.shape != (basis.dimension,):
        raise ValidationError(f"initial state has shape {psi0.shape}, sector dimension is {basis.dimension}",
                              "state0 in sector basis")
    if not np.isclose(np.linalg.norm(psi0), 1.0, atol=1e-10):
        raise ValidationError("initial state must be normalized", "||psi0|| = 1")
    mH = (-1j * H).tocsr()
    sol = solve_ivp(lambda t, y: mH @ y, (t_grid[0], t_grid[-1]), psi0, t_eval=t_grid,
                    method=method, rtol=rtol, atol=atol)
    if not sol.success:
        t_fail = float(sol.t[-1]) if sol.t.size else float(t_grid[0])
        raise IntegrationError(f"integrator failed at t={t_fail:.6g}: {sol.message}", t_fail)
    cols = {}
    for psi in sol.y.T:
        for name, value in _observables(basis, psi).items():
            cols.setdefault(name, []).append(value)
    meta = {"model": "full", "positions": list(ensemble.positions), "omega_e": ensemble.frequency,
            "g": ensemble.coupling, "n_sites": params.n_sites, "J": params.hopping,
            "U": params.nonlinearity, "kappa": params.phonon_loss, "dimension": basis.dimension}
    return TimeSeries(sol.t, cols, meta)


def rk4_propagate(H, psi0, t_grid, dt: float) -> np.ndarray:
    """Fixed-step RK4 reference propagator; returns states on ``t_grid``."""
    t_grid = np.asarray(t_grid, dtype=float)
    psi = np.asarray(psi0, dtype=complex).copy()
    out = [psi.copy()]
    f = lambda y: -1j * (H @ y)  # noqa: E731
    for t0, t1 in zip(t_grid[:-1], t_grid[1:]):
        n = max(1, int(np.ceil((t1 - t0) / dt - 1e-12)))
        h = (t1 - t0) / n
        for _ in range(n):
            k1 = f(psi)
            k2 = f(psi + 0.5 * h * k1)
            k3 = f(psi + 0.5 * h * k2)
            k4 = f(psi + h * k3)
            psi = psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(psi.copy())
    return np.array(out)


@dataclass
class AmplitudeState:
    c_e: complex
    c_K: np.ndarray
    time: float = 0.0


def reduced_hamiltonian(ensemble: SpinEnsemble, params: wg.WaveguideParams, n_k: int = 401):
    """Hermitian generator for (c_e, c_K) in the frame rotating at omega_e.

    Returns ``(H, K_grid)``; index 0 is c_e.
    """
    if ensemble.n_spins != 2:
        raise ValidationError("the reduced model describes exactly two spins", "N == 2")
    ensemble.validate(params)
    n1, n2 = ensemble.positions
    K = wg.momentum_grid(params.n_sites)
    g, J = ensemble.coupling, params.hopping
    delta_min = float(np.min(wg.single_phonon_dispersion(wg.momentum_grid(n_k), params) - ensemble.frequency))
    if delta_min < 5 * g:
        warnings.warn(f"adiabatic elimination marginal: min delta_k = {delta_min:.3g} vs g = {g:.3g}",
                      AdiabaticityWarning, stacklevel=2)
    f = np.array([two_phonon_correlation(k, n1 - n2, ensemble, params, n_k) for k in K])
    couple = -(g**2 / (J * np.sqrt(params.n_sites))) * np.exp(1j * K * (n1 + n2) / 2) * f
    H = np.zeros((len(K) + 1,) * 2, dtype=complex)
    H[0, 1:] = couple
    H[1:, 0] = couple.conj()
    H[1:, 1:] = np.diag(wg.bound_state_energy(K, params) - 2 * ensemble.frequency)
    return H, K


def evolve_reduced(ensemble: SpinEnsemble, params: wg.WaveguideParams, t_grid, state0: AmplitudeState | None = None,
                   n_k: int = 401) -> TimeSeries:
    t_grid = np.asarray(t_grid, dtype=float)
    H, K = reduced_hamiltonian(ensemble, params, n_k)
    if state0 is None:
        state0 = AmplitudeState(1.0 + 0j, np.zeros(len(K), dtype=complex))
    y0 = np.concatenate([[state0.c_e], np.asarray(state0.c_K, dtype=complex)])
    w, V = np.linalg.eigh(H)
    coeff = V.conj().T @ y0
    amps = (V[0, :] * coeff)[None, :] * np.exp(-1j * np.outer(t_grid - state0.time, w))
    c_e = amps.sum(axis=1)
    P = np.abs(c_e) ** 2
    meta = {"model": "reduced", "positions": list(ensemble.positions), "omega_e": ensemble.frequency,
            "g": ensemble.coupling, "n_sites": params.n_sites, "U": params.nonlinearity}
    return TimeSeries(t_grid, {"P_e": P, "c_e_real": c_e.real, "c_e_imag": c_e.imag}, meta)


@dataclass(frozen=True)
class ExponentialFit:
    rate: float
    r_squared: float
    intercept: float
    flagged: bool


def fit_exponential_rate(series: TimeSeries, window: tuple | None = None, column: str = "P_e") -> ExponentialFit:
    """Least-squares slope of log(column) over ``window`` (inclusive).

    ``flagged`` marks windows that are not exponential (R^2 < 0.98).
    """
    t = series.times
    y = series[column]
    sel = np.ones_like(t, dtype=bool) if window is None else (t >= window[0]) & (t <= window[1])
    t, y = t[sel], y[sel]
    if len(t) < 2:
        raise ValueError("fit window must contain at least two samples")
    if np.any(y <= 0):
        raise ValueError("exponential fit needs a strictly positive series")
    logy = np.log(y)
    slope, intercept = np.polyfit(t, logy, 1)
    resid = logy - (slope * t + intercept)
    ss_tot = np.sum((logy - logy.mean()) ** 2)
    ss_res = np.sum(resid**2)
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    if ss_tot <= 1e-300:
        slope = 0.0
    return ExponentialFit(float(-slope), float(r2), float(np.exp(intercept)), bool(r2 < R2_THRESHOLD))
