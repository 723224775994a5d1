"""Density-matrix evolution under collective pair emission.

The generator is

    d rho/dt = -i [H, rho]
               + sum_{ij,kl} Gamma_{ij,kl}/2 (L_ij rho L_kl^+ - rho L_kl^+ L_ij) + h.c.,
    H = 1/2 sum_{ij,kl} (Ucoh_{ij,kl} L_kl^+ L_ij + h.c.),   L_ij = sigma_i^- sigma_j^-,

with the sums over ordered spin pairs. Internally the real symmetric
pair-rate matrix is diagonalized once, which turns the double sum into a
handful of effective jump operators; the dynamics is unchanged.

Spin basis: computational states of the spins in ensemble order, spin 0 is
the most significant bit and bit value 1 means excited.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from . import dicke
from . import waveguide as wg
from .correlation import RateMatrix, SpinEnsemble, frequency_for_momentum, pairwise_rate_matrix
from .errors import DimensionError, IntegrationError, PositivityError, ValidationError
from .series import TimeSeries

MAX_SPINS = 8
MAX_SPECTRAL_SPINS = 5
TRACE_TOL = 1e-8
HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-8
DARK_TOL = 1e-10


def lowering(n_spins: int, j: int) -> np.ndarray:
    """sigma_j^- on the full 2^N space."""
    dim = 2**n_spins
    bit = 1 << (n_spins - 1 - j)
    op = np.zeros((dim, dim))
    for s in range(dim):
        if s & bit:
            op[s ^ bit, s] = 1.0
    return op


def excitation_numbers(n_spins: int) -> np.ndarray:
    return np.array([bin(s).count("1") for s in range(2**n_spins)])


def spin_projectors(n_spins: int) -> list[np.ndarray]:
    """Diagonals of sigma_j^+ sigma_j^- for each spin."""
    s = np.arange(2**n_spins)
    return [((s >> (n_spins - 1 - j)) & 1).astype(float) for j in range(n_spins)]


def basis_state(n_spins: int, excited) -> np.ndarray:
    idx = sum(1 << (n_spins - 1 - j) for j in excited)
    psi = np.zeros(2**n_spins, dtype=complex)
    psi[idx] = 1.0
    return psi


def all_excited_density(n_spins: int) -> np.ndarray:
    psi = basis_state(n_spins, range(n_spins))
    return np.outer(psi, psi.conj())


@dataclass(frozen=True)
class PairLiouvillian:
    n_spins: int
    rates: np.ndarray  # Gamma_{ij,kl}
    couplings: np.ndarray  # Ucoh_{ij,kl}
    pairs: tuple
    hamiltonian: np.ndarray
    jump_rates: np.ndarray  # eigenvalues of the pair-rate matrix kept as channels
    jumps: tuple  # effective jump operators, one per channel
    h_eff: np.ndarray = field(repr=False)

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * (self.h_eff @ rho - rho @ self.h_eff.conj().T)
        for g, L in zip(self.jump_rates, self.jumps):
            out += g * (L @ rho @ L.conj().T)
        return out

    def superoperator(self) -> np.ndarray:
        """Row-major vectorized generator, vec(A X B) = (A kron B^T) vec(X)."""
        if self.n_spins > MAX_SPECTRAL_SPINS:
            raise DimensionError(f"dense superoperator limited to {MAX_SPECTRAL_SPINS} spins")
        d = 2**self.n_spins
        eye = np.eye(d)
        S = -1j * (np.kron(self.h_eff, eye) - np.kron(eye, self.h_eff.conj()))
        for g, L in zip(self.jump_rates, self.jumps):
            S += g * np.kron(L, L.conj())
        return S


def _pair_kernel(tensor: np.ndarray, pairs) -> np.ndarray:
    return np.array([[tensor[i, j, k, l] for (k, l) in pairs] for (i, j) in pairs])


def build_pair_liouvillian(rates: RateMatrix | None, ensemble: SpinEnsemble | None = None, *,
                           Gamma: np.ndarray | None = None, Ucoh: np.ndarray | None = None) -> PairLiouvillian:
    """Assemble the pair-emission generator from a RateMatrix (or raw tensors)."""
    if rates is not None:
        Gamma, Ucoh = rates.Gamma, rates.Ucoh
    Gamma = np.asarray(Gamma, dtype=float)
    Ucoh = np.zeros_like(Gamma) if Ucoh is None else np.asarray(Ucoh, dtype=float)
    N = Gamma.shape[0]
    if ensemble is not None and ensemble.n_spins != N:
        raise ValidationError("rate tensor size does not match the ensemble", "len(rates) == N")
    if N > MAX_SPINS:
        raise DimensionError(f"{N} spins exceeds the density-matrix cap of {MAX_SPINS}")
    if Gamma.shape != (N,) * 4 or Ucoh.shape != (N,) * 4:
        raise ValidationError("rate tensors must have shape (N, N, N, N)", "tensor shape")
    pairs = tuple((i, j) for i in range(N) for j in range(N) if i != j)
    G = _pair_kernel(Gamma, pairs) if pairs else np.zeros((0, 0))
    Uc = _pair_kernel(Ucoh, pairs) if pairs else np.zeros((0, 0))
    for name, M in (("Gamma", G), ("Ucoh", Uc)):
        if M.size and not np.allclose(M, M.T, atol=1e-12 * max(1.0, np.abs(M).max())):
            raise ValidationError(f"{name}_ij,kl must be symmetric under (ij) <-> (kl)", "Hermitian rate tensor")

    dim = 2**N
    sm = [lowering(N, j) for j in range(N)]
    L = [sm[i] @ sm[j] for i, j in pairs]
    H = np.zeros((dim, dim), dtype=complex)
    for a in range(len(pairs)):
        for b in range(len(pairs)):
            if Uc[a, b] != 0:
                H += 0.5 * Uc[a, b] * (L[b].T @ L[a])
    H = H + H.conj().T

    jump_rates, jumps = [], []
    if G.size:
        w, v = np.linalg.eigh(G)
        cut = 1e-13 * max(1.0, np.abs(w).max())
        for g, vec in zip(w, v.T):
            if abs(g) > cut:
                jump_rates.append(float(g))
                jumps.append(sum(c * op for c, op in zip(vec, L)))
    h_eff = H.copy()
    for g, op in zip(jump_rates, jumps):
        h_eff -= 0.5j * g * (op.conj().T @ op)
    return PairLiouvillian(N, Gamma, Ucoh, pairs, H, np.array(jump_rates), tuple(jumps), h_eff)


def check_density_matrix(rho: np.ndarray) -> dict:
    herm = float(np.abs(rho - rho.conj().T).max())
    trace = complex(np.trace(rho))
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    return {"hermiticity_error": herm, "trace_error": abs(trace - 1.0), "min_eigenvalue": min_eig}


def evolve_density_matrix(rho0: np.ndarray, L: PairLiouvillian, t_grid, snapshots: bool = False,
                          rtol: float = 1e-10, atol: float = 1e-13, check: bool = True):
    """Integrate the master equation; returns (TimeSeries, snapshots or None).

    Every recorded state is checked against the trace, Hermiticity and
    positivity tolerances; a violation raises PositivityError.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    d = 2**L.n_spins
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (d, d):
        raise ValidationError(f"rho0 must be {d}x{d}", "rho0 shape")
    diag0 = check_density_matrix(rho0)
    if diag0["trace_error"] > TRACE_TOL or diag0["hermiticity_error"] > HERMITIAN_TOL or \
            diag0["min_eigenvalue"] < -POSITIVITY_TOL:
        raise ValidationError(f"rho0 is not a density matrix: {diag0}", "valid rho0")

    if L.n_spins <= MAX_SPECTRAL_SPINS:
        times, states = t_grid, _propagate_exact(L, rho0.ravel(), t_grid)
    else:
        sol = solve_ivp(lambda t, y: L.rhs(y.reshape(d, d)).ravel(), (t_grid[0], t_grid[-1]), rho0.ravel(),
                        t_eval=t_grid, method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            t_fail = float(sol.t[-1]) if sol.t.size else float(t_grid[0])
            raise IntegrationError(f"master equation integration failed at t={t_fail:.6g}: {sol.message}", t_fail)
        times, states = sol.t, sol.y.T

    proj = spin_projectors(L.n_spins)
    cols = {"P_e": [], **{f"P_e_spin_{j}": [] for j in range(L.n_spins)},
            "trace_error": [], "hermiticity_error": [], "min_eigenvalue": []}
    snaps = []
    for t, y in zip(times, states):
        rho = y.reshape(d, d)
        pops = np.real(np.diag(rho))
        per = [p @ pops for p in proj]
        cols["P_e"].append(sum(per) / L.n_spins)
        for j, v in enumerate(per):
            cols[f"P_e_spin_{j}"].append(v)
        diag = check_density_matrix(rho)
        for key, value in diag.items():
            cols[key].append(value)
        if check and (diag["trace_error"] > TRACE_TOL or diag["hermiticity_error"] > HERMITIAN_TOL
                      or diag["min_eigenvalue"] < -POSITIVITY_TOL):
            raise PositivityError(f"density matrix left the physical set at t={t:.6g}", {"time": t, **diag})
        if snapshots:
            snaps.append(rho.copy())
    series = TimeSeries(times, cols, {"model": "pair-lindblad", "n_spins": L.n_spins})
    return series, (snaps if snapshots else None)


def _propagate_exact(L: PairLiouvillian, y0: np.ndarray, t_grid: np.ndarray) -> np.ndarray:
    """Step the vectorized state with exact propagators exp(L dt), cached per step size."""
    S = L.superoperator()
    cache = {}
    out = [y0]
    for dt in np.diff(t_grid):
        key = float(np.round(dt, 12))
        if key not in cache:
            cache[key] = expm(S * dt)
        out.append(cache[key] @ out[-1])
    return np.array(out)


def _null_space(M: np.ndarray, rtol: float = DARK_TOL) -> np.ndarray:
    if M.size == 0 or M.shape[0] == 0:
        return np.eye(M.shape[1], dtype=complex)
    u, s, vh = np.linalg.svd(M)
    scale = max(s.max(initial=0.0), 1e-300)
    rank = int(np.sum(s > rtol * scale))
    return vh[rank:].conj().T


@dataclass(frozen=True)
class DarkState:
    vector: np.ndarray
    energy: float
    excitations: int
    initial_overlap: float
    occupation: float | None = None


def find_subradiant_states(L: PairLiouvillian, rho0: np.ndarray | None = None) -> list[DarkState]:
    """States annihilated by every pair jump channel and invariant under H.

    Computed sector by sector in excitation number, so each dark state has a
    definite number of excitations. ``initial_overlap`` is |<d|e...e>|^2;
    ``occupation`` is <d|rho_inf|d> for the asymptotic state reached from
    ``rho0`` (when given).
    """
    N = L.n_spins
    nexc = excitation_numbers(N)
    psi_e = basis_state(N, range(N))
    rho_inf = asymptotic_state(L, rho0) if rho0 is not None else None
    out = []
    for n in range(N + 1):
        idx = np.flatnonzero(nexc == n)
        if L.jumps:
            stack = np.vstack([op[:, idx] for op in L.jumps])
        else:
            stack = np.zeros((0, len(idx)))
        Q = _null_space(stack)
        Hs = L.hamiltonian[np.ix_(idx, idx)]
        # shrink to the largest H-invariant subspace inside the kernel
        while Q.shape[1]:
            leak = Hs @ Q - Q @ (Q.conj().T @ Hs @ Q)
            keep = _null_space(leak, rtol=1e-9) if np.abs(leak).max() > 1e-12 else np.eye(Q.shape[1])
            if keep.shape[1] == Q.shape[1]:
                break
            Q = Q @ keep
        if not Q.shape[1]:
            continue
        w, v = np.linalg.eigh(Q.conj().T @ Hs @ Q)
        for e, c in zip(w, v.T):
            vec = np.zeros(2**N, dtype=complex)
            vec[idx] = Q @ c
            occ = None if rho_inf is None else float(np.real(vec.conj() @ rho_inf @ vec))
            out.append(DarkState(vec, float(e), n, float(abs(vec.conj() @ psi_e) ** 2), occ))
    return out


def asymptotic_state(L: PairLiouvillian, rho0: np.ndarray) -> np.ndarray:
    """Projection of rho0 onto the stationary modes of the generator.

    Uses right and left null spaces of the dense superoperator; oscillating
    coherences between dark states of different energy are dropped (they
    carry no population).
    """
    S = L.superoperator()
    d = 2**L.n_spins
    R = _null_space(S, rtol=1e-10)
    Lf = _null_space(S.conj().T, rtol=1e-10)
    M = Lf.conj().T @ R
    coeff = np.linalg.solve(M, Lf.conj().T @ np.asarray(rho0, dtype=complex).ravel())
    return (R @ coeff).reshape(d, d)


def predict_plateau(L: PairLiouvillian, rho0: np.ndarray) -> float:
    """Long-time P_e implied by the stationary (dark-state) modes."""
    rho = asymptotic_state(L, rho0)
    return float(np.real(np.diag(rho)) @ excitation_numbers(L.n_spins)) / L.n_spins


@dataclass
class GroupedReport:
    params: dict
    times: np.ndarray
    P_e_pairwise: np.ndarray
    P_e_grouped: np.ndarray
    deviation_max: float
    deviation_L2: float
    group_rate: float
    correlations: dict

    def to_json_dict(self, curves_ref: str | None = None) -> dict:
        return {
            "params": self.params,
            "deviation_max": self.deviation_max,
            "deviation_L2": self.deviation_L2,
            "group_rate": self.group_rate,
            "correlations": {str(k): v for k, v in self.correlations.items()},
            "curves": curves_ref,
        }

    def series(self) -> TimeSeries:
        return TimeSeries(self.times, {"P_e_pairwise": self.P_e_pairwise, "P_e_grouped": self.P_e_grouped},
                          {k: v for k, v in self.params.items()})


def group_lindblad_evolution(n_groups: int, pair_rate: float, t_grid) -> np.ndarray:
    """Group-collective master equation on n_groups two-level 'group qubits'.

    d rho/dt = 2 Gamma (2 S rho S^+ - rho S^+ S - S^+ S rho), S = sum of group
    lowering operators. Returns the fraction of excited groups.
    """
    sm = [lowering(n_groups, j) for j in range(n_groups)]
    S = sum(sm)
    K = np.zeros((n_groups,) * 4)
    # one effective channel S with rate 4*Gamma written through the generic builder
    d = 2**n_groups
    h_eff = -0.5j * 4 * pair_rate * (S.T @ S)
    L = PairLiouvillian(n_groups, K, K, (), np.zeros((d, d)), np.array([4 * pair_rate]), (S,), h_eff)
    series, _ = evolve_density_matrix(all_excited_density(n_groups), L, t_grid)
    return series["P_e"]


def grouped_superradiance_experiment(U: float, positions=(0, 0, 4, 4), K0: float = np.pi / 2,
                                     coupling: float = 0.1, n_sites: int = 41, t_grid=None,
                                     n_k: int = 401) -> GroupedReport:
    """Pairwise master equation for paired spins vs. the group-superradiance model.

    Spins must come in same-site pairs. The spin frequency is tuned so that
    K0 is resonant. Time grid defaults to [0, 2/Gamma] with Gamma = Gamma0 f(0)^2.
    """
    positions = tuple(int(p) for p in positions)
    if len(positions) % 2:
        raise ValidationError("grouped experiment needs spins in same-site pairs", "even N")
    pairs = [positions[i:i + 2] for i in range(0, len(positions), 2)]
    if any(a != b for a, b in pairs):
        raise ValidationError("each consecutive pair of spins must share a site", "same-site groups")
    params = wg.WaveguideParams(n_sites=n_sites, nonlinearity=U)
    ensemble = SpinEnsemble(positions, frequency_for_momentum(K0, params), coupling)
    rates = pairwise_rate_matrix(ensemble, params, K0=K0, n_k=n_k)
    pair_rate = rates.Gamma0 * rates.correlations[0] ** 2
    if t_grid is None:
        t_grid = np.linspace(0.0, 2.0 / pair_rate, 401)
    t_grid = np.asarray(t_grid, dtype=float)
    L = build_pair_liouvillian(rates, ensemble)
    series, _ = evolve_density_matrix(all_excited_density(len(positions)), L, t_grid)
    grouped = group_lindblad_evolution(len(pairs), pair_rate, t_grid)
    diff = series["P_e"] - grouped
    span = t_grid[-1] - t_grid[0]
    l2 = float(np.sqrt(np.trapezoid(diff**2, t_grid) / span)) if span > 0 else 0.0
    report_params = {"U": U, "positions": list(positions), "K0": K0, "g": coupling, "n_sites": n_sites,
                     "omega_e": ensemble.frequency, "Gamma0": rates.Gamma0, "Gamma": pair_rate,
                     "Gamma_D": 4 * pair_rate}
    return GroupedReport(report_params, t_grid, series["P_e"], grouped, float(np.abs(diff).max()), l2,
                         pair_rate, rates.correlations)


def dicke_reference(n_groups: int, pair_rate: float, t_grid) -> np.ndarray:
    """Same group dynamics from the Dicke ladder with n_groups emitters at rate 4*Gamma."""
    series, _ = dicke.dicke_evolve("superradiance", n_groups, 4 * pair_rate, t_grid)
    return series["P_e"]
