"""Band structure of the Kerr-nonlinear phononic lattice.

Closed forms for the single-phonon band, the two-phonon scattering continuum
and the two-phonon bound-state (dimer) band, plus an exact diagonalization of
the two-excitation block used as an independent check of those closed forms.

Energies are in units of the hopping ``J`` and ``base_frequency`` (the
resonator frequency) is conventionally zero, i.e. everything lives in the
frame rotating at the bare resonator frequency.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

from .errors import DimensionError, ValidationError

MAX_ED_SITES = 80


@dataclass(frozen=True)
class WaveguideParams:
    n_sites: int
    hopping: float = 1.0
    nonlinearity: float = 0.0
    phonon_loss: float = 0.0
    base_frequency: float = 0.0
    boundary: str = "periodic"

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 3:
            raise ValidationError(f"n_sites must be an integer >= 3, got {self.n_sites}", "n_sites >= 3")
        if not self.hopping > 0:
            raise ValidationError(f"hopping must be positive, got {self.hopping}", "J > 0")
        if self.nonlinearity < 0:
            raise ValidationError(f"nonlinearity must be >= 0, got {self.nonlinearity}", "U >= 0")
        if self.phonon_loss < 0:
            raise ValidationError(f"phonon_loss must be >= 0, got {self.phonon_loss}", "kappa >= 0")
        if self.boundary != "periodic":
            raise ValidationError(f"only periodic boundaries are supported, got {self.boundary!r}",
                                  "boundary == periodic")
        object.__setattr__(self, "n_sites", int(self.n_sites))

    def replace(self, **changes) -> "WaveguideParams":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return WaveguideParams(**values)


def momentum_grid(n_sites: int) -> np.ndarray:
    """Allowed quasi-momenta 2*pi*j/n_sites folded into (-pi, pi]."""
    j = np.arange(n_sites) - (n_sites - 1) // 2
    return 2 * np.pi * j / n_sites


def single_phonon_dispersion(k, params: WaveguideParams):
    return params.base_frequency - 2 * params.hopping * np.cos(k)


def two_phonon_scattering_energy(K, q, params: WaveguideParams):
    """Energy of two free phonons with total momentum K and relative momentum q."""
    return 2 * params.base_frequency - 4 * params.hopping * np.cos(K / 2) * np.cos(q)


def _require_bound(params: WaveguideParams):
    if not params.nonlinearity > 0:
        raise ValidationError("the bound-state band needs a positive nonlinearity U", "U > 0")


def bound_state_energy(K, params: WaveguideParams):
    _require_bound(params)
    J, U = params.hopping, params.nonlinearity
    return 2 * params.base_frequency - np.sqrt(U**2 + 16 * J**2 * np.cos(K / 2) ** 2)


def inverse_localization_length(K, params: WaveguideParams):
    """1/lambda_K; infinite where cos(K/2) vanishes (hard-core dimer)."""
    _require_bound(params)
    c = np.abs(np.cos(np.asarray(K, dtype=float) / 2))
    with np.errstate(divide="ignore"):
        ratio = np.where(c > 1e-15, params.nonlinearity / (4 * params.hopping * np.maximum(c, 1e-300)), np.inf)
    return np.arcsinh(ratio)


def localization_length(K, params: WaveguideParams):
    """Width (in sites) of the dimer's relative wavefunction.

    Returns 0 at K = +-pi, where the two phonons sit on the same site.
    """
    a = inverse_localization_length(K, params)
    with np.errstate(divide="ignore"):
        lam = np.where(np.isinf(a), 0.0, 1.0 / a)
    return lam if np.ndim(lam) else float(lam)


def relative_amplitude_at_contact(K, params: WaveguideParams):
    """phi_K(0) for sum_d |phi_K(d)|^2 = 1, i.e. sqrt(tanh(1/lambda_K))."""
    a = inverse_localization_length(K, params)
    out = np.sqrt(np.tanh(a))
    return out if np.ndim(out) else float(out)


def relative_wavefunction(K, d, params: WaveguideParams):
    """Normalized relative wavefunction phi_K(d) = phi_K(0) exp(-|d|/lambda_K)."""
    a = inverse_localization_length(K, params)
    d = np.abs(np.asarray(d))
    phi0 = np.sqrt(np.tanh(a))
    if np.isinf(a):
        return np.where(d == 0, 1.0, 0.0)
    return phi0 * np.exp(-a * d)


@dataclass(frozen=True)
class BoundStateBand:
    k_grid: np.ndarray
    energies: np.ndarray
    loc_lengths: np.ndarray
    separations: np.ndarray
    rel_wavefunction: np.ndarray  # shape (len(k_grid), len(separations))


def bound_state_band(params: WaveguideParams, k_grid=None, d_max: int = 10) -> BoundStateBand:
    k_grid = momentum_grid(params.n_sites) if k_grid is None else np.asarray(k_grid, dtype=float)
    d = np.arange(-d_max, d_max + 1)
    table = np.array([relative_wavefunction(K, d, params) for K in k_grid])
    return BoundStateBand(
        k_grid=k_grid,
        energies=bound_state_energy(k_grid, params),
        loc_lengths=np.asarray(localization_length(k_grid, params), dtype=float),
        separations=d,
        rel_wavefunction=table,
    )


# --- exact diagonalization of the two-phonon block -------------------------

def pair_basis(n_sites: int) -> list[tuple[int, int]]:
    return [(n, m) for n in range(n_sites) for m in range(n, n_sites)]


def _symmetrizer(n_sites: int, pairs) -> sparse.csr_matrix:
    """Isometry from symmetric Fock states |n<=m> into the ordered product space."""
    rows, cols, vals = [], [], []
    for col, (n, m) in enumerate(pairs):
        if n == m:
            rows.append(n * n_sites + n)
            cols.append(col)
            vals.append(1.0)
        else:
            s = 1 / np.sqrt(2)
            rows += [n * n_sites + m, m * n_sites + n]
            cols += [col, col]
            vals += [s, s]
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n_sites**2, len(pairs)))


def _single_particle_hamiltonian(params: WaveguideParams) -> sparse.csr_matrix:
    n = params.n_sites
    hop = sparse.diags([np.ones(n - 1), np.ones(n - 1)], [1, -1], shape=(n, n), format="lil")
    hop[0, n - 1] = 1
    hop[n - 1, 0] = 1
    return (params.base_frequency * sparse.identity(n) - params.hopping * hop.tocsr()).tocsr()


def two_excitation_hamiltonian(params: WaveguideParams) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Dense two-phonon block in the symmetric basis {|n,m>, n<=m}.

    Assembled in first quantization, h (x) 1 + 1 (x) h - U sum_n |nn><nn|,
    then projected onto the bosonic subspace.
    """
    n = params.n_sites
    if n > MAX_ED_SITES:
        raise DimensionError(f"n_sites={n} exceeds the exact-diagonalization cap of {MAX_ED_SITES}")
    h1 = _single_particle_hamiltonian(params)
    eye = sparse.identity(n, format="csr")
    contact = np.zeros(n * n)
    contact[np.arange(n) * (n + 1)] = 1.0
    h2 = sparse.kron(h1, eye) + sparse.kron(eye, h1) - params.nonlinearity * sparse.diags(contact)
    pairs = pair_basis(n)
    p = _symmetrizer(n, pairs)
    return (p.T @ h2 @ p).toarray(), pairs


def bound_state_ansatz(K: float, params: WaveguideParams, pairs=None) -> np.ndarray:
    """Normalized dimer trial state with centre-of-mass momentum K in the pair basis."""
    n_sites = params.n_sites
    pairs = pair_basis(n_sites) if pairs is None else pairs
    n = np.array([p[0] for p in pairs])
    m = np.array([p[1] for p in pairs])
    d = m - n
    wrapped = d > n_sites / 2
    sep = np.where(wrapped, n_sites - d, d)
    centre = np.where(wrapped, n + m + n_sites, n + m) / 2
    amp = np.exp(1j * K * centre) * relative_wavefunction(K, sep, params)
    amp = np.where(d == 0, amp, np.sqrt(2) * amp)
    return amp / np.linalg.norm(amp)


@dataclass(frozen=True)
class TwoExcitationSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, pair basis
    basis: list
    k_grid: np.ndarray
    bound_weight: np.ndarray  # projection of each eigenvector onto the dimer ansatz span
    bound_threshold: float = 0.5
    dimension: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "dimension", len(self.basis))

    @property
    def bound_mask(self) -> np.ndarray:
        return self.bound_weight > self.bound_threshold

    @property
    def bound_energies(self) -> np.ndarray:
        return self.eigenvalues[self.bound_mask]


def exact_two_excitation_spectrum(params: WaveguideParams, bound_threshold: float = 0.5) -> TwoExcitationSpectrum:
    h, pairs = two_excitation_hamiltonian(params)
    w, v = np.linalg.eigh(h)
    k_grid = momentum_grid(params.n_sites)
    if params.nonlinearity > 0:
        ansatz = np.array([bound_state_ansatz(K, params, pairs) for K in k_grid])
        weight = np.sum(np.abs(ansatz.conj() @ v) ** 2, axis=0)
    else:
        weight = np.zeros(len(w))
    return TwoExcitationSpectrum(w, v, pairs, k_grid, weight, bound_threshold)


def numeric_band(spectrum: TwoExcitationSpectrum, params: WaveguideParams) -> np.ndarray:
    """ED bound-state energies matched to ``spectrum.k_grid`` by energy ordering.

    E_K is monotone in |K| and even, so sorting both lists pairs each grid
    momentum with its numerical eigenvalue (the +-K doublets coincide).
    Missing bound states are reported as NaN.
    """
    analytic = bound_state_energy(spectrum.k_grid, params)
    numeric = np.sort(spectrum.bound_energies)
    out = np.full(len(analytic), np.nan)
    order = np.argsort(analytic, kind="stable")
    take = min(len(order), len(numeric))
    out[order[:take]] = numeric[:take]
    return out


def relative_profile(spectrum: TwoExcitationSpectrum, index: int, n_sites: int) -> np.ndarray:
    """|phi(d)| of an eigenvector for d = 0..n_sites//2, averaged over the centre.

    Undoes the sqrt(2) weight that the symmetric basis puts on n != m.
    """
    vec = spectrum.eigenvectors[:, index]
    acc = np.zeros(n_sites // 2 + 1)
    cnt = np.zeros_like(acc)
    for amp, (n, m) in zip(vec, spectrum.basis):
        d = m - n
        d = min(d, n_sites - d)
        acc[d] += abs(amp) / (1.0 if d == 0 else np.sqrt(2))
        cnt[d] += 1
    # d = n_sites/2 (even rings) is reached from both sides of the ring
    return acc / np.maximum(cnt, 1)


def fit_decay_length(profile: np.ndarray, d_max: float) -> float:
    """Least-squares decay length of log|phi(d)| over 0 <= d <= d_max."""
    d = np.arange(len(profile))
    sel = (d <= d_max) & (profile > 0)
    if sel.sum() < 2:
        raise ValueError("need at least two nonzero points to fit a decay length")
    slope = np.polyfit(d[sel], np.log(profile[sel]), 1)[0]
    return -1.0 / slope
