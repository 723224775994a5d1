"""Collective decay of N same-site spins in the symmetric Dicke manifold.

Both collective processes map |S,m> to a single ladder state (m-1 for
single-quantum superradiance, m-2 for pair-emitting supercorrelated
radiance) and have no coherent part, so a density matrix that starts
diagonal stays diagonal. The populations then obey closed rate equations

    superradiance:    dp_m/dt = G (b_{m+1} p_{m+1} - b_m p_m)
    supercorrelated:  dp_m/dt = G (c_{m+2} p_{m+2} - c_m p_m)

with b_m = S(S+1) - m(m-1) and c_m = b_m b_{m-1}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .errors import NoCrossingError, ValidationError
from .series import TimeSeries

MAX_SPINS = 10_000
KINDS = ("superradiance", "supercorrelated")
SNAPSHOT_LEVELS = (0.999, 0.75, 0.5, 0.25)
BIMODAL_FRACTION = 0.1


def _check_kind(kind: str) -> str:
    if kind not in KINDS:
        raise ValidationError(f"kind must be one of {KINDS}, got {kind!r}", "ladder kind")
    return kind


@dataclass(frozen=True)
class LadderRates:
    kind: str
    n_spins: int
    m: np.ndarray  # m = S, S-1, ..., -S
    coefficients: np.ndarray

    @property
    def step(self) -> int:
        return 1 if self.kind == "superradiance" else 2

    @property
    def S(self) -> float:
        return self.n_spins / 2


def ladder_rates(kind: str, n_spins: int) -> LadderRates:
    _check_kind(kind)
    S = n_spins / 2
    m = S - np.arange(n_spins + 1)
    b = S * (S + 1) - m * (m - 1)
    coeff = b if kind == "superradiance" else b * (S * (S + 1) - (m - 1) * (m - 2))
    return LadderRates(kind, n_spins, m, np.clip(coeff, 0.0, None))


@dataclass(frozen=True)
class DickeDistribution:
    S: float
    m: np.ndarray
    populations: np.ndarray
    time: float
    step: int = 1

    def population(self, m_value: float) -> float:
        return float(self.populations[np.argmin(np.abs(self.m - m_value))])

    def to_rows(self):
        return list(zip(self.m, self.populations))


def _generator(rates: LadderRates, start: int) -> tuple[np.ndarray, np.ndarray]:
    """Death-chain generator on the states reachable from index ``start``."""
    idx = np.arange(start, rates.n_spins + 1, rates.step)
    c = rates.coefficients[idx]
    M = np.diag(-c)
    M[np.arange(1, len(idx)), np.arange(len(idx) - 1)] = c[:-1]
    return M, idx


def _integrate(M: np.ndarray, p0: np.ndarray, t_eval: np.ndarray, rate: float) -> np.ndarray:
    """Populations on ``t_eval`` from exact propagators exp(rate M dt), cached per step size."""
    if rate == 0 or len(p0) == 1:
        return np.repeat(p0[:, None], len(t_eval), axis=1)
    A = rate * M
    cache = {}
    out = [expm(A * t_eval[0]) @ p0 if t_eval[0] else p0]
    for dt in np.diff(t_eval):
        key = float(np.round(dt, 15))
        if key not in cache:
            cache[key] = expm(A * dt)
        out.append(cache[key] @ out[-1])
    return np.array(out).T


def dicke_evolve(kind: str, n_spins: int, rate: float, t_grid, snapshots=None, initial_m: float | None = None):
    """Evolve a Dicke point mass; returns (TimeSeries, [DickeDistribution]).

    ``snapshots`` is a list of times; by default the times at which P_e
    first crosses 0.999, 0.75, 0.5 and 0.25 (those reached on the grid).
    """
    _check_kind(kind)
    if not (1 <= n_spins <= MAX_SPINS) or int(n_spins) != n_spins:
        raise ValidationError(f"n_spins must be an integer in [1, {MAX_SPINS}]", "N cap")
    if rate < 0:
        raise ValidationError("rate must be non-negative", "rate >= 0")
    n_spins = int(n_spins)
    rates = ladder_rates(kind, n_spins)
    S = rates.S
    start = 0 if initial_m is None else int(round(S - initial_m))
    if not 0 <= start <= n_spins:
        raise ValidationError(f"initial m outside [-{S}, {S}]", "-S <= m0 <= S")
    M, idx = _generator(rates, start)
    p0 = np.zeros(len(idx))
    p0[0] = 1.0
    t_grid = np.asarray(t_grid, dtype=float)

    def full(y):
        P = np.zeros((n_spins + 1, y.shape[1]))
        P[idx] = y
        P[(P < 0) & (P >= -1e-12)] = 0.0
        return P

    P = full(_integrate(M, p0, t_grid, rate))
    Sz = rates.m @ P
    Pe = (Sz + S) / n_spins
    emitted = rates.step * rate * (rates.coefficients @ P) / n_spins
    series = TimeSeries(t_grid, {"Sz": Sz, "P_e": Pe, "emission_rate": emitted, "total": P.sum(axis=0)},
                        {"kind": kind, "N": n_spins, "rate": rate})

    if snapshots is None:
        snapshots = []
        for level in SNAPSHOT_LEVELS:
            try:
                snapshots.append(half_emission_time(series, level=level))
            except NoCrossingError:
                pass
    snapshots = sorted(float(t) for t in snapshots)
    dists = []
    if snapshots:
        ts = np.array(snapshots)
        if ts[0] > t_grid[0]:
            ts = np.concatenate([[t_grid[0]], ts])
        Ps = full(_integrate(M, p0, np.unique(ts), rate))
        lookup = dict(zip(np.unique(ts), Ps.T))
        for t in snapshots:
            dists.append(DickeDistribution(S, rates.m, lookup[t], t, rates.step))
    return series, dists


def mean_field_evolve(kind: str, n_spins: int, rate: float, t_grid) -> TimeSeries:
    """Factorized moment equation for W = <S_z>, started at W = S."""
    _check_kind(kind)
    S = n_spins / 2
    t_grid = np.asarray(t_grid, dtype=float)
    if kind == "superradiance":
        def rhs(t, W):
            return -rate * (S * (S + 1) - W * (W - 1))
    else:
        def rhs(t, W):
            return -2 * rate * (S * (S + 1) - W * (W - 1)) * (S * (S + 1) - (W - 1) * (W - 2))
    sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), [S], t_eval=t_grid, method="LSODA", rtol=1e-10, atol=1e-12)
    if not sol.success:
        raise RuntimeError(f"mean-field integration failed: {sol.message}")
    W = sol.y[0]
    return TimeSeries(t_grid, {"Sz": W, "P_e": (W + S) / n_spins}, {"kind": kind, "N": n_spins, "closure": "mean-field"})


def mean_field_deviation(master: TimeSeries, mean_field: TimeSeries, n_spins: int) -> float:
    return float(np.max(np.abs(mean_field["Sz"] - master["Sz"])) / n_spins)


def half_emission_time(series: TimeSeries, level: float = 0.5, column: str = "P_e") -> float:
    """First time the column drops below ``level``, linearly interpolated."""
    y = series[column]
    t = series.times
    below = np.flatnonzero(y < level)
    if below.size == 0:
        raise NoCrossingError(f"{column} never drops below {level} on the time grid")
    i = below[0]
    if i == 0:
        return float(t[0])
    return float(np.interp(level, [y[i], y[i - 1]], [t[i], t[i - 1]]))


def _local_maxima(p: np.ndarray) -> list[int]:
    out = []
    for i in range(len(p)):
        left = p[i - 1] if i > 0 else -np.inf
        right = p[i + 1] if i < len(p) - 1 else -np.inf
        if p[i] > 0 and p[i] >= left and p[i] > right:
            out.append(i)
    return out


def distribution_snapshot_report(snapshots) -> list[dict]:
    """Shape summary of each snapshot.

    ``bimodal``: both end states m = +-S are populated and every interior
    population is below 10% of the larger end peak. ``unimodal``: exactly one
    local maximum on the reachable ladder.
    """
    report = []
    for d in snapshots:
        reach = np.arange(0, len(d.m), d.step)
        p = d.populations[reach]
        m = d.m[reach]
        ends = (p[0], p[-1])
        peak = max(ends)
        interior = p[1:-1]
        interior_max = float(interior.max()) if interior.size else 0.0
        bimodal = bool(min(ends) > interior_max and interior_max < BIMODAL_FRACTION * peak)
        maxima = _local_maxima(p)
        argmax = int(np.argmax(d.populations))
        report.append({
            "time": d.time,
            "argmax_m": float(d.m[argmax]),
            "bimodal": bimodal,
            "unimodal": len(maxima) == 1,
            "interior_argmax": bool(0 < np.argmax(p) < len(p) - 1),
            "interior_mass": float(interior.sum()),
            "interior_peak_ratio": interior_max / peak if peak > 0 else float("inf"),
            "local_maxima_m": [float(m[i]) for i in maxima],
        })
    return report
