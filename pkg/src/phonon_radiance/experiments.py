"""Configuration, dispatch and file output for every experiment.

A run writes its data files into the output directory together with
``manifest.json``. The manifest is written first with status "incomplete"
and rewritten as "complete" once every file is on disk; wall-clock
timestamps live only under its ``timestamps`` key so data files and the rest
of the manifest are byte-identical across repeated runs.
"""

from __future__ import annotations

import copy
import datetime as _dt
import hashlib
import json
import warnings
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import correlation as corr
from . import dicke
from . import lattice
from . import lindblad as lb
from . import units as un
from . import waveguide as wg
from .errors import ValidationError
from .series import TimeSeries, write_csv, write_json

FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8")
EXPERIMENTS = ("band", "corr", "decay", "subradiance", "lindblad", "dicke", "grouped", "feasibility", "reproduce")

DEFAULT_CONFIG = {
    "experiment": "decay",
    "figure": None,
    "waveguide": {"n_sites": 60, "hopping": 1.0, "nonlinearity": 0.7, "phonon_loss": 0.2,
                  "base_frequency": 0.0, "boundary": "periodic"},
    "spins": {"positions": [0, 0], "frequency": -2.03, "coupling": 0.1, "K0": None},
    "numerics": {"t_max": None, "n_t": 201, "tolerance": 1e-9, "k_grid": corr.DEFAULT_K_POINTS,
                 "r_max": 10, "deterministic": True},
    "dicke": {"kind": "supercorrelated", "N": 100, "rate": 1.0, "snapshots": None},
    "grouped": {"positions": [0, 0, 4, 4], "nonlinearity": 4.0, "K0": float(np.pi / 2)},
    "units": {f.name: f.default for f in fields(un.PhysicalUnits)},
    "output": "out",
}


# --- config handling -------------------------------------------------------

def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_override(text: str) -> tuple[list[str], object]:
    """``a.b.c=value``; the value is read as JSON when possible, else as a string."""
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ValidationError(f"override must look like key=value, got {text!r}", "override syntax")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def apply_overrides(config: dict, overrides) -> dict:
    config = copy.deepcopy(config)
    for text in overrides or ():
        path, value = parse_override(text)
        node = config
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValidationError(f"cannot set {'.'.join(path)}: {part} is not a section", "override path")
        node[path[-1]] = value
    return config


def load_config(path=None, overrides=None, base: dict | None = None) -> dict:
    config = copy.deepcopy(base or DEFAULT_CONFIG)
    if path is not None:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}", "readable JSON config") from exc
        if not isinstance(user, dict):
            raise ValidationError("config root must be a JSON object", "config is an object")
        config = _merge(config, user)
    return apply_overrides(config, overrides)


def waveguide_from(config: dict) -> wg.WaveguideParams:
    try:
        return wg.WaveguideParams(**config["waveguide"])
    except TypeError as exc:
        raise ValidationError(f"bad waveguide section: {exc}", "waveguide fields") from exc


def ensemble_from(config: dict, params: wg.WaveguideParams, validate: bool = True) -> corr.SpinEnsemble:
    spins = dict(config["spins"])
    K0 = spins.pop("K0", None)
    if K0 is not None:
        spins["frequency"] = corr.frequency_for_momentum(float(K0), params)
    try:
        ensemble = corr.SpinEnsemble(tuple(spins["positions"]), float(spins["frequency"]), float(spins["coupling"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"bad spins section: {exc}", "spins fields") from exc
    if validate:
        ensemble.validate(params)
    return ensemble


def validate_config(config: dict) -> None:
    """Raise ValidationError naming the violated invariant; never computes physics."""
    exp = config.get("experiment")
    if exp not in EXPERIMENTS:
        raise ValidationError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}", "known experiment")
    if exp == "reproduce" and config.get("figure") not in FIGURES:
        raise ValidationError(f"figure must be one of {FIGURES}, got {config.get('figure')!r}", "known figure")
    num = config["numerics"]
    if num.get("t_max") is not None and not float(num["t_max"]) > 0:
        raise ValidationError("numerics.t_max must be positive", "t_max > 0")
    if int(num["n_t"]) < 2:
        raise ValidationError("numerics.n_t must be at least 2", "n_t >= 2")
    if int(num["k_grid"]) < 3:
        raise ValidationError("numerics.k_grid must be at least 3", "k_grid >= 3")
    if exp == "feasibility":
        un.PhysicalUnits(**config["units"])
        return
    if exp == "dicke":
        d = config["dicke"]
        dicke._check_kind(d["kind"])
        if not (1 <= int(d["N"]) <= dicke.MAX_SPINS):
            raise ValidationError(f"dicke.N must lie in [1, {dicke.MAX_SPINS}]", "N cap")
        if float(d["rate"]) < 0:
            raise ValidationError("dicke.rate must be non-negative", "rate >= 0")
        return
    if exp == "reproduce":
        return
    params = waveguide_from(config)
    if exp == "band":
        if params.n_sites > wg.MAX_ED_SITES:
            raise ValidationError(f"band ED needs n_sites <= {wg.MAX_ED_SITES}", "N_r cap")
        return
    if exp == "grouped":
        g = config["grouped"]
        if len(g["positions"]) > lb.MAX_SPINS:
            raise ValidationError(f"at most {lb.MAX_SPINS} spins", "N cap")
        return
    ensemble = ensemble_from(config, params)
    if exp in ("subradiance", "lindblad") and ensemble.n_spins > lb.MAX_SPINS:
        raise ValidationError(f"at most {lb.MAX_SPINS} spins in the master equation", "N cap")


# --- individual experiments -------------------------------------------------

def _grid(t_max: float, n_t: int) -> np.ndarray:
    return np.linspace(0.0, float(t_max), int(n_t))


def _band_table(params: wg.WaveguideParams) -> tuple[list, list, dict]:
    spectrum = wg.exact_two_excitation_spectrum(params)
    band = wg.bound_state_band(params)
    ed = wg.numeric_band(spectrum, params)
    K = band.k_grid
    rows = []
    for i in np.argsort(K, kind="stable"):
        lo = float(np.min(wg.two_phonon_scattering_energy(K[i], K, params)))
        hi = float(np.max(wg.two_phonon_scattering_energy(K[i], K, params)))
        rows.append((K[i], band.energies[i], ed[i], band.loc_lengths[i], lo, hi,
                     wg.single_phonon_dispersion(K[i], params)))
    header = ["K", "E_analytic", "E_ed", "localization_length", "continuum_min", "continuum_max", "omega_k"]
    continuum_bottom = 2 * params.base_frequency - 4 * params.hopping
    summary = {
        "n_sites": params.n_sites,
        "U": params.nonlinearity,
        "max_abs_dE": float(np.nanmax(np.abs(ed - band.energies))),
        "n_bound": int(spectrum.bound_mask.sum()),
        "n_below_continuum": int(np.sum(spectrum.eigenvalues < continuum_bottom - 1e-9)),
        "ed_dimension": spectrum.dimension,
    }
    return header, rows, summary


def exp_band(config: dict, out: Path) -> dict:
    params = waveguide_from(config)
    header, rows, summary = _band_table(params)
    write_csv(out / "band.csv", header, rows, {"U": params.nonlinearity, "n_sites": params.n_sites})
    write_json(out / "summary.json", summary)
    return summary


def exp_corr(config: dict, out: Path) -> dict:
    params = waveguide_from(config)
    ensemble = ensemble_from(config, params)
    n_k = int(config["numerics"]["k_grid"])
    r_max = int(config["numerics"]["r_max"])
    rates = corr.pairwise_rate_matrix(ensemble, params, n_k=n_k)
    r = np.arange(-r_max, r_max + 1)
    f = corr.two_phonon_correlation(rates.K0, r, ensemble, params, n_k)
    write_csv(out / "correlation.csv", ["r", "f"], zip(r, f),
              {"K0": rates.K0, "U": params.nonlinearity, "omega_e": ensemble.frequency})
    write_json(out / "rates.json", rates.to_json_dict())
    summary = {"K0": rates.K0, "K0_over_pi": rates.K0 / np.pi, "vg": rates.vg, "Gamma0": rates.Gamma0,
               "markov_ratio": rates.markov_ratio, "pair_rate": rates.pair_rate,
               "f": {str(int(a)): float(b) for a, b in zip(r, f)}}
    write_json(out / "summary.json", summary)
    return summary


def exp_decay(config: dict, out: Path) -> dict:
    params = waveguide_from(config)
    ensemble = ensemble_from(config, params)
    num = config["numerics"]
    t = _grid(num["t_max"] or 5.0, num["n_t"])
    tol = float(num["tolerance"])
    full = lattice.evolve_full(ensemble, params, t, rtol=tol, atol=tol * 1e-3)
    full.to_csv(out / "decay.csv")
    fit = lattice.fit_exponential_rate(full)
    summary = {"fit_rate": fit.rate, "fit_r_squared": fit.r_squared, "fit_flagged": fit.flagged,
               "P_e_final": float(full["P_e"][-1])}
    if ensemble.n_spins == 2:
        params0 = params.replace(phonon_loss=0.0)
        summary["markov_rate"] = corr.markov_pair_rate(
            ensemble.positions[0] - ensemble.positions[1], ensemble, params0, int(num["k_grid"]))
        reduced = lattice.evolve_reduced(ensemble, params0, t, n_k=int(num["k_grid"]))
        reduced.to_csv(out / "reduced.csv")
        summary["max_full_vs_reduced"] = float(np.max(np.abs(reduced["P_e"] - full["P_e"])))
    write_json(out / "summary.json", summary)
    return summary


def _lindblad_run(ensemble, params, t_max, n_t, n_k, snapshots=False):
    rates = corr.pairwise_rate_matrix(ensemble, params, n_k=n_k)
    L = lb.build_pair_liouvillian(rates, ensemble)
    scale = rates.Gamma0 * rates.correlations[0] ** 2
    t = _grid(t_max if t_max else 50.0 / scale, n_t)
    rho0 = lb.all_excited_density(ensemble.n_spins)
    series, snaps = lb.evolve_density_matrix(rho0, L, t, snapshots=snapshots)
    return rates, L, series, snaps, rho0


def exp_lindblad(config: dict, out: Path) -> dict:
    params = waveguide_from(config)
    ensemble = ensemble_from(config, params)
    num = config["numerics"]
    rates, L, series, snaps, _ = _lindblad_run(ensemble, params, num["t_max"], num["n_t"], int(num["k_grid"]),
                                               snapshots=True)
    series.to_csv(out / "lindblad.csv")
    write_json(out / "rates.json", rates.to_json_dict())
    for label, i in (("initial", 0), ("final", len(snaps) - 1)):
        write_density_matrix(out / f"rho_{label}.csv", snaps[i], series.times[i])
    summary = {"P_e_final": float(series["P_e"][-1]),
               "max_trace_error": float(series["trace_error"].max()),
               "max_hermiticity_error": float(series["hermiticity_error"].max()),
               "min_eigenvalue": float(series["min_eigenvalue"].min())}
    write_json(out / "summary.json", summary)
    return summary


def write_density_matrix(path, rho: np.ndarray, time: float):
    """Real and imaginary parts as one CSV with row/column index headers."""
    d = rho.shape[0]
    header = ["row", *(f"re_{j}" for j in range(d)), *(f"im_{j}" for j in range(d))]
    rows = [(i, *rho[i].real, *rho[i].imag) for i in range(d)]
    return write_csv(path, header, rows, {"time": float(time), "basis": "computational, spin 0 most significant"})


def _dark_summary(L, rho0) -> dict:
    dark = lb.find_subradiant_states(L, rho0)
    return {
        "predicted_plateau": lb.predict_plateau(L, rho0),
        "dark_states": [{"excitations": d.excitations, "energy": d.energy, "initial_overlap": d.initial_overlap,
                         "occupation": d.occupation} for d in dark],
    }


def exp_subradiance(config: dict, out: Path) -> dict:
    params = waveguide_from(config)
    ensemble = ensemble_from(config, params)
    num = config["numerics"]
    rates, L, series, _, rho0 = _lindblad_run(ensemble, params, num["t_max"], num["n_t"], int(num["k_grid"]))
    series.to_csv(out / "subradiance.csv")
    summary = {"K0": rates.K0, "P_e_final": float(series["P_e"][-1]), **_dark_summary(L, rho0)}
    write_json(out / "summary.json", summary)
    return summary


def _dicke_grid(kind: str, N: int, rate: float, n_t: int) -> np.ndarray:
    """Three mean absorption times of the ladder, so P_e has essentially vanished."""
    lr = dicke.ladder_rates(kind, N)
    c = lr.coefficients[::lr.step]
    c = c[c > 0]
    return _grid(3.0 * np.sum(1.0 / (rate * c)), n_t)


def _dicke_outputs(kind, N, rate, t, snapshots, out: Path, prefix: str) -> dict:
    series, snaps = dicke.dicke_evolve(kind, N, rate, t, snapshots)
    mf = dicke.mean_field_evolve(kind, N, rate, t)
    combined = TimeSeries(t, {**series.columns, "Sz_mean_field": mf["Sz"], "P_e_mean_field": mf["P_e"]},
                          dict(series.meta))
    combined.to_csv(out / f"{prefix}.csv")
    for i, d in enumerate(snaps):
        write_csv(out / f"{prefix}_snapshot_{i}.csv", ["m", "p"], d.to_rows(), {"time": d.time, "S": d.S})
    report = dicke.distribution_snapshot_report(snaps)
    return {
        "half_emission_time": dicke.half_emission_time(series),
        "peak_emission_rate": float(series["emission_rate"].max()),
        "mean_field_deviation": dicke.mean_field_deviation(series, mf, N),
        "snapshots": report,
        "max_odd_offset_population": float(max((np.abs(d.populations[1::2]).max() for d in snaps), default=0.0))
        if kind == "supercorrelated" else None,
    }


def exp_dicke(config: dict, out: Path) -> dict:
    d = config["dicke"]
    num = config["numerics"]
    kind, N, rate = d["kind"], int(d["N"]), float(d["rate"])
    t = _grid(num["t_max"], num["n_t"]) if num["t_max"] else _dicke_grid(kind, N, rate, num["n_t"])
    summary = {"kind": kind, "N": N, "rate": rate, **_dicke_outputs(kind, N, rate, t, d["snapshots"], out, "dicke")}
    write_json(out / "summary.json", summary)
    return summary


def _grouped(U, g, config, out: Path, name: str) -> dict:
    num = config["numerics"]
    t = _grid(num["t_max"], num["n_t"]) if num["t_max"] else None
    rep = lb.grouped_superradiance_experiment(
        U, positions=tuple(g["positions"]), K0=float(g["K0"]), coupling=float(config["spins"]["coupling"]),
        n_sites=int(config["waveguide"]["n_sites"]), t_grid=t, n_k=int(num["k_grid"]))
    rep.series().to_csv(out / f"{name}.csv")
    return rep.to_json_dict(curves_ref=f"{name}.csv")


def exp_grouped(config: dict, out: Path) -> dict:
    g = config["grouped"]
    summary = _grouped(float(g["nonlinearity"]), g, config, out, "grouped")
    write_json(out / "summary.json", summary)
    return summary


def exp_feasibility(config: dict, out: Path) -> dict:
    units = un.PhysicalUnits(**config["units"])
    dimless = {"coupling": config["spins"]["coupling"], "nonlinearity": config["waveguide"]["nonlinearity"],
               "phonon_loss": config["waveguide"]["phonon_loss"], "t_max": config["numerics"]["t_max"] or 5.0}
    report = un.feasibility_report(units, dimless)
    write_json(out / "feasibility.json", report)
    (out / "feasibility.txt").write_text(un.format_feasibility(report) + "\n", encoding="utf-8")
    return report


# --- figure reproductions ---------------------------------------------------

def fig2(config: dict, out: Path) -> dict:
    summary = {}
    for U in (2.0, 4.0):
        params = wg.WaveguideParams(41, nonlinearity=U)
        header, rows, s = _band_table(params)
        write_csv(out / f"band_U{U:g}.csv", header, rows, {"U": U, "n_sites": 41})
        summary[f"U{U:g}"] = s
    rows = []
    K = np.linspace(-np.pi, np.pi, 201)
    for U in np.linspace(0.0, 6.0, 61):
        p = wg.WaveguideParams(41, nonlinearity=U)
        bound = wg.bound_state_energy(K, p) if U > 0 else np.full_like(K, np.nan)
        rows.append((U, -4.0, 4.0, np.nanmin(bound) if U > 0 else np.nan, np.nanmax(bound) if U > 0 else np.nan))
    write_csv(out / "band_vs_U.csv", ["U", "continuum_min", "continuum_max", "bound_min", "bound_max"], rows)
    write_json(out / "summary.json", summary)
    return summary


def fig3(config: dict, out: Path) -> dict:
    r = np.arange(-10, 11)
    rows = []
    for U in np.round(np.linspace(0.5, 6.0, 23), 10):
        p = wg.WaveguideParams(41, nonlinearity=float(U))
        e = corr.SpinEnsemble((0,), corr.frequency_for_momentum(0.0, p))
        f = corr.two_phonon_correlation(0.0, r, e, p)
        rows += [(U, ri, fi) for ri, fi in zip(r, f)]
    write_csv(out / "fig3a.csv", ["U", "r", "f"], rows, {"K": 0.0})
    rows = []
    summary = {}
    for U, K in ((4.0, 0.46 * np.pi), (4.0, 0.0), (3.0, 0.3 * np.pi), (6.0, 0.5 * np.pi)):
        p = wg.WaveguideParams(41, nonlinearity=U)
        e = corr.SpinEnsemble((0,), corr.frequency_for_momentum(K, p))
        f = corr.two_phonon_correlation(K, r, e, p)
        rows += [(U, K, ri, fi) for ri, fi in zip(r, f)]
        summary[f"U{U:g}_K{K / np.pi:.2f}pi"] = {"f3_over_f0": float(f[13] / f[10]),
                                                 "evenness": float(np.max(np.abs(f - f[::-1])))}
    write_csv(out / "fig3b.csv", ["U", "K", "r", "f"], rows)
    write_json(out / "summary.json", summary)
    return summary


FIG4 = {"n_sites": 60, "frequency": -2.03, "coupling": 0.1, "nonlinearity": 0.7, "phonon_loss": 0.2}


def fig4(config: dict, out: Path) -> dict:
    p = wg.WaveguideParams(FIG4["n_sites"], nonlinearity=FIG4["nonlinearity"], phonon_loss=FIG4["phonon_loss"])
    t = _grid(5.0, 201)
    cols, summary = {}, {}
    for label, pos in (("N1", (0,)), ("r0", (0, 0)), ("r5", (0, 5)), ("r10", (0, 10))):
        e = corr.SpinEnsemble(pos, FIG4["frequency"], FIG4["coupling"])
        s = lattice.evolve_full(e, p, t)
        cols[f"P_e_{label}"] = s["P_e"]
        fit = lattice.fit_exponential_rate(s)
        summary[label] = {"fit_rate": fit.rate, "r_squared": fit.r_squared, "flagged": fit.flagged,
                          "P_e_final": float(s["P_e"][-1])}
    e = corr.SpinEnsemble((0, 0), FIG4["frequency"], FIG4["coupling"])
    p0 = p.replace(phonon_loss=0.0)
    cols["P_e_reduced_r0"] = lattice.evolve_reduced(e, p0, t)["P_e"]
    rates = corr.pairwise_rate_matrix(e, p0)
    summary["markov"] = {"K0": rates.K0, "vg": rates.vg, "rate_r0": rates.pair_rate, "markov_ratio": rates.markov_ratio}
    summary["max_full_vs_reduced_r0"] = float(np.max(np.abs(cols["P_e_reduced_r0"] - cols["P_e_r0"])))
    summary["residual_ratio_N1_over_r0"] = summary["N1"]["P_e_final"] / summary["r0"]["P_e_final"]
    TimeSeries(t, cols, {"omega_e": FIG4["frequency"], **{k: v for k, v in FIG4.items() if k != "frequency"}}
               ).to_csv(out / "fig4.csv")
    write_json(out / "summary.json", summary)
    return summary


def fig5a_runs(n_t: int = 201):
    p = wg.WaveguideParams(41, nonlinearity=4.0)
    K0 = 0.46 * np.pi
    omega = corr.frequency_for_momentum(K0, p)
    out = {}
    for r in (2, 3, 4):
        e = corr.SpinEnsemble((0, r), omega)
        out[r] = corr.pairwise_rate_matrix(e, p, K0=K0), e
    fast = min(4 * rm.pair_rate for rm, _ in (out[2], out[4]))
    t = _grid(5.0 / fast, n_t)
    series = {}
    for r, (rm, e) in out.items():
        L = lb.build_pair_liouvillian(rm, e)
        series[r], _ = lb.evolve_density_matrix(lb.all_excited_density(2), L, t)
    return t, series, {r: rm for r, (rm, _) in out.items()}


def fig5b_runs(n_t: int = 201):
    p = wg.WaveguideParams(41, nonlinearity=1.0)
    res = {}
    for r in range(5):
        e = corr.SpinEnsemble(tuple(r * i for i in range(4)), -2.04, 0.1)
        rates = corr.pairwise_rate_matrix(e, p)
        L = lb.build_pair_liouvillian(rates, e)
        t = _grid(50.0 / (rates.Gamma0 * rates.correlations[0] ** 2), n_t)
        rho0 = lb.all_excited_density(4)
        s, _ = lb.evolve_density_matrix(rho0, L, t)
        res[r] = (s, rates, L, rho0)
    return res


def fig5(config: dict, out: Path) -> dict:
    t, series, rms = fig5a_runs()
    TimeSeries(t, {f"P_e_r{r}": s["P_e"] for r, s in series.items()}, {"U": 4.0, "K0_over_pi": 0.46}
               ).to_csv(out / "fig5a.csv")
    summary = {"a": {f"r{r}": {"pair_rate": rm.pair_rate, "f": rm.correlations[r], "P_e_final": float(series[r]["P_e"][-1])}
                     for r, rm in rms.items()}}
    summary["b"] = {}
    for r, (s, rates, L, rho0) in fig5b_runs().items():
        s.to_csv(out / f"fig5b_r{r}.csv")
        summary["b"][f"r{r}"] = {"K0": rates.K0, "P_e_final": float(s["P_e"][-1]), "t_final": float(s.times[-1]),
                                 **_dark_summary(L, rho0)}
    write_json(out / "summary.json", summary)
    return summary


def fig6_runs(N: int = 100, rate: float = 1.0, n_t: int = 2001):
    res = {}
    for kind in dicke.KINDS:
        t = _dicke_grid(kind, N, rate, n_t)
        series, _ = dicke.dicke_evolve(kind, N, rate, t, snapshots=[])
        mf = dicke.mean_field_evolve(kind, N, rate, t)
        res[kind] = (series, mf)
    return res


def fig6(config: dict, out: Path) -> dict:
    N = 100
    summary = {}
    for kind, (series, mf) in fig6_runs(N).items():
        TimeSeries(series.times, {**series.columns, "Sz_mean_field": mf["Sz"], "P_e_mean_field": mf["P_e"]},
                   dict(series.meta)).to_csv(out / f"fig6_{kind}.csv")
        summary[kind] = {"half_emission_time": dicke.half_emission_time(series),
                         "mean_field_deviation": dicke.mean_field_deviation(series, mf, N),
                         "peak_emission_rate": float(series["emission_rate"].max())}
    summary["half_time_ratio"] = (summary["superradiance"]["half_emission_time"]
                                  / summary["supercorrelated"]["half_emission_time"])
    write_json(out / "summary.json", summary)
    return summary


def fig7(config: dict, out: Path) -> dict:
    N = 100
    summary = {}
    for kind, prefix in (("supercorrelated", "fig7"), ("superradiance", "fig7_inset")):
        t = _dicke_grid(kind, N, 1.0, 2001)
        series, snaps = dicke.dicke_evolve(kind, N, 1.0, t)
        for i, d in enumerate(snaps):
            write_csv(out / f"{prefix}_snapshot_{i}.csv", ["m", "p"], d.to_rows(), {"time": d.time, "S": d.S})
        summary[kind] = dicke.distribution_snapshot_report(snaps)
    write_json(out / "summary.json", summary)
    return summary


def fig8(config: dict, out: Path) -> dict:
    g = dict(DEFAULT_CONFIG["grouped"])
    base = {"spins": {"coupling": 0.1}, "waveguide": {"n_sites": 41}, "numerics": {"t_max": None, "n_t": 401,
                                                                                   "k_grid": corr.DEFAULT_K_POINTS}}
    summary = {f"U{U:g}": _grouped(U, g, base, out, f"fig8_U{U:g}") for U in (3.0, 4.0)}
    write_json(out / "summary.json", summary)
    return summary


RUNNERS = {"band": exp_band, "corr": exp_corr, "decay": exp_decay, "subradiance": exp_subradiance,
           "lindblad": exp_lindblad, "dicke": exp_dicke, "grouped": exp_grouped, "feasibility": exp_feasibility}
FIGURE_RUNNERS = {"fig2": fig2, "fig3": fig3, "fig4": fig4, "fig5": fig5, "fig6": fig6, "fig7": fig7, "fig8": fig8}


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(config: dict, out_dir=None) -> dict:
    """Validate, execute and record one experiment; returns the manifest."""
    config = _merge(DEFAULT_CONFIG, config)
    validate_config(config)
    out = Path(out_dir if out_dir is not None else config["output"])
    out.mkdir(parents=True, exist_ok=True)
    name = config["figure"] if config["experiment"] == "reproduce" else config["experiment"]
    manifest = {"experiment": config["experiment"], "name": name, "config": config, "status": "incomplete",
                "files": {}, "warnings": [], "timestamps": {"started": _now()}}
    write_json(out / "manifest.json", manifest)
    runner = FIGURE_RUNNERS[name] if config["experiment"] == "reproduce" else RUNNERS[name]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        summary = runner(config, out)
    seen = []
    for w in caught:
        text = f"{w.category.__name__}: {w.message}"
        if text not in seen:
            seen.append(text)
    manifest.update(
        status="complete",
        warnings=seen,
        files={p.name: _digest(p) for p in sorted(out.iterdir()) if p.is_file() and p.name != "manifest.json"},
    )
    manifest["timestamps"]["finished"] = _now()
    write_json(out / "manifest.json", manifest)
    manifest["summary"] = summary
    return manifest
