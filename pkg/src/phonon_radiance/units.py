"""Conversion of dimensionless lattice parameters into laboratory units for a
diamond cantilever array with embedded NV spins."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import constants

from .errors import ValidationError

TWO_PI = 2 * np.pi
BEAM_MODE_CONSTANT = 4.73


@dataclass(frozen=True)
class PhysicalUnits:
    length: float = 850e-9
    width: float = 80e-9
    thickness: float = 80e-9
    youngs_modulus: float = 1200e9
    density: float = 3500.0
    quality_factor: float = 1e6
    temperature: float = 10e-3
    hopping_hz: float = 10e3  # J / 2pi
    coupling_hz: float = 1e3  # g / 2pi
    T1: float = 1.0
    T2: float = 1e-3

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise ValidationError(f"{name} must be positive, got {value}", f"{name} > 0")

    @property
    def omega_r(self) -> float:
        """Fundamental bending-mode angular frequency (rad/s)."""
        return BEAM_MODE_CONSTANT**2 * self.thickness / self.length**2 * np.sqrt(self.youngs_modulus / (12 * self.density))

    @property
    def kappa(self) -> float:
        return self.omega_r / self.quality_factor

    @property
    def mass(self) -> float:
        return self.density * self.length * self.width * self.thickness

    @property
    def zero_point_motion(self) -> float:
        return float(np.sqrt(constants.hbar / (2 * self.mass * self.omega_r)))

    @property
    def thermal_occupation(self) -> float:
        x = constants.hbar * self.omega_r / (constants.k * self.temperature)
        return float(1 / np.expm1(x))

    @property
    def hopping(self) -> float:
        """J in rad/s."""
        return TWO_PI * self.hopping_hz


def feasibility_report(units: PhysicalUnits, dimensionless: dict | None = None) -> dict:
    """Laboratory-scale numbers for a dimensionless run.

    ``dimensionless`` may carry ``coupling``, ``nonlinearity``, ``phonon_loss``,
    ``t_max`` and ``rate`` in units of J (times in 1/J). Two readings of J are
    reported: the stated J/2pi, and the J implied by quoting t = 5/J as 500 us.
    """
    d = {"coupling": 0.1, "nonlinearity": 0.7, "phonon_loss": 0.2, "t_max": 5.0, "rate": None}
    d.update(dimensionless or {})
    J = units.hopping
    J_from_time = 5.0 / 500e-6
    flags = []

    def readings(J_value):
        out = {
            "J_rad_s": J_value,
            "J_over_2pi_hz": J_value / TWO_PI,
            "g_over_2pi_hz": d["coupling"] * J_value / TWO_PI,
            "U_over_2pi_hz": d["nonlinearity"] * J_value / TWO_PI,
            "kappa_over_2pi_hz": d["phonon_loss"] * J_value / TWO_PI,
            "t_max_s": d["t_max"] / J_value,
        }
        if d.get("rate") is not None:
            out["rate_s"] = d["rate"] * J_value
        return out

    stated, implied = readings(J), readings(J_from_time)
    mismatch = J / J_from_time
    if not np.isclose(mismatch, 1.0, rtol=0.05):
        flags.append(
            f"J/2pi = {units.hopping_hz:g} Hz gives 5/J = {5 / J * 1e6:.1f} us, but a 500 us run time "
            f"implies J = {J_from_time:g} s^-1 (J/2pi = {J_from_time / TWO_PI:.1f} Hz); ratio {mismatch:.2f}"
        )
    physical_g = d["coupling"] * J / TWO_PI
    if not np.isclose(physical_g, units.coupling_hz, rtol=0.05):
        flags.append(f"dimensionless g = {d['coupling']} J corresponds to g/2pi = {physical_g:g} Hz, "
                     f"not the stated {units.coupling_hz:g} Hz")
    kappa_in_J = units.kappa / J
    if not np.isclose(kappa_in_J, d["phonon_loss"], rtol=0.5):
        flags.append(f"intrinsic kappa = omega_r/Q is {kappa_in_J:.3g} J, while the run uses {d['phonon_loss']} J")
    for label, r in (("stated J", stated), ("time-implied J", implied)):
        if r["t_max_s"] > units.T2:
            flags.append(f"run duration {r['t_max_s'] * 1e6:.1f} us exceeds T2 = {units.T2 * 1e6:.0f} us ({label})")

    return {
        "inputs": asdict(units),
        "omega_r_rad_s": units.omega_r,
        "omega_r_over_2pi_hz": units.omega_r / TWO_PI,
        "kappa_rad_s": units.kappa,
        "kappa_over_2pi_hz": units.kappa / TWO_PI,
        "mass_kg": units.mass,
        "zero_point_motion_m": units.zero_point_motion,
        "thermal_occupation": units.thermal_occupation,
        "T1_s": units.T1,
        "T2_s": units.T2,
        "dimensionless": d,
        "stated_J": stated,
        "time_implied_J": implied,
        "J_ratio_stated_over_implied": mismatch,
        "flags": flags,
    }


def format_feasibility(report: dict) -> str:
    lines = [
        f"omega_r / 2pi      = {report['omega_r_over_2pi_hz'] / 1e9:.4f} GHz",
        f"kappa / 2pi        = {report['kappa_over_2pi_hz'] / 1e3:.4f} kHz",
        f"zero-point motion  = {report['zero_point_motion_m']:.3e} m",
        f"thermal occupation = {report['thermal_occupation']:.3e}",
    ]
    for label in ("stated_J", "time_implied_J"):
        r = report[label]
        lines.append(f"{label:<18} : J = {r['J_rad_s']:.4g} s^-1 (J/2pi = {r['J_over_2pi_hz']:.4g} Hz), "
                     f"t_max = {r['t_max_s'] * 1e6:.2f} us")
    lines.append(f"J consistency check: stated/implied = {report['J_ratio_stated_over_implied']:.4f}")
    lines += [f"FLAG: {f}" for f in report["flags"]]
    return "\n".join(lines)
