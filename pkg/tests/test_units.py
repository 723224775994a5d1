import numpy as np
import pytest

from phonon_radiance.errors import ValidationError
from phonon_radiance.units import PhysicalUnits, feasibility_report, format_feasibility


def test_resonator_frequency_and_loss():
    u = PhysicalUnits()
    assert u.omega_r / (2 * np.pi) == pytest.approx(2e9, rel=0.06)
    assert u.kappa / (2 * np.pi) == pytest.approx(2e3, rel=0.06)
    assert u.thermal_occupation < 1e-4
    assert u.zero_point_motion == pytest.approx(np.sqrt(1.054571817e-34 / (2 * u.mass * u.omega_r)))


def test_report_flags_j_inconsistency():
    rep = feasibility_report(PhysicalUnits())
    assert rep["J_ratio_stated_over_implied"] == pytest.approx(2 * np.pi)
    assert rep["stated_J"]["t_max_s"] == pytest.approx(5 / (2 * np.pi * 1e4))
    assert rep["time_implied_J"]["t_max_s"] == pytest.approx(500e-6)
    assert any("500 us" in f for f in rep["flags"])
    assert "J consistency check" in format_feasibility(rep)


def test_consistent_inputs_raise_no_j_flag():
    u = PhysicalUnits(hopping_hz=1e4 / (2 * np.pi), coupling_hz=1e3 / (2 * np.pi))
    rep = feasibility_report(u, {"phonon_loss": u.kappa / u.hopping})
    assert not any("500 us" in f for f in rep["flags"])


def test_rejects_nonpositive_inputs():
    with pytest.raises(ValidationError):
        PhysicalUnits(temperature=0.0)
