"""Tests for Fresnel coefficients and degree-of-polarization curves."""

import math
import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polarsep.models.fresnel import InterfaceSpec
from polarsep.services.fresnel import (
    brewster_angle,
    dop_crossover_angle,
    dop_curve,
    dop_reflected,
    dop_transmitted,
    fresnel_power_coefficients,
    mean_transmittance,
)
from polarsep.utils.validation import ParameterError


def test_normal_incidence_reflectance():
    coeffs = fresnel_power_coefficients(InterfaceSpec(n=1.5, theta_i=0.0))
    assert coeffs.rs == pytest.approx(0.04, abs=1e-12)
    assert coeffs.rp == pytest.approx(0.04, abs=1e-12)


def test_brewster_angle_values():
    assert brewster_angle(1.7) == pytest.approx(1.0390723, abs=1e-6)
    assert brewster_angle(1.0) == pytest.approx(math.pi / 4)


@pytest.mark.parametrize("n", [0.0, -1.0])
def test_brewster_rejects_non_positive_index(n):
    with pytest.raises(ParameterError):
        brewster_angle(n)


def test_p_reflectance_vanishes_at_brewster():
    coeffs = fresnel_power_coefficients(InterfaceSpec(n=1.7, theta_i=brewster_angle(1.7)))
    assert coeffs.rp < 1e-12
    assert coeffs.rs > 0


def test_near_grazing_reflectance_approaches_one():
    coarse = fresnel_power_coefficients(InterfaceSpec.from_degrees(1.5, 89.9))
    assert coarse.rs == pytest.approx(1.0, abs=1e-2)
    assert coarse.rp == pytest.approx(1.0, abs=2e-2)
    fine = fresnel_power_coefficients(InterfaceSpec.from_degrees(1.5, 89.99))
    assert fine.rs == pytest.approx(1.0, abs=1e-2)
    assert fine.rp == pytest.approx(1.0, abs=1e-2)


@pytest.mark.parametrize("theta", [math.pi / 2, 2.0, -0.1])
def test_interface_rejects_out_of_range_angle(theta):
    with pytest.raises(ParameterError):
        InterfaceSpec(n=1.7, theta_i=theta)


def test_interface_rejects_index_not_above_one():
    with pytest.raises(ParameterError):
        InterfaceSpec(n=1.0)


@given(st.floats(1.01, 3.0), st.floats(0.0, 1.5))
def test_energy_conservation(n, theta):
    coeffs = fresnel_power_coefficients(InterfaceSpec(n=n, theta_i=theta))
    assert coeffs.rs + coeffs.ts == pytest.approx(1.0, abs=1e-12)
    assert coeffs.rp + coeffs.tp == pytest.approx(1.0, abs=1e-12)
    assert 0.0 <= dop_reflected(InterfaceSpec(n=n, theta_i=theta)) <= 1.0 + 1e-12


def test_reflected_dop_is_one_at_brewster():
    spec = InterfaceSpec(n=1.7, theta_i=math.atan(1.7))
    assert dop_reflected(spec) == pytest.approx(1.0, abs=1e-12)


def test_zero_dop_at_normal_incidence():
    spec = InterfaceSpec(n=1.7, theta_i=0.0)
    assert dop_reflected(spec) == 0.0
    assert dop_transmitted(spec) == 0.0


def test_reflected_more_polarized_below_crossover():
    started = time.perf_counter()
    for degrees in range(1, 81):
        spec = InterfaceSpec.from_degrees(1.7, degrees)
        assert dop_reflected(spec) > dop_transmitted(spec), degrees
    assert time.perf_counter() - started < 0.1


def test_crossover_angle():
    crossover = dop_crossover_angle(1.7)
    assert brewster_angle(1.7) < crossover < math.pi / 2
    spec = InterfaceSpec(n=1.7, theta_i=crossover)
    assert dop_reflected(spec) == pytest.approx(dop_transmitted(spec), abs=1e-9)
    coeffs = fresnel_power_coefficients(spec)
    assert coeffs.rs + coeffs.rp == pytest.approx(1.0, abs=1e-9)
    above = InterfaceSpec(n=1.7, theta_i=crossover + math.radians(2.0))
    assert dop_transmitted(above) > dop_reflected(above)


def test_mean_transmittance():
    assert mean_transmittance(InterfaceSpec(n=1.5, theta_i=0.0)) == pytest.approx(0.96, abs=1e-12)
    assert mean_transmittance(InterfaceSpec.from_degrees(1.5, 80.0)) < 0.96


def test_transmitted_dop_grows_with_angle():
    values = [dop_transmitted(InterfaceSpec.from_degrees(1.7, d)) for d in range(0, 90, 5)]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_dop_curve_table():
    curve = dop_curve(1.7, 91)
    assert list(curve.columns) == ["theta_deg", "rho_r", "rho_t"]
    assert len(curve) == 91
    assert curve["theta_deg"].iloc[0] == 0.0
    assert curve["theta_deg"].iloc[-1] == 90.0
    peak = curve.loc[curve["rho_r"].idxmax()]
    assert peak["theta_deg"] == 60.0
    assert peak["rho_r"] > 0.999
    assert np.all((curve[["rho_r", "rho_t"]].to_numpy() >= 0) & (curve[["rho_r", "rho_t"]].to_numpy() <= 1 + 1e-12))


def test_dop_curve_rejects_single_sample():
    with pytest.raises(ParameterError):
        dop_curve(1.7, 1)
