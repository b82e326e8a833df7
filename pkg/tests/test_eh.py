"""Tests for the energy-harvesting transfer functions."""

import numpy as np
import pytest

from swiptsec.eh import (EhParams, omega, phi_linear, phi_nonlinear, psi,
                         psi_derivative)

FIG_PARAMS = EhParams(M=0.024, a=150.0, b=0.014)

# frozen against a 40-digit multiprecision evaluation of the closed forms
PSI_AT_ZERO = 0.0026183237086947105
OMEGA_REF = 0.10909682119561294
PHI_AT_B = 0.010530522860964217


def test_psi_at_zero_frozen_value():
    assert psi(0.0, FIG_PARAMS) == pytest.approx(PSI_AT_ZERO, abs=1e-15)


def test_omega_frozen_value():
    assert omega(FIG_PARAMS) == pytest.approx(OMEGA_REF, abs=1e-15)


def test_phi_nonlinear_zero_input_is_exactly_zero():
    # phi is psi shifted and rescaled so that phi(0) = 0 by construction
    assert phi_nonlinear(0.0, FIG_PARAMS) == pytest.approx(0.0, abs=1e-18)


def test_phi_nonlinear_at_turn_on_threshold():
    # at p = b the sigmoid sits at its midpoint M/2, so
    # phi(b) = M (1/2 - Omega) / (1 - Omega)
    assert phi_nonlinear(FIG_PARAMS.b, FIG_PARAMS) == pytest.approx(
        PHI_AT_B, abs=1e-15)


def test_phi_nonlinear_saturates_at_M():
    assert phi_nonlinear(10.0, FIG_PARAMS) == pytest.approx(FIG_PARAMS.M,
                                                            rel=1e-12)
    assert phi_nonlinear(1e6, FIG_PARAMS) <= FIG_PARAMS.M + 1e-18


def test_phi_nonlinear_monotone_on_grid():
    p = np.linspace(0.0, 0.1, 1000)
    vals = phi_nonlinear(p, FIG_PARAMS)
    assert np.all(np.diff(vals) > 0.0)


def test_psi_matches_direct_sigmoid_formula():
    rng = np.random.default_rng(7)
    p = rng.uniform(0.0, 0.05, size=64)
    direct = FIG_PARAMS.M / (1.0 + np.exp(-FIG_PARAMS.a * (p - FIG_PARAMS.b)))
    np.testing.assert_allclose(psi(p, FIG_PARAMS), direct, rtol=1e-13)


def test_psi_derivative_positive_and_matches_finite_difference():
    p = np.array([0.0, 0.005, FIG_PARAMS.b, 0.03, 0.08])
    d = psi_derivative(p, FIG_PARAMS)
    assert np.all(d > 0.0)
    h = 1e-7
    fd = (psi(p + h, FIG_PARAMS) - psi(p - h, FIG_PARAMS)) / (2.0 * h)
    np.testing.assert_allclose(d, fd, rtol=1e-5)


def test_phi_linear_is_eta_times_input():
    params = EhParams(M=0.02, a=6400.0, b=0.003, eta=0.8)
    assert phi_linear(0.01, params) == pytest.approx(0.008, abs=1e-18)
    assert phi_linear(0.0, params) == 0.0


def test_extreme_steepness_stays_finite():
    params = EhParams(M=0.02, a=6400.0, b=0.003)
    vals = phi_nonlinear(np.array([0.0, 1e3, 1e6]), params)
    assert np.all(np.isfinite(vals))


@pytest.mark.parametrize("kwargs", [
    dict(M=0.0, a=150.0, b=0.014),
    dict(M=-1.0, a=150.0, b=0.014),
    dict(M=0.02, a=0.0, b=0.014),
    dict(M=0.02, a=150.0, b=-0.1),
    dict(M=0.02, a=150.0, b=0.014, eta=1.5),
])
def test_invalid_parameters_rejected(kwargs):
    with pytest.raises(ValueError):
        EhParams(**kwargs)
