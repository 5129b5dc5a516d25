"""Backward-error analysis tests: linear series, modified Lagrangians, drift."""

import math

import numpy as np
import pytest

from geodyn.errors import CircularOrbitError, StabilityBoundaryError, UnknownMethodError
from geodyn.kepler import (
    PhaseState,
    analytic_reference,
    euler_lagrange_on_orbit,
    grad_potential,
    orbit_elements,
)
from geodyn.modified import (
    linear_dispersion,
    linear_measured_frequency,
    linear_modified_series,
    measured_drift_order,
    modified_lagrangian,
    modified_rhs_vi1,
    per_period_drift,
    perturbation_field,
    predicted_drift,
    shadowing_error,
)

BASE = PhaseState(np.array([-3.0, 0.0]), np.array([0.0, 0.45]))
# generic (off-axis) state of the same orbit; periapsis/apoapsis starts sit on
# the orbit's symmetry axis and suppress the leading drift term
GENERIC = analytic_reference(BASE, 3.0)
CCW = PhaseState(np.array([-3.0, 0.0]), np.array([0.0, -0.45]))


class TestLinearSeries:
    def test_leading_term(self):
        assert linear_modified_series(2.5, 0.1, 1) == 2.5

    def test_second_term_coefficient(self):
        # 2 (1!)^2 / 4! = 1/12
        assert abs(linear_modified_series(1.0, 0.1, 2) - (1.0 + 0.01 / 12.0)) < 1e-15

    def test_matches_dispersion_squared(self):
        for lam, h in [(1.0, 0.1), (4.0, 0.2), (0.3, 0.5)]:
            omega = linear_dispersion(lam, h)
            assert abs(linear_modified_series(lam, h, 20) - omega**2) < 1e-12

    def test_divergence_warning(self):
        with pytest.warns(UserWarning):
            linear_modified_series(1.0, 2.1, 5)

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            linear_modified_series(-1.0, 0.1, 5)
        with pytest.raises(ValueError):
            linear_modified_series(1.0, 0.1, 0)


class TestLinearDispersion:
    def test_reference_value(self):
        assert abs(linear_dispersion(1.0, 0.1) - 20.0 * math.asin(0.05)) < 1e-15

    def test_small_h_limit(self):
        assert abs(linear_dispersion(2.0, 1e-6) - math.sqrt(2.0)) < 1e-9

    def test_stability_boundary(self):
        with pytest.raises(StabilityBoundaryError):
            linear_dispersion(1.0, 2.0)
        with pytest.raises(StabilityBoundaryError):
            linear_dispersion(1.0, 2.1)

    def test_measured_frequency_agreement(self):
        omega = linear_dispersion(1.0, 0.1)
        measured = linear_measured_frequency(1.0, 0.1)
        assert abs(measured - omega) / omega < 1e-6

    def test_measured_frequency_unstable(self):
        with pytest.raises(StabilityBoundaryError):
            linear_measured_frequency(1.0, 2.1)


class TestModifiedLagrangian:
    S = PhaseState(np.array([1.0, 0.0]), np.array([0.0, 1.0]))

    @pytest.mark.parametrize("method", ["sym-euler", "sv", "vi1", "vi2"])
    def test_h_zero_is_classical(self, method):
        classical = 0.5 + 1.0   # |v|^2/2 + 1/|x| at S
        assert abs(modified_lagrangian(method, self.S, 0.0) - classical) < 1e-14

    def test_sv_quadratic_coefficient(self):
        # (1/24)(1/r^4 - 2|v|^2/r^3 + 6 (x.v)^2/r^5) = (1 - 2 + 0)/24 at S
        h = 0.2
        coeff = (modified_lagrangian("sv", self.S, h)
                 - modified_lagrangian("sv", self.S, 0.0)) / h**2
        assert abs(coeff + 1.0 / 24.0) < 1e-13

    def test_vi1_linear_term_equal_split(self):
        s = PhaseState(np.array([0.8, -0.5]), np.array([0.3, 0.6]))
        h = 0.1
        term = modified_lagrangian("vi1", s, h) - modified_lagrangian("vi1", s, 0.0)
        r = np.linalg.norm(s.x)
        # adjoint pairing flips the displayed order-h term's sign
        assert abs(term + 0.5 * h * s.x[0] * s.v[0] / r**3) < 1e-13

    def test_unknown_method(self):
        with pytest.raises(UnknownMethodError):
            modified_lagrangian("rk4", self.S, 0.1)

    def test_vi1_rhs_consistent_with_perturbation_field(self):
        eps, lbar = perturbation_field("vi1")
        t, h = 2.0, 0.05
        s = analytic_reference(BASE, t)
        el_vec = euler_lagrange_on_orbit(lbar, BASE, t)
        lhs = modified_rhs_vi1(s.x, s.v, h)
        rhs = -grad_potential(s.x) - eps(h) * el_vec
        assert np.max(np.abs(lhs - rhs)) < 1e-10


class TestPredictedDrift:
    EL = orbit_elements(BASE)

    @pytest.mark.parametrize("method", ["sym-euler", "vi1"])
    def test_first_order_leading_terms_vanish(self, method):
        decc, dangle = predicted_drift(method, self.EL, 0.05, nodes=256)
        assert abs(decc) < 1e-10
        assert abs(dangle) < 1e-10

    def test_sv_ecc_vanishes_angle_matches_measurement(self):
        decc, dangle = predicted_drift("sv", self.EL, 0.05, nodes=256)
        assert abs(decc) < 1e-10
        measured = per_period_drift("sv", "angle", CCW, 0.05)
        assert abs(dangle - measured) / abs(measured) < 0.02

    def test_circular_orbit_rejected(self):
        circ = orbit_elements(PhaseState(np.array([1.0, 0.0]), np.array([0.0, 1.0])))
        with pytest.raises(CircularOrbitError):
            predicted_drift("sv", circ, 0.05)


class TestMeasuredDrift:
    def test_metric_validation(self):
        with pytest.raises(ValueError):
            per_period_drift("sv", "energy", BASE, 0.1)

    def test_needs_enough_levels(self):
        with pytest.raises(ValueError):
            measured_drift_order("sv", "ecc", BASE, hs=(0.5, 0.25))

    def test_sv_superconvergence_small_sweep(self):
        est = measured_drift_order("sv", "ecc", GENERIC,
                                   hs=(0.25, 0.125, 0.0625, 0.03125))
        assert abs(est.fitted_order - 4.0) < 0.4
        assert est.predicted_order == 4.0

    def test_drift_signs_flip_with_orientation(self):
        cw = per_period_drift("sv", "angle", BASE, 0.05)
        ccw = per_period_drift("sv", "angle", CCW, 0.05)
        assert cw == pytest.approx(-ccw, rel=1e-6)


class TestShadowing:
    def test_error_scale(self):
        # gap between vi1 iterates and its truncated modified flow is O(h^2);
        # dropping the O(h) correction would leave an O(h) gap ~0.05 here
        err = shadowing_error(BASE, 0.05)
        assert err < 0.01
