"""Integrator tests: elementary steps, Legendre transforms, DEL equivalence."""

import math

import numpy as np
import pytest

from geodyn.errors import SingularOriginError, UnknownMethodError
from geodyn.integrators import (
    LAGRANGIAN_IDS,
    METHOD_IDS,
    TwoStepState,
    bootstrap_first_point,
    del_two_step_vi1,
    discrete_lagrangian,
    legendre_fd,
    legendre_minus,
    legendre_plus,
    one_step_map,
    run,
    step_stormer_verlet,
    step_sv_one_step,
    step_sym_euler,
    step_sym_euler_adjoint,
    step_vi1,
    step_vi1_adjoint,
    step_vi2,
    substep_flow,
    substep_flow_adjoint,
)
from geodyn.kepler import PhaseState, analytic_reference, energy, kepler_split, orbit_elements

S0 = PhaseState(np.array([0.4, 0.0]), np.array([0.0, 2.0]))
S_WIDE = PhaseState(np.array([-3.0, 0.0]), np.array([0.0, 0.45]))
SPLIT = kepler_split()
H = 0.05


class TestElementarySteps:
    def test_sym_euler_worked_example(self):
        s = step_sym_euler(S0, H)
        assert np.max(np.abs(s.v - np.array([-0.3125, 2.0]))) < 1e-14
        assert np.max(np.abs(s.x - np.array([0.384375, 0.1]))) < 1e-14

    def test_substep_worked_example(self):
        s = substep_flow(1, S0, SPLIT, H)
        assert np.max(np.abs(s.x - S0.x)) < 1e-14   # v1 = 0: no drift
        assert np.max(np.abs(s.v - np.array([-0.15625, 2.0]))) < 1e-14

    def test_substep_index_range(self):
        with pytest.raises(ValueError):
            substep_flow(3, S0, SPLIT, H)
        with pytest.raises(ValueError):
            substep_flow(0, S0, SPLIT, H)

    def test_stormer_verlet_linear_field(self):
        ts = TwoStepState(np.array([1.0, 0.0]), np.array([1.0, 0.0]), 0.1)
        out = step_stormer_verlet(ts, grad=lambda x: x)
        assert np.max(np.abs(out - np.array([0.99, 0.0]))) < 1e-15

    def test_sv_one_step_matches_recurrence(self):
        s1 = step_sv_one_step(S0, H)
        s2 = step_sv_one_step(s1, H)
        rec = step_stormer_verlet(TwoStepState(S0.x, s1.x, H))
        assert np.max(np.abs(rec - s2.x)) < 1e-13

    def test_drift_through_origin_rejected(self):
        s = PhaseState(np.array([1.0, 0.0]), np.array([-1.0, 0.0]))
        with pytest.raises(SingularOriginError):
            substep_flow(1, s, SPLIT, 2.0)


class TestAdjoints:
    """Phi*_h is the inverse of Phi_{-h}; composition must return the start."""

    def test_sym_euler_adjoint_identity(self):
        fwd = step_sym_euler_adjoint(S0, H)
        back = step_sym_euler(fwd, -H)
        assert np.max(np.abs(back.x - S0.x)) < 1e-13
        assert np.max(np.abs(back.v - S0.v)) < 1e-13

    def test_vi1_adjoint_identity(self):
        fwd = step_vi1_adjoint(S0, SPLIT, H)
        back = step_vi1(fwd, SPLIT, -H)
        assert np.max(np.abs(back.x - S0.x)) < 1e-13
        assert np.max(np.abs(back.v - S0.v)) < 1e-13

    def test_substep_adjoint_identity(self):
        fwd = substep_flow_adjoint(2, S0, SPLIT, H)
        back = substep_flow(2, fwd, SPLIT, -H)
        assert np.max(np.abs(back.x - S0.x)) < 1e-14

    @pytest.mark.parametrize("variant", ["adjoint-first", "adjoint-last"])
    def test_vi2_is_self_adjoint(self, variant):
        fwd = step_vi2(S0, SPLIT, H, variant=variant)
        back = step_vi2(fwd, SPLIT, -H, variant=variant)
        assert np.max(np.abs(back.x - S0.x)) < 1e-13
        assert np.max(np.abs(back.v - S0.v)) < 1e-13

    def test_vi2_unknown_variant(self):
        with pytest.raises(UnknownMethodError):
            step_vi2(S0, SPLIT, H, variant="nope")

    def test_vi1_single_part_collapses_to_sym_euler(self):
        single = kepler_split((1.0, 0.0))
        a = step_vi1(S0, single, H)
        b = step_sym_euler(S0, H)
        assert np.max(np.abs(a.x - b.x)) == 0.0
        assert np.max(np.abs(a.v - b.v)) == 0.0


class TestSymplecticity:
    OMEGA = np.array([[0.0, 0.0, 1.0, 0.0],
                      [0.0, 0.0, 0.0, 1.0],
                      [-1.0, 0.0, 0.0, 0.0],
                      [0.0, -1.0, 0.0, 0.0]])

    @pytest.mark.parametrize("method", METHOD_IDS)
    def test_jacobian_preserves_two_form(self, method):
        step = one_step_map(method, SPLIT)
        z0 = np.concatenate([S0.x, S0.v])
        delta = 1e-6
        jac = np.empty((4, 4))
        for j in range(4):
            e = np.zeros(4)
            e[j] = delta
            sp = step(PhaseState((z0 + e)[:2], (z0 + e)[2:]), H)
            sm = step(PhaseState((z0 - e)[:2], (z0 - e)[2:]), H)
            jac[:, j] = (np.concatenate([sp.x, sp.v])
                         - np.concatenate([sm.x, sm.v])) / (2 * delta)
        defect = jac.T @ self.OMEGA @ jac - self.OMEGA
        assert np.max(np.abs(defect)) < 1e-5


class TestDiscreteLagrangians:
    X0 = np.array([0.4, 0.0])
    X1 = np.array([0.384375, 0.1])

    @pytest.mark.parametrize("lag_id", LAGRANGIAN_IDS)
    def test_closed_form_matches_finite_differences(self, lag_id):
        pm_fd, pp_fd = legendre_fd(lag_id, self.X0, self.X1, H, SPLIT)
        pm = legendre_minus(lag_id, self.X0, self.X1, H, SPLIT)
        pp = legendre_plus(lag_id, self.X0, self.X1, H, SPLIT)
        assert np.max(np.abs(pm - pm_fd)) < 1e-7
        assert np.max(np.abs(pp - pp_fd)) < 1e-7

    def test_adjoint_lagrangian_value(self):
        a = discrete_lagrangian("Lstar", self.X0, self.X1, H, SPLIT)
        b = discrete_lagrangian("L1st", self.X1, self.X0, -H, SPLIT)
        assert abs(a - b) < 1e-14

    def test_single_part_l1st_reduces_to_l1(self):
        single = kepler_split((1.0, 0.0))
        a = discrete_lagrangian("L1st", self.X0, self.X1, H, single)
        b = discrete_lagrangian("L1", self.X0, self.X1, H)
        assert abs(a - b) < 1e-14

    def test_unknown_lagrangian(self):
        with pytest.raises(UnknownMethodError):
            discrete_lagrangian("L9", self.X0, self.X1, H)

    def test_legendre_generates_sym_euler(self):
        # L1's one-step map (p from minus transform, then plus) is symplectic Euler
        x1 = bootstrap_first_point(S0, "L1", H)
        p1 = legendre_plus("L1", S0.x, x1, H)
        ref = step_sym_euler(S0, H)
        assert np.max(np.abs(x1 - ref.x)) < 1e-11
        assert np.max(np.abs(p1 - ref.v)) < 1e-11

    def test_legendre_generates_vi1(self):
        x1 = bootstrap_first_point(S0, "L1st", H, SPLIT)
        p1 = legendre_plus("L1st", S0.x, x1, H, SPLIT)
        ref = step_vi1(S0, SPLIT, H)
        assert np.max(np.abs(x1 - ref.x)) < 1e-11
        assert np.max(np.abs(p1 - ref.v)) < 1e-11

    def test_legendre_generates_vi2(self):
        x1 = bootstrap_first_point(S0, "L2nd", H, SPLIT)
        p1 = legendre_plus("L2nd", S0.x, x1, H, SPLIT)
        ref = step_vi2(S0, SPLIT, H)
        assert np.max(np.abs(x1 - ref.x)) < 1e-10
        assert np.max(np.abs(p1 - ref.v)) < 1e-10

    def test_bootstrap_satisfies_legendre_condition(self):
        x1 = bootstrap_first_point(S0, "L2", H)
        assert np.max(np.abs(legendre_minus("L2", S0.x, x1, H) - S0.v)) < 1e-11


class TestDelRecurrence:
    def test_matches_vi1_composition(self):
        x1 = bootstrap_first_point(S0, "L1st", H, SPLIT)
        rec = run("vi1", S0, H, 50, split=SPLIT, diagnostics=False)
        xs = [S0.x, x1]
        for _ in range(49):
            xs.append(del_two_step_vi1(TwoStepState(xs[-2], xs[-1], H), SPLIT))
        assert np.max(np.abs(np.array(xs) - rec.xs)) < 1e-11

    def test_single_part_is_central_difference(self):
        single = kepler_split((1.0, 0.0))
        ts = TwoStepState(np.array([1.0, 0.2]), np.array([0.98, 0.25]), H)
        out = del_two_step_vi1(ts, single)
        ref = step_stormer_verlet(ts)
        assert np.max(np.abs(out - ref)) < 1e-15


class TestRun:
    def test_times_and_diagnostics(self):
        rec = run("sv", S_WIDE, 0.1, 20)
        assert np.max(np.abs(rec.times - 0.1 * np.arange(21))) == 0.0
        assert abs(rec.H[0] - energy(S_WIDE)) < 1e-14
        assert rec.steps == 20
        s5 = rec.state(5)
        assert np.max(np.abs(s5.x - rec.xs[5])) == 0.0

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            run("sv", S_WIDE, 0.1, 0)
        with pytest.raises(ValueError):
            run("sv", S_WIDE, -0.1, 5)
        with pytest.raises(UnknownMethodError):
            run("rk4", S_WIDE, 0.1, 5)

    def test_singular_failure_reports_step(self):
        s = PhaseState(np.array([1.0, 0.0]), np.array([-1.0, 0.0]))
        with pytest.raises(SingularOriginError, match=r"step \d+"):
            run("vi1", s, 2.0, 5, split=SPLIT)

    @pytest.mark.parametrize("method,order", [
        ("sym-euler", 1), ("vi1", 1), ("sv", 2), ("vi2", 2),
    ])
    def test_global_convergence_order(self, method, order):
        t_end = 2.0

        def err(h):
            rec = run(method, S_WIDE, h, int(round(t_end / h)),
                      split=SPLIT, diagnostics=False)
            return np.max(np.abs(rec.xs[-1] - analytic_reference(S_WIDE, t_end).x))

        ratio = err(0.02) / err(0.01)
        assert 2.0**order * 0.7 < ratio < 2.0**order * 1.4

    def test_energy_bounded_medium_run(self):
        period = orbit_elements(S_WIDE).T
        steps = int(10 * period / 0.05)
        for method in METHOD_IDS:
            rec = run(method, S_WIDE, 0.05, steps, split=SPLIT)
            assert np.max(np.abs(rec.H - rec.H[0])) < 0.01
