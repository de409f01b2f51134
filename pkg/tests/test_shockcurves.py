"""Tests for shock-curve tracing and hypothesis certification."""

import numpy as np
import pytest

from shocklab.errors import ContinuationError, NotADiscontinuityError
from shocklab.models import FullEuler, IsentropicEuler, relative_entropy
from shocklab.shockcurves import (
    HypothesisReport,
    ShockCurve,
    check_entropic,
    check_H1,
    check_lax_strong,
    rh_residual,
    shock_speed,
    trace_hugoniot,
)

ISEN = IsentropicEuler(gamma=2.0, kappa=1.0)
FULL = FullEuler(gamma=1.4)


def isen_jump_oracle(model, rho_L, v_L, rho_R, branch):
    """Scalar jump relation for isentropic gas dynamics, solved directly:
    the velocity jump across a discontinuity between densities rho_L and
    rho_R is sqrt((p_R - p_L)(rho_R - rho_L)/(rho_R rho_L))."""
    p_L = model.pressure(rho_L)
    p_R = model.pressure(rho_R)
    dv = np.sqrt((p_R - p_L) * (rho_R - rho_L) / (rho_R * rho_L))
    v_R = v_L + branch * dv
    sigma = (rho_R * v_R - rho_L * v_L) / (rho_R - rho_L)
    return np.array([rho_R, rho_R * v_R]), sigma


@pytest.fixture(scope="module")
def curve1():
    return trace_hugoniot(ISEN, np.array([1.0, 0.0]), family=1, s_max=3.0, ds=2e-3)


@pytest.fixture(scope="module")
def curven_same_base():
    return trace_hugoniot(ISEN, np.array([1.0, 0.0]), family=2, s_max=3.0, ds=2e-3)


class TestTracing:
    def test_origin_sample(self, curve1):
        assert np.allclose(curve1.states[0], [1.0, 0.0])
        assert abs(curve1.sigmas[0] - (-np.sqrt(2.0))) < 1e-12
        assert curve1.s[0] == 0.0

    def test_rh_residual_every_sample(self, curve1):
        assert curve1.max_rh_residual() < 1e-10

    def test_arclength_spacing(self, curve1):
        gaps = np.linalg.norm(np.diff(curve1.states, axis=0), axis=-1)
        assert np.all(np.abs(gaps - 2e-3) < 0.05 * 2e-3)

    def test_sample_near_density_two(self, curve1):
        target, sigma_oracle = isen_jump_oracle(ISEN, 1.0, 0.0, 2.0, branch=-1.0)
        assert np.allclose(target, [2.0, -2.4494897], atol=1e-6)
        k = curve1.nearest(target)
        assert np.linalg.norm(curve1.states[k] - target) < 2e-3
        assert abs(curve1.sigmas[k] - sigma_oracle) < 5e-3
        assert abs(sigma_oracle - (-2.4494897)) < 1e-6

    def test_speed_monotone_decreasing(self, curve1):
        assert np.all(np.diff(curve1.sigmas) < 0.0)
        assert np.all(curve1.sigmas[1:] < curve1.sigmas[0])

    def test_family_n_recovers_scenario_shock(self):
        # the fast shock of the two-colliding-flows scenario: left state
        # (2, -2.4494897), right state (1, -2.4494897), zero speed
        base = np.array([1.0, -2.4494897])
        curve = trace_hugoniot(ISEN, base, family=2, s_max=2.0, ds=2e-3)
        left = np.array([2.0, -2.4494897])
        k = curve.nearest(left)
        assert np.linalg.norm(curve.states[k] - left) < 2e-3
        assert abs(curve.sigmas[k]) < 5e-3

    def test_family_n_mirrors_family_one(self, curve1):
        # tracing the fast family from the mirrored base reproduces the
        # slow-family curve with momenta and speeds negated
        base = np.array([1.5, 0.6])
        c1 = trace_hugoniot(ISEN, base, family=1, s_max=1.0, ds=2e-3)
        cn = trace_hugoniot(ISEN, ISEN.reflect(base), family=2, s_max=1.0, ds=2e-3)
        m = min(len(c1.s), len(cn.s))
        assert np.abs(ISEN.reflect(cn.states[:m]) - c1.states[:m]).max() < 1e-8
        assert np.abs(-cn.sigmas[:m] - c1.sigmas[:m]).max() < 1e-8

    def test_family_n_reaches_mirror_of_slow_shock(self, curven_same_base):
        # symmetry oracle: the slow shock (1,0) -> (2, -2.4494897) has a
        # fast-family twin through the same base with momentum negated
        twin = np.array([2.0, 2.4494897])
        k = curven_same_base.nearest(twin)
        assert np.linalg.norm(curven_same_base.states[k] - twin) < 2e-3
        assert abs(curven_same_base.sigmas[k] - 2.4494897) < 5e-3

    def test_bad_parameters(self):
        with pytest.raises(ContinuationError):
            trace_hugoniot(ISEN, np.array([1.0, 0.0]), family=1, s_max=1.0, ds=0.5)
        with pytest.raises(ContinuationError):
            trace_hugoniot(FULL, FULL.to_conserved([1.0, 0.0, 1.0]), family=2)

    def test_full_euler_trace(self):
        base = FULL.to_conserved(np.array([1.0, 0.0, 1.0]))
        curve = trace_hugoniot(FULL, base, family=1, s_max=1.0, ds=5e-3)
        assert curve.max_rh_residual() < 1e-10
        assert np.all(np.diff(curve.sigmas) < 0.0)


class TestShockSpeed:
    def test_hand_value(self):
        uL = np.array([1.0, 0.0])
        uR, sigma_oracle = isen_jump_oracle(ISEN, 1.0, 0.0, 2.0, branch=-1.0)
        sigma = shock_speed(ISEN, uL, uR)
        # the momentum jump over the density jump is the exact speed
        assert abs(sigma - (uR[1] - uL[1]) / (uR[0] - uL[0])) < 1e-12
        assert abs(sigma - sigma_oracle) < 1e-12

    def test_curve_consistency(self, curve1):
        for k in [1, len(curve1.s) // 2, len(curve1.s) - 1]:
            uL, uR = curve1.pair(k)
            assert abs(shock_speed(ISEN, uL, uR) - curve1.sigmas[k]) < 1e-8

    def test_off_locus_pair_rejected(self):
        with pytest.raises(NotADiscontinuityError):
            shock_speed(ISEN, np.array([1.0, 0.0]), np.array([2.0, 0.0]))

    def test_identical_states_rejected(self):
        with pytest.raises(NotADiscontinuityError):
            shock_speed(ISEN, np.array([1.0, 0.0]), np.array([1.0, 0.0]))


class TestEntropic:
    def test_slow_shock_entropic(self):
        uR, sigma = isen_jump_oracle(ISEN, 1.0, 0.0, 2.0, branch=-1.0)
        assert check_entropic(ISEN, np.array([1.0, 0.0]), uR, sigma)

    def test_reversed_pair_not_entropic(self):
        uR, sigma = isen_jump_oracle(ISEN, 1.0, 0.0, 2.0, branch=-1.0)
        assert not check_entropic(ISEN, uR, np.array([1.0, 0.0]), sigma)

    def test_weak_shock_margin_small(self, curve1):
        uL, uR = curve1.pair(1)
        sigma = curve1.sigmas[1]
        lhs = ISEN.entropy_flux(uR) - ISEN.entropy_flux(uL)
        rhs = sigma * (ISEN.entropy(uR) - ISEN.entropy(uL))
        assert check_entropic(ISEN, uL, uR, sigma)
        # entropy production scales like the cube of the jump strength
        assert abs(lhs - rhs) < 10.0 * (2e-3) ** 3

    def test_rh_precondition(self):
        with pytest.raises(NotADiscontinuityError):
            check_entropic(ISEN, np.array([1.0, 0.0]), np.array([2.0, 0.0]), 0.0)

    def test_entropic_at_all_curve_samples(self, curve1):
        for k in range(1, len(curve1.s), 50):
            uL, uR = curve1.pair(k)
            assert check_entropic(ISEN, uL, uR, curve1.sigmas[k])


class TestLaxStrong:
    def test_slow_shock(self):
        uR, sigma = isen_jump_oracle(ISEN, 1.0, 0.0, 2.0, branch=-1.0)
        uL = np.array([1.0, 0.0])
        lam_R = ISEN.char_speeds(uR)
        assert abs(lam_R[0] - (-3.2247449)) < 1e-6
        assert check_lax_strong(ISEN, uL, uR, sigma, family=1)

    def test_zero_strength(self):
        u = np.array([1.3, 0.4])
        sigma = ISEN.char_speeds(u)[0]
        assert check_lax_strong(ISEN, u, u, sigma, family=1)

    def test_contact_fails_as_family_one(self):
        uL = FULL.to_conserved(np.array([1.0, 0.0, 1.0]))
        uR = FULL.to_conserved(np.array([0.5, 0.0, 1.0]))
        assert rh_residual(FULL, uL, uR, 0.0) < 1e-14
        assert not check_lax_strong(FULL, uL, uR, 0.0, family=1)
        assert not check_lax_strong(FULL, uL, uR, 0.0, family=3)

    def test_fast_shock(self):
        uL = np.array([2.0, -2.4494897])
        uR = np.array([1.0, -2.4494897])
        sigma = shock_speed(ISEN, uL, uR)
        assert abs(sigma) < 1e-6
        assert check_lax_strong(ISEN, uL, uR, sigma, family=2)


class TestHypothesisReport:
    def test_h1_certified(self, curve1, curven_same_base):
        report = check_H1(ISEN, curve1, cross_curve=curven_same_base)
        assert report.liu_ok and report.liu_margin > 0
        assert report.strengthening_ok and report.strengthening_margin > 0
        assert report.h2_ok and report.h2_margin > 0
        assert report.h3_sampled_ok
        assert report.all_ok

    def test_h1_family_n(self, curve1, curven_same_base):
        report = check_H1(ISEN, curven_same_base, cross_curve=curve1)
        assert report.liu_ok
        assert report.strengthening_ok
        assert report.h2_ok
        assert report.h3_sampled_ok

    def test_full_euler_fast_family_from_low_density_state(self):
        base = FULL.to_conserved(np.array([0.125, 0.0, 0.1]))
        curve = trace_hugoniot(FULL, base, family=3, s_max=0.5, ds=2e-3)
        report = check_H1(FULL, curve)
        assert report.liu_ok  # speed strictly increases along the curve
        assert report.strengthening_ok

    def test_insufficient_samples(self, curve1):
        short = ShockCurve(
            model=ISEN,
            family=1,
            base=curve1.base,
            s=curve1.s[:2],
            states=curve1.states[:2],
            sigmas=curve1.sigmas[:2],
        )
        report = check_H1(ISEN, short)
        assert report.insufficient_samples
        assert not report.all_ok

    def test_entropic_consistent_with_strengthening(self, curve1):
        # strengthening along the curve implies each sampled jump
        # dissipates entropy; spot-check the cross-consistency
        report = check_H1(ISEN, curve1)
        assert report.strengthening_ok
        for k in range(1, len(curve1.s), 100):
            uL, uR = curve1.pair(k)
            assert check_entropic(ISEN, uL, uR, curve1.sigmas[k])


class TestExport:
    def test_csv_round_trip(self, curve1, tmp_path):
        path = tmp_path / "curve.csv"
        curve1.to_csv(path)
        data = np.genfromtxt(path, delimiter=",", names=True)
        assert len(data) == len(curve1.s)
        assert np.abs(data["sigma"] - curve1.sigmas).max() < 1e-15
        assert np.abs(data["u0"] - curve1.states[:, 0]).max() < 1e-15
