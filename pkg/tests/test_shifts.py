"""Weight selection, indicator velocities, and Filippov shift paths."""

import numpy as np
import pytest

from shocklab.errors import ConfigError, SelectionError, SimulationError
from shocklab.fvm import Grid1D, perturb_riemann_data, simulate, trace_at
from shocklab.models import box_around_states, make_model, relative_entropy
from shocklab.shifts import (
    DissipationSeries,
    ShiftPath,
    TRIVIAL_SELECTION,
    WeightSelection,
    check_ordering,
    compute_gamma0_c4_Cstar,
    dissipation_rate,
    integrate_filippov,
    make_v1_field,
    make_vn_field,
    select_weights,
    velocity_V1,
    velocity_Vn,
)

SQRT6 = np.sqrt(6.0)
ISEN = make_model("isentropic_euler", gamma=2.0, kappa=1.0)
U_L1 = np.array([1.0, 0.0])
U_R1 = np.array([2.0, -SQRT6])  # fast-shock partner of U_L1
U_RN = np.array([1.0, -SQRT6])  # slow-shock partner of U_R1 (speed 0)


@pytest.fixture(scope="module")
def box():
    return box_around_states(ISEN, [U_L1, U_R1, U_RN], pad=0.6)


@pytest.fixture(scope="module")
def selection(box):
    return select_weights(ISEN, (U_L1, U_R1), (U_R1, U_RN), box)


@pytest.fixture(scope="module")
def two_shock_run():
    grid = Grid1D(-2.0, 2.0, 500)
    data = perturb_riemann_data(U_L1, U_RN, 0.0)
    return simulate(ISEN, data, grid, t_end=0.2, scheme="rusanov")


class TestAuxConstants:
    def test_cstar_dominates_char_speed(self, box):
        u = box.sample(4000, seed=1)
        u = u[ISEN.is_admissible(u)]
        sup_lam1 = np.abs(ISEN.char_speeds(u)[..., 0]).max()
        _, _, c_star = compute_gamma0_c4_Cstar(ISEN, U_L1, U_R1, box)
        assert c_star >= 2.0 * sup_lam1

    def test_wider_box_never_decreases_cstar(self, box):
        _, _, c_small = compute_gamma0_c4_Cstar(ISEN, U_L1, U_R1, box)
        _, _, c_big = compute_gamma0_c4_Cstar(ISEN, U_L1, U_R1, box.widened(2.0))
        assert c_big >= c_small

    def test_coercivity_constant_positive(self, box):
        gamma0, c4, _ = compute_gamma0_c4_Cstar(ISEN, U_L1, U_R1, box)
        assert gamma0 > 0
        assert c4 > 0

    def test_coercivity_certificate_on_fresh_samples(self, box):
        # re-validate the fitted inequality on samples the fit never saw
        a = 0.5
        gamma0, c4, _ = compute_gamma0_c4_Cstar(ISEN, U_L1, U_R1, box, a=a)
        u = box.sample(4000, seed=99)
        u = u[ISEN.is_admissible(u)]
        eta_l = relative_entropy(ISEN, u, U_L1)
        eta_r = relative_entropy(ISEN, u, U_R1)
        basin = np.concatenate([u[eta_l <= a * eta_r], U_L1[None, :]])
        d2 = ((u[:, None, :] - basin[None, :, :]) ** 2).sum(axis=-1)
        far = np.sqrt(d2.min(axis=1)) >= gamma0
        gap = (eta_l - a * eta_r)[far]
        assert gap.min() >= c4 * gamma0 ** 2


class TestWeightSelection:
    def test_cap_and_positivity(self, selection):
        assert 0 < selection.a1 < 1
        assert 0 < selection.an < 1
        assert selection.a1 < selection.theta ** 2 / selection.C_lemma

    def test_containment_certificate(self, selection, box):
        u = box.sample(10_000, seed=21)
        u = u[ISEN.is_admissible(u)]
        inside = relative_entropy(ISEN, u, U_L1) <= selection.a1 * relative_entropy(
            ISEN, u, U_R1
        )
        if inside.any():
            dist = np.linalg.norm(u[inside] - U_L1, axis=-1)
            assert dist.max() <= selection.theta

    def test_vanishing_weight_basin_is_the_anchor(self):
        # a -> 0+ turns the basin into {u : eta(u|uL) <= 0} = {uL}
        u = box_around_states(ISEN, [U_L1, U_R1]).sample(2000, seed=5)
        u = u[ISEN.is_admissible(u)]
        eta_l = relative_entropy(ISEN, u, U_L1)
        assert (eta_l[np.linalg.norm(u - U_L1, axis=-1) > 1e-6] > 0).all()

    def test_reflection_consistency(self):
        sel_fast = select_weights(ISEN, shock1=(U_L1, U_R1))
        mirrored = (ISEN.reflect(U_R1), ISEN.reflect(U_L1))
        sel_slow = select_weights(ISEN, shockn=mirrored)
        assert sel_slow.an == pytest.approx(sel_fast.a1, abs=1e-6)

    def test_no_shocks_gives_trivial_weights(self):
        sel = select_weights(ISEN)
        assert sel is TRIVIAL_SELECTION
        assert sel.a1 == sel.an == 1.0

    def test_non_entropic_shock_rejected(self):
        with pytest.raises((SelectionError, Exception)):
            # reversed jump violates the entropy inequality
            select_weights(ISEN, shock1=(U_R1, U_L1))


class TestVelocityFields:
    def test_anchor_state_is_characteristic(self, selection):
        v = velocity_V1(ISEN, U_L1, U_L1, U_R1, selection)
        assert v == pytest.approx(ISEN.char_speeds(U_L1)[0])

    def test_runaway_state_below_all_char_speeds(self, selection, box):
        v = velocity_V1(ISEN, U_R1, U_L1, U_R1, selection)
        u = box.sample(4000, seed=2)
        u = u[ISEN.is_admissible(u)]
        assert v < ISEN.char_speeds(u)[..., 0].min()

    def test_equality_counts_as_indicator_off(self, selection):
        # with both anchors equal, the basin comparison reads 0 < 0
        v = velocity_V1(ISEN, U_L1, U_L1, U_L1, selection)
        assert v == pytest.approx(ISEN.char_speeds(U_L1)[0])

    def test_slow_field_mirrors(self, selection):
        v = velocity_Vn(ISEN, U_RN, U_R1, U_RN, selection)
        assert v == pytest.approx(ISEN.char_speeds(U_RN)[-1])
        kicked = velocity_Vn(ISEN, U_R1, U_R1, U_RN, selection)
        assert kicked > ISEN.char_speeds(U_R1)[-1]

    def test_field_gap_for_indicator_off_states(self, selection, box):
        u = box.sample(2000, seed=7)
        u = u[ISEN.is_admissible(u)]
        v1 = velocity_V1(ISEN, u, U_L1, U_R1, selection)
        vn = velocity_Vn(ISEN, u, U_R1, U_RN, selection)
        speeds = ISEN.char_speeds(u)
        off1 = ~(
            selection.a1 * relative_entropy(ISEN, u, U_R1)
            < relative_entropy(ISEN, u, U_L1)
        )
        offn = ~(
            selection.an * relative_entropy(ISEN, u, U_R1)
            < relative_entropy(ISEN, u, U_RN)
        )
        both = off1 & offn
        gap = speeds[..., -1] - speeds[..., 0]
        assert ((vn - v1)[both] >= gap[both] - 1e-12).all()

    def test_inadmissible_state_rejected(self, selection):
        with pytest.raises(Exception):
            velocity_V1(ISEN, np.array([-1.0, 0.0]), U_L1, U_R1, selection)


class TestFilippovIntegration:
    def test_constant_field_is_exact(self, two_shock_run):
        path = integrate_filippov(two_shock_run, lambda u: 0.5, -1.0, 4)
        expected = -1.0 + 0.5 * path.times
        assert np.abs(path.positions - expected).max() < 1e-12

    def test_trivial_ordering_gap(self, two_shock_run):
        g1 = integrate_filippov(two_shock_run, lambda u: 0.0, -1.0, 4)
        g2 = integrate_filippov(two_shock_run, lambda u: 1.0, -1.0, 4)
        gap = g2.positions - g1.positions
        assert np.abs(gap - g1.times).max() < 1e-12
        report = check_ordering(g1, g2)
        assert report.passed
        assert report.min_gap == pytest.approx(0.0, abs=1e-15)
        assert gap[-1] > 0

    def test_swapped_fields_fail_ordering(self, two_shock_run):
        fast_right = integrate_filippov(two_shock_run, lambda u: 1.0, -1.0, 4)
        stationary = integrate_filippov(two_shock_run, lambda u: 0.0, -1.0, 4)
        assert not check_ordering(fast_right, stationary).passed

    def test_mismatched_sampling_rejected(self, two_shock_run):
        g1 = integrate_filippov(two_shock_run, lambda u: 0.0, -1.0, 4)
        clipped = ShiftPath(
            times=g1.times[:-1],
            positions=g1.positions[:-1],
            velocities=g1.velocities[:-1],
            regimes=g1.regimes[:-1],
            mollification_width=g1.mollification_width,
        )
        with pytest.raises(ConfigError):
            check_ordering(g1, clipped)

    def test_domain_exit_raises(self, two_shock_run):
        with pytest.raises(SimulationError):
            integrate_filippov(two_shock_run, lambda u: -50.0, -1.0, 4)

    def test_lipschitz_bound(self, two_shock_run, selection):
        field = make_v1_field(ISEN, U_L1, U_R1, selection)
        path = integrate_filippov(two_shock_run, field, 0.0, 4)
        sup_lam = np.abs(ISEN.char_speeds(two_shock_run.snapshots)).max()
        assert path.lipschitz <= sup_lam + selection.C_star + 1e-12

    def test_shift_tracks_fast_shock(self, two_shock_run, selection):
        # secant-averaged late velocity approaches the shock speed; the
        # per-step velocity saws between the characteristic speed and
        # runaway kicks around the moving equilibrium
        field = make_v1_field(ISEN, U_L1, U_R1, selection)
        path = integrate_filippov(two_shock_run, field, 0.0, 4)
        k = len(path.times) // 2
        secant = (path.positions[-1] - path.positions[k]) / (
            path.times[-1] - path.times[k]
        )
        assert abs(secant - (-SQRT6)) < 0.2
        assert "characteristic" in path.regimes
        assert "runaway" in path.regimes

    def test_tracking_tightens_under_refinement(self, selection):
        # the path rides the discrete layer a few cells from the exact
        # shock line, so the terminal position error is O(dx)
        errors = []
        for N in (250, 1000):
            grid = Grid1D(-2.0, 2.0, N)
            data = perturb_riemann_data(U_L1, U_RN, 0.0)
            traj = simulate(ISEN, data, grid, t_end=0.2, scheme="rusanov")
            field = make_v1_field(ISEN, U_L1, U_R1, selection)
            path = integrate_filippov(traj, field, 0.0, 4)
            err = abs(path.positions[-1] - (-SQRT6) * path.times[-1])
            assert err <= 10.0 * grid.dx
            errors.append(err)
        assert errors[1] < 0.4 * errors[0]

    def test_ordering_on_two_shock_run(self, two_shock_run, selection):
        f1 = make_v1_field(ISEN, U_L1, U_R1, selection)
        fn = make_vn_field(ISEN, U_R1, U_RN, selection)
        h1 = integrate_filippov(two_shock_run, f1, 0.0, 4)
        hn = integrate_filippov(two_shock_run, fn, 0.0, 4)
        assert check_ordering(h1, hn).passed

    def test_csv_roundtrip(self, two_shock_run, tmp_path):
        path = integrate_filippov(two_shock_run, lambda u: 0.25, -1.0, 4)
        out = tmp_path / "shift.csv"
        path.to_csv(out)
        rows = out.read_text().strip().splitlines()
        assert rows[0] == "t,h,hdot,regime"
        assert len(rows) == len(path.times) + 1
        t, h, hdot, regime = rows[-1].split(",")
        assert float(h) == pytest.approx(path.positions[-1])
        assert regime in ("characteristic", "runaway")


class TestDissipationRate:
    def test_exact_shock_dissipates(self, selection):
        # traces frozen at the exact shock states, shift riding the shock
        from shocklab.fvm import TraceSeries

        times = np.linspace(0.0, 0.1, 20)
        sigma = -SQRT6
        traces = TraceSeries(
            times=times,
            path=sigma * times,
            left_states=np.tile(U_L1, (len(times), 1)),
            right_states=np.tile(U_R1, (len(times), 1)),
        )
        hdot = np.full(len(times), sigma)
        series = dissipation_rate(
            ISEN, traces, U_L1, U_R1, selection.a1, hdot
        )
        assert (series.lhs <= 1e-12).all()
        assert series.fraction_dissipative == 1.0

    def test_degenerate_weight_matches_term_oracle(self):
        from shocklab.fvm import TraceSeries
        from shocklab.models import relative_entropy, relative_entropy_flux

        rng = np.random.default_rng(17)
        times = np.linspace(0.0, 0.05, 8)
        um = np.column_stack(
            [1.0 + 0.2 * rng.random(len(times)), 0.1 * rng.random(len(times))]
        )
        traces = TraceSeries(
            times=times,
            path=np.zeros_like(times),
            left_states=um,
            right_states=np.tile(U_R1, (len(times), 1)),
        )
        hdot = np.full(len(times), -1.0)
        series = dissipation_rate(ISEN, traces, U_L1, U_R1, 0.0, hdot)
        expected = -relative_entropy_flux(ISEN, um, U_L1) + hdot * relative_entropy(
            ISEN, um, U_L1
        )
        assert np.abs(series.lhs - expected).max() < 1e-12

    def test_run_traces_mostly_dissipative(self, two_shock_run, selection):
        # the discrete statement needs the continuum objects: traces
        # taken past the scheme's shock layer, and the per-step sawtooth
        # velocity averaged back to the Filippov selection it brackets
        field = make_v1_field(ISEN, U_L1, U_R1, selection)
        path = integrate_filippov(two_shock_run, field, 0.0, 4)
        traces = trace_at(
            two_shock_run,
            lambda t: np.interp(t, path.times, path.positions),
            offset=8,
        )
        window = 25
        hdot = np.convolve(path.velocities, np.ones(window) / window, mode="same")
        series = dissipation_rate(ISEN, traces, U_L1, U_R1, selection.a1, hdot)
        settle = len(series.times) // 5
        late = series.lhs[settle:]
        assert (late <= 1e-9).mean() >= 0.95

    def test_mismatched_times_rejected(self, two_shock_run, selection):
        from shocklab.fvm import TraceSeries

        traces = TraceSeries(
            times=np.linspace(0, 1, 5),
            path=np.zeros(5),
            left_states=np.tile(U_L1, (5, 1)),
            right_states=np.tile(U_R1, (5, 1)),
        )
        with pytest.raises(ConfigError):
            dissipation_rate(ISEN, traces, U_L1, U_R1, 0.5, np.zeros(4))
