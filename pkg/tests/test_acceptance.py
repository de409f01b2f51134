"""End-to-end acceptance checks: one test (and one pass/fail line) per
top-level criterion, run at desk scale on the colliding-flow scenario."""

import time

import numpy as np
import pytest

from shocklab.contraction import (
    build_psi,
    dissipation_identity_check,
    layer_excised_l2,
    fan_separation_radius,
    smoothing_window,
    stability_report,
)
from shocklab.fvm import Grid1D, perturb_riemann_data, simulate, trace_at
from shocklab.models import (
    box_around_states,
    check_compatibility,
    make_model,
    relative_entropy,
)
from shocklab.riemann import solve_riemann
from shocklab.shifts import (
    check_ordering,
    dissipation_rate,
    integrate_filippov,
    make_v1_field,
    make_vn_field,
    select_weights,
)
from shocklab.shockcurves import rh_residual, trace_hugoniot

ISEN = make_model("isentropic_euler", gamma=2.0, kappa=1.0)
EULER = make_model("full_euler", gamma=1.4)
SQRT6 = np.sqrt(6.0)

EPS_GRID = (0.0, 0.01, 0.02, 0.05)
N_GRID = (500, 1000, 2000)
T_END, T0, R_WINDOW = 0.22, 0.2, 0.6


def _passed(name):
    print(f"[PASS] {name}")


@pytest.fixture(scope="session")
def two_shock_setup():
    uL = ISEN.to_conserved([1.0, 0.0])
    uR = ISEN.to_conserved([1.0, -SQRT6])
    sol = solve_riemann(ISEN, uL, uR)
    w1, wn = sol.wave_by_family(1), sol.wave_by_family(2)
    sel = select_weights(ISEN, (w1.left, w1.right), (wn.left, wn.right))
    return {"uL": uL, "uR": uR, "sol": sol, "w1": w1, "wn": wn, "sel": sel}


def _run_once(setup, eps, N, C_num=None):
    sol, w1, wn, sel = setup["sol"], setup["w1"], setup["wn"], setup["sel"]
    start = time.perf_counter()
    grid = Grid1D(-2.0, 2.0, N)
    data = perturb_riemann_data(setup["uL"], setup["uR"], eps, "sine", seed=0)
    traj = simulate(ISEN, data, grid, T_END)
    h1 = integrate_filippov(traj, make_v1_field(ISEN, w1.left, w1.right, sel), 0.0, 4)
    hn = integrate_filippov(traj, make_vn_field(ISEN, wn.left, wn.right, sel), 0.0, 4)
    ordering = check_ordering(h1, hn)
    psi = build_psi(sol, h1=h1, hn=hn)
    report = stability_report(ISEN, traj, psi, sel, R=R_WINDOW, t0=T0, C_num=C_num)
    probes = np.linspace(0.0, T0, 11)
    excised = max(
        layer_excised_l2(ISEN, traj, psi, R_WINDOW, float(t)) for t in probes
    )
    elapsed = time.perf_counter() - start
    return {
        "traj": traj, "h1": h1, "hn": hn, "psi": psi, "report": report,
        "ordering": ordering, "excised": excised, "elapsed": elapsed,
    }


@pytest.fixture(scope="session")
def sweep(two_shock_setup):
    """eps x N grid with the dissipation allowance frozen per N from the
    unperturbed reference run."""
    runs = {}
    for N in N_GRID:
        ref = _run_once(two_shock_setup, 0.0, N)
        runs[(0.0, N)] = ref
        C_num = ref["report"].C_num
        for eps in EPS_GRID[1:]:
            runs[(eps, N)] = _run_once(two_shock_setup, eps, N, C_num=C_num)
    return runs


@pytest.fixture(scope="session")
def rarefaction_runs():
    uL = ISEN.to_conserved([1.0, 0.0])
    uR = ISEN.to_conserved([3.0, -np.sqrt(1.5) + 2.0 * (SQRT6 - 2.0)])
    sol = solve_riemann(ISEN, uL, uR)
    w1 = sol.wave_by_family(1)
    box = box_around_states(ISEN, sol.states, pad=0.4)
    theta = fan_separation_radius(ISEN, sol, box)
    sel = select_weights(ISEN, shock1=(w1.left, w1.right), box=box, theta=theta)
    out = {}
    for eps in (0.0, 0.01):
        grid = Grid1D(-2.0, 2.0, 500)
        traj = simulate(ISEN, perturb_riemann_data(uL, uR, eps, "sine", seed=3), grid, T_END)
        h1 = integrate_filippov(traj, make_v1_field(ISEN, w1.left, w1.right, sel), 0.0, 4)
        psi = build_psi(sol, h1=h1)
        out[eps] = {"traj": traj, "h1": h1, "psi": psi, "sel": sel}
    return out


# ---------------------------------------------------------------------


def test_criterion_1_entropy_compatibility():
    start = time.perf_counter()
    for model, prims in (
        (ISEN, ([0.3, -3.0], [3.0, 3.0])),
        (EULER, ([0.2, -1.0, 0.1], [3.0, 1.0, 2.0])),
    ):
        rng = np.random.default_rng(29)
        prim = rng.uniform(prims[0], prims[1], size=(1000, model.n))
        samples = model.to_conserved(prim)
        samples = samples[model.is_admissible(samples)]
        assert len(samples) >= 900
        report = check_compatibility(model, samples)
        assert report.passed
        assert report.max_residual < 1e-5
    assert time.perf_counter() - start < 5.0
    _passed("entropy flux compatibility on both models")


class TestCriterion2RiemannSolver:
    def test_rh_residual_and_sod_star(self):
        start = time.perf_counter()

        # every shock of the colliding-flow pattern satisfies the jump
        # relations to near machine precision
        sol = solve_riemann(
            ISEN, ISEN.to_conserved([1.0, 0.0]), ISEN.to_conserved([1.0, -SQRT6])
        )
        for wave in sol.waves:
            if wave.kind == "shock":
                assert rh_residual(ISEN, wave.left, wave.right, wave.sigma) <= 1e-10

        # independent bisection oracle for the shock-tube star state
        g = EULER.gamma
        rhoL, vL, pL = 1.0, 0.0, 1.0
        rhoR, vR, pR = 0.125, 0.0, 0.1

        def branch(p, rho_k, p_k):
            if p > p_k:
                A = 2.0 / ((g + 1.0) * rho_k)
                B = (g - 1.0) / (g + 1.0) * p_k
                return (p - p_k) * np.sqrt(A / (p + B))
            a_k = np.sqrt(g * p_k / rho_k)
            return 2.0 * a_k / (g - 1.0) * ((p / p_k) ** ((g - 1.0) / (2.0 * g)) - 1.0)

        def pressure_fn(p):
            return branch(p, rhoL, pL) + branch(p, rhoR, pR) + (vR - vL)

        lo, hi = 1e-10, 5.0
        assert pressure_fn(lo) < 0 < pressure_fn(hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if pressure_fn(mid) < 0:
                lo = mid
            else:
                hi = mid
        p_star = 0.5 * (lo + hi)
        v_star = 0.5 * (vL + vR) + 0.5 * (branch(p_star, rhoR, pR) - branch(p_star, rhoL, pL))

        sod = solve_riemann(
            EULER,
            EULER.to_conserved([rhoL, vL, pL]),
            EULER.to_conserved([rhoR, vR, pR]),
        )
        left_star = EULER.to_primitive(sod.states[1])
        right_star = EULER.to_primitive(sod.states[2])
        assert left_star[2] == pytest.approx(p_star, abs=1e-8)
        assert right_star[2] == pytest.approx(p_star, abs=1e-8)
        assert left_star[1] == pytest.approx(v_star, abs=1e-8)
        assert right_star[1] == pytest.approx(v_star, abs=1e-8)

        assert time.perf_counter() - start < 10.0

    def test_round_trip_wave_chaining(self):
        start = time.perf_counter()
        rng = np.random.default_rng(41)
        for _ in range(100):
            prim = rng.uniform([0.3, -1.0], [3.0, 1.0], size=(2, 2))
            uL, uR = ISEN.to_conserved(prim)
            sol = solve_riemann(ISEN, uL, uR)
            assert np.abs(sol.states[0] - uL).max() <= 1e-8
            assert np.abs(sol.states[-1] - uR).max() <= 1e-8
            # each wave, re-posed as its own two-state problem, comes
            # back as a single wave of the same family and speed
            for wave in sol.waves:
                if wave.kind == "zero":
                    continue
                again = solve_riemann(ISEN, wave.left, wave.right)
                back = again.wave_by_family(wave.family)
                assert back.kind == wave.kind
                other = again.wave_by_family(3 - wave.family)
                assert other.kind == "zero"
                mid = wave.right if wave.family == 1 else wave.left
                assert np.abs(again.states[1] - mid).max() <= 1e-8
                if wave.kind == "shock":
                    assert back.sigma == pytest.approx(wave.sigma, abs=1e-8)
        assert time.perf_counter() - start < 10.0
        _passed("exact solver: jump relations, star oracle, round trips")


def test_criterion_3_shock_curve_certification():
    start = time.perf_counter()
    base = ISEN.to_conserved([1.0, 0.0])
    curve = trace_hugoniot(ISEN, base, family=1, s_max=3.0)

    sigmas = curve.sigmas
    assert (np.diff(sigmas) < 0.0).all()

    strengths = relative_entropy(ISEN, base, curve.states[1:])
    assert (np.diff(strengths) > 0.0).all()

    # momentum reflection maps the slow-family curve onto the fast one
    mirrored = trace_hugoniot(ISEN, ISEN.reflect(base), family=ISEN.n, s_max=3.0)
    m = min(len(curve.states), len(mirrored.states))
    assert np.abs(ISEN.reflect(mirrored.states[:m]) - curve.states[:m]).max() <= 1e-8
    assert np.abs(-mirrored.sigmas[:m] - curve.sigmas[:m]).max() <= 1e-8

    assert time.perf_counter() - start < 10.0
    _passed("shock curve: speed monotone, strengthening, reflection duality")


def test_criterion_4_weight_containment(two_shock_setup):
    sel = two_shock_setup["sel"]
    w1, wn = two_shock_setup["w1"], two_shock_setup["wn"]
    box = box_around_states(
        ISEN, [w1.left, w1.right, wn.left, wn.right], pad=0.5
    )
    u = box.sample(10_000, seed=97)
    u = u[ISEN.is_admissible(u)]
    basin = relative_entropy(ISEN, u, w1.left) <= sel.a1 * relative_entropy(
        ISEN, u, w1.right
    )
    assert basin.sum() > 0
    distances = np.linalg.norm(u[basin] - w1.left, axis=-1)
    violations = int((distances > sel.theta).sum())
    assert violations == 0
    _passed("weight basin containment: zero violations on 10^4 samples")


def test_criterion_5_shock_dissipation(two_shock_setup, sweep):
    sel = two_shock_setup["sel"]
    w1 = two_shock_setup["w1"]

    def late_lhs(run):
        traj, h1 = run["traj"], run["h1"]
        traces = trace_at(
            traj, lambda t: np.interp(t, h1.times, h1.positions), offset=8
        )
        window = smoothing_window(h1, traj)
        hdot = np.convolve(h1.velocities, np.ones(window) / window, mode="same")
        series = dissipation_rate(ISEN, traces, w1.left, w1.right, sel.a1, hdot)
        settle = window + len(series.times) // 20
        return series.lhs[settle:], traj.grid.dx

    # positive-part tolerance calibrated on the two coarser grids
    C = 0.0
    for N in (500, 1000):
        lhs, dx = late_lhs(sweep[(0.01, N)])
        C = max(C, 1.5 * max(0.0, float(lhs.max())) / dx)

    lhs, dx = late_lhs(sweep[(0.01, 2000)])
    assert float((lhs <= 0.0).mean()) >= 0.95
    assert float(lhs.max()) <= C * dx + 1e-12
    _passed("entropy dissipation along the traced shift at N=2000")


def test_criterion_6_filippov_ordering(sweep):
    for key, run in sweep.items():
        assert run["ordering"].min_gap >= -1e-12, key

    # trivial constant-speed pair separates exactly linearly
    grid = Grid1D(-2.0, 2.0, 64)
    uC = ISEN.to_conserved([1.0, 0.0])
    traj = simulate(ISEN, perturb_riemann_data(uC, uC, 0.0), grid, 0.5)
    g1 = integrate_filippov(traj, lambda u: -0.5, 0.0, 4)
    g2 = integrate_filippov(traj, lambda u: 0.5, 0.0, 4)
    assert np.array_equal(g2.positions - g1.positions, g1.times)
    _passed("shift ordering on the full sweep and the constant-field pair")


def test_criterion_7_contraction(sweep, rarefaction_runs):
    # unperturbed runs stay within the frozen numerical allowance
    for N in N_GRID:
        ref = sweep[(0.0, N)]["report"]
        assert ref.verdict
        assert ref.E.max() <= ref.C_num * (4.0 / N)

    # bulk amplification ratio is eps-uniform at the finest grid
    amps = [
        sweep[(eps, 2000)]["excised"] / sweep[(eps, 2000)]["report"].initial_mass
        for eps in EPS_GRID[1:]
    ]
    assert all(np.isfinite(a) and a > 0 for a in amps)
    assert max(amps) / min(amps) < 3.0

    # the distance responds monotonically to the perturbation size
    for N in N_GRID:
        sups = [sweep[(eps, N)]["report"].E.max() for eps in EPS_GRID]
        assert all(a <= b for a, b in zip(sups, sups[1:]))

    # rarefaction runs keep the shift strictly on its side of the fan
    for eps, run in rarefaction_runs.items():
        psi, h1 = run["psi"], run["h1"]
        assert psi.fan_cut_low is not None
        late = h1.times > 0.01
        assert (
            h1.positions[late] < psi.fan_cut_low * h1.times[late]
        ).all(), eps

    for key, run in sweep.items():
        assert run["elapsed"] < 60.0, key
    _passed("weighted contraction across the sweep; fan invariants intact")


def test_criterion_8_shift_control(sweep):
    mu2 = [sweep[(eps, 2000)]["report"].mu2 for eps in (0.01, 0.02)]
    assert all(np.isfinite(v) and v > 0 for v in mu2)
    assert max(mu2) / min(mu2) < 3.0

    # unperturbed shift-speed error integrates to O(dx^2): the constant
    # calibrated on the coarsest grid holds down the refinement ladder
    ctrl500 = sweep[(0.0, 500)]["report"].shift_control
    C = 1.5 * ctrl500 / (4.0 / 500) ** 2
    for N in (1000, 2000):
        ctrl = sweep[(0.0, N)]["report"].shift_control
        assert ctrl <= C * (4.0 / N) ** 2
    _passed("shift control ratio uniform; quadratic decay of the numerator")


def test_criterion_9_dissipation_identity(sweep):
    def region_violations(run):
        traj, psi = run["traj"], run["psi"]
        h1, hn = run["h1"], run["hn"]
        f1 = lambda t: np.interp(t, h1.times, h1.positions)
        fn = lambda t: np.interp(t, hn.times, hn.positions)
        t_lo = float(traj.times[len(traj.times) // 5])
        out = []
        for g1, g2 in ((lambda t: -1.0, f1), (f1, fn), (fn, lambda t: 1.0)):
            rep = dissipation_identity_check(ISEN, traj, g1, g2, psi, t_lo, T0)
            assert rep.passed
            out.append(max(0.0, -rep.margin))
        return out

    coarse = region_violations(sweep[(0.0, 500)])
    fine = region_violations(sweep[(0.0, 1000)])
    for c, f in zip(coarse, fine):
        assert f <= c + 1e-12
    _passed("entropy balance identity on all wedge regions, both grids")
