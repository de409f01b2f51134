"""Batch front end: configuration, run orchestration, artifact output.

Subcommands:
  run       solve, simulate, integrate shifts, and write a verdict
  certify   structural hypothesis checks for the configured scenario
  sweep     Cartesian eps x N grid of runs with a summary table
  validate  re-check an artifact directory against the schema

Exit codes: 0 pass, 1 verdict/certification failure, 2 configuration or
parse error, 3 numerical error.
"""

import argparse
import configparser
import csv
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .contraction import (
    build_psi,
    fan_separation_radius,
    stability_report,
)
from .errors import ConfigError, ShockLabError
from .fvm import Grid1D, perturb_riemann_data, simulate
from .models import box_around_states, check_compatibility, make_model
from .riemann import check_sign_condition, classify_waves, solve_riemann
from .shifts import (
    TRIVIAL_SELECTION,
    check_ordering,
    integrate_filippov,
    make_v1_field,
    make_vn_field,
    select_weights,
)
from .shockcurves import check_H1, check_lax_strong, trace_hugoniot

OUTPUT_ROOT_ENV = "SHOCKLAB_OUTPUT_ROOT"

SCENARIOS = {
    "sod": dict(
        model="full_euler",
        params={"gamma": 1.4},
        uL_prim=(1.0, 0.0, 1.0),
        uR_prim=(0.125, 0.0, 0.1),
    ),
    "two_shock_isentropic": dict(
        model="isentropic_euler",
        params={"gamma": 2.0, "kappa": 1.0},
        uL_prim=(1.0, 0.0),
        uR_prim=(1.0, -np.sqrt(6.0)),
    ),
    "shock_plus_rarefaction": dict(
        model="isentropic_euler",
        params={"gamma": 2.0, "kappa": 1.0},
        uL_prim=(1.0, 0.0),
        uR_prim=(3.0, -np.sqrt(1.5) + 2.0 * (np.sqrt(6.0) - 2.0)),
    ),
    "pure_rarefaction": dict(
        model="isentropic_euler",
        params={"gamma": 2.0, "kappa": 1.0},
        uL_prim=(1.0, 0.0),
        uR_prim=(1.0, 0.5),
    ),
}


@dataclass
class RunConfig:
    """One experiment, serializable to a flat sectioned text file."""

    scenario: str = "two_shock_isentropic"
    model: str = "isentropic_euler"
    params: dict = field(default_factory=lambda: {"gamma": 2.0, "kappa": 1.0})
    uL_prim: tuple = (1.0, 0.0)
    uR_prim: tuple = (1.0, -np.sqrt(6.0))
    eps: float = 0.0
    profile: str = "sine"
    seed: int = 0
    N: int = 500
    x_min: float = -2.0
    x_max: float = 2.0
    cfl: float = 0.4
    scheme: str = "rusanov"
    t_end: float = 0.22
    t0: float = 0.2
    R: float = 0.6
    n_mollify: int = 4
    output: str = ""

    @classmethod
    def from_scenario(cls, name: str, **overrides) -> "RunConfig":
        if name not in SCENARIOS:
            raise ConfigError(
                f"unknown scenario: {name} (choose from {sorted(SCENARIOS)})"
            )
        s = SCENARIOS[name]
        return cls(
            scenario=name,
            model=s["model"],
            params=dict(s["params"]),
            uL_prim=tuple(s["uL_prim"]),
            uR_prim=tuple(s["uR_prim"]),
            **overrides,
        )

    @classmethod
    def from_ini(cls, path) -> "RunConfig":
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file: {path}")
        try:
            cfg = cls(
                scenario=parser.get("data", "scenario"),
                model=parser.get("model", "name"),
                params={
                    k: parser.getfloat("model", k)
                    for k in parser.options("model")
                    if k != "name"
                },
                uL_prim=tuple(
                    float(v) for v in parser.get("data", "left").split(",")
                ),
                uR_prim=tuple(
                    float(v) for v in parser.get("data", "right").split(",")
                ),
                eps=parser.getfloat("data", "eps"),
                profile=parser.get("data", "profile"),
                seed=parser.getint("data", "seed"),
                N=parser.getint("grid", "n"),
                x_min=parser.getfloat("grid", "x_min"),
                x_max=parser.getfloat("grid", "x_max"),
                cfl=parser.getfloat("grid", "cfl"),
                scheme=parser.get("run", "scheme"),
                t_end=parser.getfloat("run", "t_end"),
                t0=parser.getfloat("run", "t0"),
                R=parser.getfloat("run", "r_window"),
                n_mollify=parser.getint("run", "n_mollify"),
                output=parser.get("output", "directory", fallback=""),
            )
        except (configparser.Error, ValueError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        cfg.validate()
        return cfg

    def to_ini(self, path) -> None:
        parser = configparser.ConfigParser()
        parser["model"] = {"name": self.model}
        for k, v in self.params.items():
            parser["model"][k] = f"{v:.17g}"
        parser["data"] = {
            "scenario": self.scenario,
            "left": ",".join(f"{v:.17g}" for v in self.uL_prim),
            "right": ",".join(f"{v:.17g}" for v in self.uR_prim),
            "eps": f"{self.eps:.17g}",
            "profile": self.profile,
            "seed": str(self.seed),
        }
        parser["grid"] = {
            "n": str(self.N),
            "x_min": f"{self.x_min:.17g}",
            "x_max": f"{self.x_max:.17g}",
            "cfl": f"{self.cfl:.17g}",
        }
        parser["run"] = {
            "scheme": self.scheme,
            "t_end": f"{self.t_end:.17g}",
            "t0": f"{self.t0:.17g}",
            "r_window": f"{self.R:.17g}",
            "n_mollify": str(self.n_mollify),
        }
        parser["output"] = {"directory": self.output}
        with open(path, "w") as fh:
            parser.write(fh)

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario: {self.scenario}")
        if self.eps < 0:
            raise ConfigError("eps must be nonnegative")
        if self.profile not in ("sine", "bump", "noise"):
            raise ConfigError(f"unknown profile: {self.profile}")
        if self.scheme not in ("rusanov", "godunov_exact"):
            raise ConfigError(f"unknown scheme: {self.scheme}")
        if not 0.0 < self.t0 <= self.t_end:
            raise ConfigError("need 0 < t0 <= t_end")
        if self.n_mollify < 1:
            raise ConfigError("n_mollify must be at least 1")
        # construction re-checks N, cfl, and bounds
        Grid1D(self.x_min, self.x_max, self.N, self.cfl)

    def build_model(self):
        return make_model(self.model, **self.params)

    def states(self, model):
        return (
            model.to_conserved(np.asarray(self.uL_prim, dtype=float)),
            model.to_conserved(np.asarray(self.uR_prim, dtype=float)),
        )


def _output_dir(config: RunConfig, suffix: str = "") -> Path:
    if config.output:
        base = Path(config.output)
    else:
        root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
        tag = f"{config.scenario}_eps{config.eps:g}_N{config.N}{suffix}"
        base = root / tag
    base.mkdir(parents=True, exist_ok=True)
    return base


def _write_manifest(path, entries: dict) -> None:
    with open(path, "w") as fh:
        for k, v in entries.items():
            fh.write(f"{k} = {v}\n")


def read_manifest(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def _snapshot_overlay_csv(path, traj, psi, k: int, t: float) -> None:
    xs = traj.grid.centers()
    pv = psi.evaluate(xs, t)
    n = traj.model.n
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["x"] + [f"u{i}" for i in range(n)] + [f"psi{i}" for i in range(n)]
        )
        for x, u, p in zip(xs, traj.snapshots[k], pv):
            writer.writerow(
                [f"{x:.12g}"]
                + [f"{c:.17g}" for c in u]
                + [f"{c:.17g}" for c in p]
            )


def execute_run(config: RunConfig, C_num: float = None, out_dir=None) -> dict:
    """Full pipeline for one configuration; returns a result summary.

    Raises ShockLabError subclasses on configuration or numerical
    failure; an out-of-theory wave pattern is reported, not raised.
    """
    config.validate()
    model = config.build_model()
    uL, uR = config.states(model)
    sol = solve_riemann(model, uL, uR)
    cls = classify_waves(sol)
    out = _output_dir(config) if out_dir is None else Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.to_ini(out / "config.ini")

    manifest = {
        "scenario": config.scenario,
        "model": config.model,
        "eps": f"{config.eps:.17g}",
        "profile": config.profile,
        "seed": config.seed,
        "N": config.N,
        "scheme": config.scheme,
        "t_end": f"{config.t_end:.17g}",
        "t0": f"{config.t0:.17g}",
        "R": f"{config.R:.17g}",
        "n_mollify": config.n_mollify,
        "regime": cls.regime,
    }
    if not cls.inside_verified_theory:
        manifest["status"] = "outside_verified_theory"
        _write_manifest(out / "manifest.txt", manifest)
        return {"status": "outside_verified_theory", "dir": out, "exit": 1}

    shock1 = shockn = None
    w1 = sol.wave_by_family(1)
    wn = sol.wave_by_family(model.n)
    if w1.kind == "shock":
        shock1 = (w1.left, w1.right)
        manifest["sigma_1"] = f"{w1.sigma:.17g}"
    if wn.kind == "shock":
        shockn = (wn.left, wn.right)
        manifest["sigma_n"] = f"{wn.sigma:.17g}"

    box = box_around_states(model, sol.states, pad=0.4)
    theta = None
    if cls.has_rarefaction and shock1 is not None:
        theta = fan_separation_radius(model, sol, box)
    if shock1 is None and shockn is None:
        sel = TRIVIAL_SELECTION
    else:
        sel = select_weights(model, shock1, shockn, box, theta=theta)

    grid = Grid1D(config.x_min, config.x_max, config.N, config.cfl)
    data = perturb_riemann_data(
        uL, uR, config.eps, config.profile, seed=config.seed, model=model
    )
    traj = simulate(model, data, grid, config.t_end, scheme=config.scheme)

    h1 = hn = None
    if shock1 is not None:
        h1 = integrate_filippov(
            traj, make_v1_field(model, *shock1, sel), 0.0, config.n_mollify
        )
        h1.to_csv(out / "shift_h1.csv")
    if shockn is not None:
        hn = integrate_filippov(
            traj, make_vn_field(model, *shockn, sel), 0.0, config.n_mollify
        )
        hn.to_csv(out / "shift_hn.csv")

    ordering_gap = ""
    if h1 is not None and hn is not None:
        ordering = check_ordering(h1, hn)
        ordering_gap = ordering.min_gap
        manifest["ordering_min_gap"] = f"{ordering.min_gap:.17g}"
        manifest["ordering_pass"] = ordering.passed

    psi = build_psi(sol, h1=h1, hn=hn)
    if psi.fan_cut_low is not None:
        manifest["fan_cut_low"] = f"{psi.fan_cut_low:.17g}"
    if psi.fan_cut_high is not None:
        manifest["fan_cut_high"] = f"{psi.fan_cut_high:.17g}"

    report = stability_report(
        model, traj, psi, sel, R=config.R, t0=config.t0, C_num=C_num, box=box
    )
    for k, v in sel.as_manifest_dict().items():
        manifest[f"weights.{k}"] = f"{v:.17g}"
    for k, v in report.as_manifest_dict().items():
        manifest[f"report.{k}"] = v
    manifest["status"] = "pass" if report.verdict else "verdict_fail"
    _write_manifest(out / "manifest.txt", manifest)

    report.series_to_csv(out / "series.csv", psi)
    k0 = 0
    k_end = int(np.searchsorted(traj.times, config.t0 + 1e-12)) - 1
    _snapshot_overlay_csv(out / "snapshot_initial.csv", traj, psi, k0, 0.0)
    _snapshot_overlay_csv(
        out / "snapshot_final.csv", traj, psi, k_end, float(traj.times[k_end])
    )

    return {
        "status": manifest["status"],
        "dir": out,
        "exit": 0 if report.verdict else 1,
        "report": report,
        "ordering_min_gap": ordering_gap,
        "selection": sel,
    }


def execute_certify(config: RunConfig, out_dir=None) -> dict:
    """Structural hypothesis certification for the configured scenario."""
    config.validate()
    model = config.build_model()
    uL, uR = config.states(model)
    out = _output_dir(config, suffix="_certify") if out_dir is None else Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    lines = {}
    ok = True

    box = box_around_states(model, [uL, uR], pad=0.4)
    samples = box.sample(400, seed=7)
    samples = samples[model.is_admissible(samples)]
    compat = check_compatibility(model, samples)
    lines["compatibility"] = compat.passed
    ok &= compat.passed

    try:
        sol = solve_riemann(model, uL, uR)
    except ShockLabError as exc:
        lines["riemann_solve"] = f"failed: {exc}"
        _write_manifest(out / "hypotheses.txt", lines)
        return {"dir": out, "exit": 3, "certified": False}

    any_shock = False
    for family in (1, model.n):
        wave = sol.wave_by_family(family)
        if wave.kind != "shock":
            continue
        any_shock = True
        base = wave.left if family == 1 else wave.right
        partner = wave.right if family == 1 else wave.left
        span = 3.0 * float(np.linalg.norm(partner - base))
        curve = trace_hugoniot(model, base, family, s_max=max(span, 1.0), ds=2e-3)
        cross = trace_hugoniot(
            model, base, model.n if family == 1 else 1, s_max=max(span, 1.0), ds=2e-3
        )
        hyp = check_H1(model, curve, cross_curve=cross)
        # the traced curve is sampled every ds in arclength, so the
        # nearest sample sits within one step of the partner state
        lines[f"family_{family}.curve_contains_partner"] = (
            curve.distance_to(partner) < 5e-3
        )
        lines[f"family_{family}.speed_monotone"] = hyp.liu_ok
        lines[f"family_{family}.strengthening"] = hyp.strengthening_ok
        lines[f"family_{family}.opposite_speed_bound"] = hyp.h2_ok
        lines[f"family_{family}.curve_membership"] = hyp.h3_sampled_ok
        lines[f"family_{family}.lax_strong"] = check_lax_strong(
            model, wave.left, wave.right, wave.sigma, family
        )
        ok &= bool(
            lines[f"family_{family}.curve_contains_partner"]
            and hyp.all_ok
            and lines[f"family_{family}.lax_strong"]
        )
    lines["has_shocks"] = any_shock

    rare = [w for w in sol.waves if w.kind == "rarefaction"]
    if rare:
        u_samples = box.sample(200, seed=11)
        u_samples = u_samples[model.is_admissible(u_samples)]
        sign_ok = True
        for wave in rare:
            rep = check_sign_condition(
                model, wave, u_samples, t_samples=(0.05, 0.1, 0.2)
            )
            sign_ok &= rep.passed
        lines["rarefaction_sign_condition"] = sign_ok
        ok &= sign_ok

    lines["certified"] = ok
    _write_manifest(out / "hypotheses.txt", lines)
    return {"dir": out, "exit": 0 if ok else 1, "certified": ok}


def execute_sweep(config: RunConfig, eps_list, n_list, out_root=None) -> dict:
    """Cartesian eps x N runs; the eps=0 run of each N calibrates the
    numerical-dissipation allowance, which is then frozen for that N."""
    if not eps_list or not n_list:
        raise ConfigError("sweep needs nonempty eps and N lists")
    root = (
        Path(out_root)
        if out_root is not None
        else Path(os.environ.get(OUTPUT_ROOT_ENV, "runs")) / f"sweep_{config.scenario}"
    )
    root.mkdir(parents=True, exist_ok=True)

    rows = []
    worst_exit = 0
    for N in n_list:
        base = replace(config, N=N, eps=0.0, output="")
        ref_dir = root / f"eps0_N{N}_ref"
        try:
            ref = execute_run(base, out_dir=ref_dir)
            C_num = ref["report"].C_num if "report" in ref else None
        except ConfigError as exc:
            rows.append([0.0, N, "", "", "", "", f"config: {exc}"])
            worst_exit = max(worst_exit, 2)
            continue
        except ShockLabError as exc:
            rows.append([0.0, N, "", "", "", "", f"error: {exc}"])
            worst_exit = max(worst_exit, 3)
            continue
        for eps in eps_list:
            cfg = replace(config, N=N, eps=float(eps), output="")
            run_dir = root / f"eps{eps:g}_N{N}"
            try:
                res = execute_run(cfg, C_num=C_num, out_dir=run_dir)
                rep = res.get("report")
                rows.append(
                    [
                        float(eps),
                        N,
                        f"{rep.mu1:.12g}" if rep else "",
                        f"{rep.mu2:.12g}" if rep else "",
                        f"{rep.E.max():.12g}" if rep else "",
                        res.get("ordering_min_gap", ""),
                        res["status"],
                    ]
                )
                worst_exit = max(worst_exit, res["exit"])
            except ConfigError as exc:
                rows.append([float(eps), N, "", "", "", "", f"config: {exc}"])
                worst_exit = max(worst_exit, 2)
            except ShockLabError as exc:
                rows.append([float(eps), N, "", "", "", "", f"error: {exc}"])
                worst_exit = max(worst_exit, 3)

    summary = root / "summary.csv"
    with open(summary, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["eps", "N", "mu1", "mu2", "sup_E", "ordering_min_gap", "status"]
        )
        writer.writerows(rows)
    return {"dir": root, "summary": summary, "exit": worst_exit, "rows": rows}


REQUIRED_MANIFEST_KEYS = ("scenario", "model", "eps", "N", "scheme", "status")
CSV_SCHEMAS = {
    "series.csv": ["t", "E", "h1", "hn"],
    "shift_h1.csv": ["t", "h", "hdot", "regime"],
    "shift_hn.csv": ["t", "h", "hdot", "regime"],
}


def execute_validate(directory) -> dict:
    """Schema conformance check for one artifact directory."""
    directory = Path(directory)
    problems = []
    manifest_path = directory / "manifest.txt"
    if not manifest_path.exists():
        problems.append("missing manifest.txt")
        manifest = {}
    else:
        manifest = read_manifest(manifest_path)
        for key in REQUIRED_MANIFEST_KEYS:
            if key not in manifest:
                problems.append(f"manifest missing key: {key}")

    outside = manifest.get("status") == "outside_verified_theory"
    for name, header in CSV_SCHEMAS.items():
        path = directory / name
        if not path.exists():
            # shift files are legitimately absent without the matching shock,
            # and out-of-theory runs stop before writing series
            if name.startswith("shift_") or outside:
                continue
            problems.append(f"missing {name}")
            continue
        with open(path, newline="") as fh:
            row = next(csv.reader(fh), None)
        if row != header:
            problems.append(f"{name}: bad header {row}")
    for name in ("snapshot_initial.csv", "snapshot_final.csv"):
        path = directory / name
        if not path.exists():
            if not outside:
                problems.append(f"missing {name}")
            continue
        with open(path, newline="") as fh:
            row = next(csv.reader(fh), None)
        if not row or row[0] != "x":
            problems.append(f"{name}: bad header {row}")
    return {"problems": problems, "exit": 0 if not problems else 1}


# ---------------------------------------------------------------------
# argument parsing


def _add_config_flags(p):
    p.add_argument("--config", help="INI config file")
    p.add_argument("--scenario", help="named scenario")
    p.add_argument("--eps", type=float)
    p.add_argument("--profile", choices=("sine", "bump", "noise"))
    p.add_argument("--seed", type=int)
    p.add_argument("--N", type=int, dest="N")
    p.add_argument("--cfl", type=float)
    p.add_argument("--scheme", choices=("rusanov", "godunov_exact"))
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--t0", type=float)
    p.add_argument("--window", type=float, dest="R")
    p.add_argument("--n-mollify", type=int, dest="n_mollify")
    p.add_argument("--output", help="artifact directory")


def _config_from_args(args) -> RunConfig:
    if args.config:
        cfg = RunConfig.from_ini(args.config)
    elif args.scenario:
        cfg = RunConfig.from_scenario(args.scenario)
    else:
        raise ConfigError("need --config or --scenario")
    for name in (
        "eps", "profile", "seed", "N", "cfl", "scheme",
        "t_end", "t0", "R", "n_mollify", "output",
    ):
        value = getattr(args, name, None)
        if value is not None:
            cfg = replace(cfg, **{name: value})
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="shocklab", description="Riemann-pattern stability laboratory"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one configured run")
    _add_config_flags(p_run)
    p_cert = sub.add_parser("certify", help="structural hypothesis checks")
    _add_config_flags(p_cert)
    p_sweep = sub.add_parser("sweep", help="eps x N sweep with summary")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--eps-list", default="0,0.01,0.05")
    p_sweep.add_argument("--n-list", default="500,2000")
    p_val = sub.add_parser("validate", help="check an artifact directory")
    p_val.add_argument("directory")

    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            result = execute_validate(args.directory)
            for p in result["problems"]:
                print(f"invalid: {p}", file=sys.stderr)
            if not result["problems"]:
                print("artifact schema: ok")
            return result["exit"]

        cfg = _config_from_args(args)
        if args.command == "run":
            result = execute_run(cfg)
            print(f"status: {result['status']}  artifacts: {result['dir']}")
            return result["exit"]
        if args.command == "certify":
            result = execute_certify(cfg)
            print(
                f"certified: {result['certified']}  artifacts: {result['dir']}"
            )
            return result["exit"]
        if args.command == "sweep":
            eps_list = [float(v) for v in args.eps_list.split(",") if v != ""]
            n_list = [int(v) for v in args.n_list.split(",") if v != ""]
            result = execute_sweep(cfg, eps_list, n_list)
            print(f"summary: {result['summary']}")
            return result["exit"]
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ShockLabError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
