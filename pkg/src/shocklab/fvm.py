"""Entropy-stable finite-volume generation of rough weak solutions.

The default scheme is the local two-speed diffusive flux (Rusanov),
which satisfies a cell-wise discrete entropy inequality under the CFL
restriction; an exact-solver Godunov flux is available for sharper
reference runs.  Boundaries are outflow copies and domains are sized so
waves never reach them, which the driver checks.

Trajectories store every accepted snapshot so shift paths can be
integrated against per-step data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InadmissibleStateError, SimulationError, TraceError
from .models import SystemModel
from .riemann import evaluate as riemann_evaluate
from .riemann import solve_riemann


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell-centered grid."""

    x_min: float
    x_max: float
    N: int
    cfl: float = 0.4

    def __post_init__(self):
        if self.N < 16:
            raise ConfigError(f"need at least 16 cells, got {self.N}")
        if not (0.0 < self.cfl <= 0.9):
            raise ConfigError(f"cfl must be in (0, 0.9], got {self.cfl}")
        if self.x_max <= self.x_min:
            raise ConfigError("empty domain")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.N

    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.N) + 0.5) * self.dx


PROFILES = ("sine", "bump", "noise")


def _profile_function(profile: str, seed: int):
    """Compactly supported perturbation shape on [-1, 1], peak size 1."""
    if profile == "sine":
        def phi(x):
            x = np.asarray(x, dtype=float)
            return np.where(np.abs(x) < 1.0, np.sin(2.0 * np.pi * x), 0.0)
        return phi
    if profile == "bump":
        def phi(x):
            x = np.asarray(x, dtype=float)
            inside = np.abs(x) < 1.0
            with np.errstate(divide="ignore", over="ignore"):
                val = np.where(inside, np.exp(1.0 - 1.0 / np.maximum(1.0 - x * x, 1e-300)), 0.0)
            return val
        return phi
    if profile == "noise":
        rng = np.random.default_rng(seed)
        coeffs = rng.standard_normal(8) / (1.0 + np.arange(8))

        def phi(x):
            x = np.asarray(x, dtype=float)
            inside = np.abs(x) < 1.0
            val = np.zeros_like(x)
            for k, a in enumerate(coeffs, start=1):
                val += a * np.sin(k * np.pi * x)
            val /= np.abs(coeffs).sum()
            return np.where(inside, val, 0.0)
        return phi
    raise ConfigError(f"unknown perturbation profile: {profile}")


def perturb_riemann_data(
    uL,
    uR,
    eps: float,
    profile: str = "sine",
    seed: int = 0,
    direction=None,
    model: SystemModel | None = None,
):
    """Initial data: the two-state step plus a compactly supported bump.

    Returns x -> state (vectorized).  The perturbation is eps times a
    fixed unit direction (density by default) times a shape supported
    on [-1, 1].  With eps = 0 this is the exact step.  If a model is
    given, admissibility of the perturbed data is checked up front.
    """
    uL = np.asarray(uL, dtype=float)
    uR = np.asarray(uR, dtype=float)
    if eps < 0.0:
        raise ConfigError("perturbation amplitude must be nonnegative")
    n = uL.shape[-1]
    if direction is None:
        direction = np.zeros(n)
        direction[0] = 1.0
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    phi = _profile_function(profile, seed)

    def data(x):
        x = np.asarray(x, dtype=float)
        base = np.where(x[..., None] < 0.0, uL, uR)
        return base + eps * phi(x)[..., None] * direction

    if model is not None and eps > 0.0:
        xs = np.linspace(-1.0, 1.0, 4001)
        ok = model.is_admissible(data(xs))
        if not np.all(ok):
            bad_x = xs[~ok][0]
            raise InadmissibleStateError(
                f"perturbed data inadmissible at x={bad_x:.6g}"
            )
    return data


@dataclass
class Trajectory:
    """Space-time solution from the finite-volume scheme."""

    model: SystemModel
    grid: Grid1D
    scheme: str
    times: np.ndarray  # (K+1,)
    snapshots: np.ndarray  # (K+1, N, n)
    boundary_fluxes: np.ndarray  # (K, 2, n): left/right interface flux per step
    entropy_fluxes: np.ndarray | None = None  # (K, N+1) when stored
    boundary_mode: str = "outflow"

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def index_of_time(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 + 1e-6 * max(abs(t), 1.0):
            raise TraceError(f"t={t} is not a snapshot time")
        return k

    def conservation_defect(self) -> float:
        """Worst per-step defect of total conserved quantities against
        the boundary flux balance."""
        dx = self.grid.dx
        totals = self.snapshots.sum(axis=1) * dx
        dts = np.diff(self.times)
        change = np.diff(totals, axis=0)
        balance = dts[:, None] * (
            self.boundary_fluxes[:, 0, :] - self.boundary_fluxes[:, 1, :]
        )
        return float(np.abs(change - balance).max())

    def snapshot_to_csv(self, path, k: int) -> None:
        xs = self.grid.centers()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x"] + [f"u{i}" for i in range(self.model.n)])
            for x, u in zip(xs, self.snapshots[k]):
                writer.writerow([f"{x:.12g}"] + [f"{c:.17g}" for c in u])


def _rusanov_flux(model, left, right, diffusion_scale=1.0):
    """Two-point diffusive flux and matching numerical entropy flux."""
    fl = model.flux(left)
    fr = model.flux(right)
    alpha = np.maximum(
        np.abs(model.char_speeds(left)).max(axis=-1),
        np.abs(model.char_speeds(right)).max(axis=-1),
    )
    alpha = diffusion_scale * alpha
    F = 0.5 * (fl + fr) - 0.5 * alpha[..., None] * (right - left)
    Q = 0.5 * (model.entropy_flux(left) + model.entropy_flux(right)) - 0.5 * alpha * (
        model.entropy(right) - model.entropy(left)
    )
    return F, Q


def _godunov_flux(model, left, right):
    """Exact-solver flux: evaluate each interface problem on the axis.

    Interfaces with equal neighbor states short-circuit to the plain
    flux, which keeps the cost proportional to the number of jumps.
    """
    F = model.flux(left).copy()
    Q = model.entropy_flux(left).copy()
    jumps = np.abs(right - left).max(axis=-1) > 1e-14
    for i in np.nonzero(jumps)[0]:
        sol = solve_riemann(model, left[i], right[i])
        w = riemann_evaluate(sol, 0.0, 1.0)
        F[i] = model.flux(w)
        Q[i] = model.entropy_flux(w)
    return F, Q


def simulate(
    model: SystemModel,
    data,
    grid: Grid1D,
    t_end: float,
    scheme: str = "rusanov",
    diffusion_scale: float = 1.0,
    store_entropy_fluxes: bool = False,
) -> Trajectory:
    """Explicit first-order evolution of the initial data to t_end.

    Time steps satisfy dt = cfl * dx / max|speed| per step.  Every step
    is stored.  `diffusion_scale` is a diagnostic knob for the diffusive
    scheme only; values below 1 break the entropy inequality on purpose.
    """
    if t_end <= 0.0:
        raise ConfigError("t_end must be positive")
    if scheme not in ("rusanov", "godunov_exact"):
        raise ConfigError(f"unknown scheme: {scheme}")
    xs = grid.centers()
    u = np.asarray(data(xs), dtype=float)
    if u.shape != (grid.N, model.n):
        raise ConfigError("initial data shape mismatch")
    if not np.all(model.is_admissible(u)):
        bad = int(np.nonzero(~model.is_admissible(u))[0][0])
        raise SimulationError("inadmissible initial data", time=0.0, cell=bad)

    dx = grid.dx
    times = [0.0]
    snaps = [u.copy()]
    bfluxes = []
    qfluxes = [] if (store_entropy_fluxes or scheme == "godunov_exact") else None

    t = 0.0
    while t < t_end - 1e-12:
        speeds = np.abs(model.char_speeds(u)).max()
        if not np.isfinite(speeds) or speeds <= 0.0:
            raise SimulationError("wave speed estimate blew up", time=t)
        dt = min(grid.cfl * dx / speeds, t_end - t)
        left = np.concatenate([u[:1], u], axis=0)  # outflow copies
        right = np.concatenate([u, u[-1:]], axis=0)
        if scheme == "rusanov":
            F, Q = _rusanov_flux(model, left, right, diffusion_scale)
        else:
            F, Q = _godunov_flux(model, left, right)
        u = u - dt / dx * (F[1:] - F[:-1])
        ok = model.is_admissible(u)
        if not np.all(ok):
            bad = int(np.nonzero(~ok)[0][0])
            raise SimulationError(
                "admissibility lost during the run", time=t + dt, cell=bad
            )
        t += dt
        times.append(t)
        snaps.append(u.copy())
        bfluxes.append(np.stack([F[0], F[-1]]))
        if qfluxes is not None:
            qfluxes.append(Q)

    return Trajectory(
        model=model,
        grid=grid,
        scheme=scheme,
        times=np.array(times),
        snapshots=np.array(snaps),
        boundary_fluxes=np.array(bfluxes),
        entropy_fluxes=np.array(qfluxes) if qfluxes is not None else None,
    )


@dataclass
class EntropyResidualReport:
    max_excess: float
    passed: bool
    worst_step: int
    worst_cell: int


def entropy_residual(model: SystemModel, traj: Trajectory, diffusion_scale: float = 1.0) -> EntropyResidualReport:
    """Cell-wise discrete entropy inequality check.

    Computes (eta^{k+1} - eta^k)/dt + (Q_{j+1/2} - Q_{j-1/2})/dx with
    the scheme's numerical entropy flux and reports the worst positive
    excess; the run passes iff that excess is at most 1e-10.
    """
    if traj.n_steps < 1:
        raise ConfigError("trajectory needs at least two snapshots")
    dx = traj.grid.dx
    dts = np.diff(traj.times)
    max_excess = -np.inf
    worst = (0, 0)
    for k in range(traj.n_steps):
        u = traj.snapshots[k]
        if traj.entropy_fluxes is not None:
            Q = traj.entropy_fluxes[k]
        else:
            left = np.concatenate([u[:1], u], axis=0)
            right = np.concatenate([u, u[-1:]], axis=0)
            _, Q = _rusanov_flux(traj.model, left, right, diffusion_scale)
        eta0 = traj.model.entropy(u)
        eta1 = traj.model.entropy(traj.snapshots[k + 1])
        resid = (eta1 - eta0) / dts[k] + (Q[1:] - Q[:-1]) / dx
        j = int(np.argmax(resid))
        if resid[j] > max_excess:
            max_excess = float(resid[j])
            worst = (k, j)
    return EntropyResidualReport(
        max_excess=max_excess,
        passed=max_excess <= 1e-10,
        worst_step=worst[0],
        worst_cell=worst[1],
    )


@dataclass
class TraceSeries:
    """One-sided states sampled along a moving path."""

    times: np.ndarray
    path: np.ndarray
    left_states: np.ndarray
    right_states: np.ndarray
    offset_spread: float = 0.0


def trace_at(traj: Trajectory, h, offset: int = 1, diagnostic_offsets=(1, 2, 3)) -> TraceSeries:
    """Approximate one-sided limits of the solution along a path.

    The trace on each side is the cell average `offset` cells beyond
    the cell containing the path.  A refinement diagnostic reports the
    spread across the given offsets.
    """
    grid = traj.grid
    if callable(h):
        path = np.asarray([h(t) for t in traj.times], dtype=float)
    else:
        path = np.asarray(h, dtype=float)
        if path.shape != traj.times.shape:
            raise TraceError("path sampling must match trajectory times")
    margin = 4.0 * grid.dx
    if path.min() < grid.x_min + margin or path.max() > grid.x_max - margin:
        raise TraceError("path leaves the domain margin")

    idx = np.floor((path - grid.x_min) / grid.dx).astype(int)
    idx = np.clip(idx, 0, grid.N - 1)
    rows = np.arange(len(traj.times))

    def side_states(off, side):
        j = idx - off if side == "left" else idx + off
        j = np.clip(j, 0, grid.N - 1)
        return traj.snapshots[rows, j]

    left = side_states(offset, "left")
    right = side_states(offset, "right")
    spread = 0.0
    for off in diagnostic_offsets:
        if off == offset:
            continue
        spread = max(
            spread,
            float(np.abs(side_states(off, "left") - left).max()),
            float(np.abs(side_states(off, "right") - right).max()),
        )
    return TraceSeries(
        times=traj.times.copy(),
        path=path,
        left_states=left,
        right_states=right,
        offset_spread=spread,
    )
