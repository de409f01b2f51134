"""Hyperbolic system models and relative-entropy quantities.

A state is a numpy array whose last axis holds the conserved variables,
so every evaluator broadcasts over arbitrary leading axes.  Two concrete
gas-dynamics models are provided: isentropic Euler (density, momentum)
with pressure law p = kappa * rho**gamma, and full Euler (density,
momentum, total energy) with a gamma-law gas.

All derivatives are closed-form.  Finite differences appear only in
check_compatibility, which acts as an independent oracle for the
entropy-pair relation grad(q) = grad(eta) @ jac(f).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InadmissibleStateError

# states with density or internal energy at or below this are rejected
ADMISSIBILITY_MARGIN = 1e-12


class SystemModel:
    """Abstract 1D hyperbolic system with a strictly convex entropy.

    Subclasses implement the flux, the entropy pair and their exact
    derivatives, all vectorized over the leading axes of the state
    array.  Instances are immutable and safe to share across workers.
    """

    n: int
    name: str

    # -- admissibility -------------------------------------------------

    def is_admissible(self, u) -> np.ndarray:
        """Boolean mask of states inside the open state space."""
        raise NotImplementedError

    def require_admissible(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.n:
            raise InadmissibleStateError(
                f"state has {u.shape[-1]} components, model needs {self.n}",
                state=u,
            )
        if not np.all(np.isfinite(u)):
            raise InadmissibleStateError("non-finite state entries", state=u)
        ok = self.is_admissible(u)
        if not np.all(ok):
            bad = u[~ok] if u.ndim > 1 else u
            raise InadmissibleStateError(
                f"inadmissible state, violated predicate: {self.admissibility_predicate}",
                state=bad,
            )
        return u

    admissibility_predicate = "density > 0"

    # -- evaluators (shapes: u (..., n)) -------------------------------

    def flux(self, u):
        raise NotImplementedError

    def flux_jacobian(self, u):
        """Jacobian of the flux, shape (..., n, n)."""
        raise NotImplementedError

    def entropy(self, u):
        raise NotImplementedError

    def entropy_gradient(self, u):
        raise NotImplementedError

    def entropy_hessian(self, u):
        raise NotImplementedError

    def entropy_flux(self, u):
        raise NotImplementedError

    def char_speeds(self, u):
        """Characteristic speeds sorted ascending, shape (..., n)."""
        raise NotImplementedError

    def char_vectors(self, u):
        """Right eigenvectors of the flux Jacobian, shape (..., n, n).

        Column k corresponds to char_speeds(u)[..., k].
        """
        raise NotImplementedError

    # -- symmetry ------------------------------------------------------

    def reflect(self, u):
        """Mirror a state under x -> -x (momentum sign flips).

        A right-moving wave of the original data maps to a left-moving
        wave of the reflected data, which turns fastest-family problems
        into slowest-family problems of the same system.
        """
        u = np.asarray(u, dtype=float)
        out = u.copy()
        out[..., 1] = -out[..., 1]
        return out

    # -- primitive <-> conserved (used by StateBox) --------------------

    def to_conserved(self, prim):
        raise NotImplementedError

    def to_primitive(self, u):
        raise NotImplementedError

    primitive_names: tuple = ()


class IsentropicEuler(SystemModel):
    """Isentropic gas dynamics: u = (rho, m), p(rho) = kappa * rho**gamma."""

    n = 2
    name = "isentropic_euler"
    primitive_names = ("rho", "v")

    def __init__(self, gamma: float = 2.0, kappa: float = 1.0):
        if gamma <= 1.0:
            raise InadmissibleStateError(
                f"gamma must exceed 1 for a strictly convex entropy, got {gamma}"
            )
        if kappa <= 0.0:
            raise InadmissibleStateError(f"kappa must be positive, got {kappa}")
        self.gamma = float(gamma)
        self.kappa = float(kappa)
        self.params = {"gamma": self.gamma, "kappa": self.kappa}

    def is_admissible(self, u):
        u = np.asarray(u, dtype=float)
        return np.isfinite(u).all(axis=-1) & (u[..., 0] > ADMISSIBILITY_MARGIN)

    def pressure(self, rho):
        return self.kappa * rho ** self.gamma

    def sound_speed(self, rho):
        return np.sqrt(self.gamma * self.kappa) * rho ** ((self.gamma - 1.0) / 2.0)

    def flux(self, u):
        u = self.require_admissible(u)
        rho, m = u[..., 0], u[..., 1]
        return np.stack([m, m * m / rho + self.pressure(rho)], axis=-1)

    def flux_jacobian(self, u):
        u = self.require_admissible(u)
        rho, m = u[..., 0], u[..., 1]
        g, k = self.gamma, self.kappa
        zero = np.zeros_like(rho)
        row0 = np.stack([zero, np.ones_like(rho)], axis=-1)
        row1 = np.stack(
            [-(m / rho) ** 2 + g * k * rho ** (g - 1.0), 2.0 * m / rho], axis=-1
        )
        return np.stack([row0, row1], axis=-2)

    def entropy(self, u):
        u = self.require_admissible(u)
        rho, m = u[..., 0], u[..., 1]
        return m * m / (2.0 * rho) + self.kappa * rho ** self.gamma / (self.gamma - 1.0)

    def entropy_gradient(self, u):
        u = self.require_admissible(u)
        rho, m = u[..., 0], u[..., 1]
        g, k = self.gamma, self.kappa
        d_rho = -(m * m) / (2.0 * rho * rho) + g * k * rho ** (g - 1.0) / (g - 1.0)
        return np.stack([d_rho, m / rho], axis=-1)

    def entropy_hessian(self, u):
        u = self.require_admissible(u)
        rho, m = u[..., 0], u[..., 1]
        g, k = self.gamma, self.kappa
        h00 = m * m / rho ** 3 + g * k * rho ** (g - 2.0)
        h01 = -m / (rho * rho)
        h11 = 1.0 / rho
        row0 = np.stack([h00, h01], axis=-1)
        row1 = np.stack([h01, h11], axis=-1)
        return np.stack([row0, row1], axis=-2)

    def entropy_flux(self, u):
        u = self.require_admissible(u)
        rho, m = u[..., 0], u[..., 1]
        g, k = self.gamma, self.kappa
        return m ** 3 / (2.0 * rho * rho) + g * k / (g - 1.0) * m * rho ** (g - 1.0)

    def char_speeds(self, u):
        u = self.require_admissible(u)
        rho, m = u[..., 0], u[..., 1]
        v = m / rho
        c = self.sound_speed(rho)
        return np.stack([v - c, v + c], axis=-1)

    def char_vectors(self, u):
        lam = self.char_speeds(u)
        ones = np.ones_like(lam[..., 0])
        col0 = np.stack([ones, lam[..., 0]], axis=-1)
        col1 = np.stack([ones, lam[..., 1]], axis=-1)
        return np.stack([col0, col1], axis=-1)

    def to_conserved(self, prim):
        prim = np.asarray(prim, dtype=float)
        rho, v = prim[..., 0], prim[..., 1]
        return np.stack([rho, rho * v], axis=-1)

    def to_primitive(self, u):
        u = np.asarray(u, dtype=float)
        rho, m = u[..., 0], u[..., 1]
        return np.stack([rho, m / rho], axis=-1)


class FullEuler(SystemModel):
    """Full gas dynamics: u = (rho, m, E) with a gamma-law pressure.

    The entropy is -rho * s / (gamma - 1) with s = log(p) - gamma*log(rho),
    scaled so its Hessian in conserved variables is positive definite on
    positive-pressure states.
    """

    n = 3
    name = "full_euler"
    primitive_names = ("rho", "v", "p")
    admissibility_predicate = "density > 0 and internal energy > 0"

    def __init__(self, gamma: float = 1.4):
        if gamma <= 1.0:
            raise InadmissibleStateError(
                f"gamma must exceed 1 for a strictly convex entropy, got {gamma}"
            )
        self.gamma = float(gamma)
        self.params = {"gamma": self.gamma}

    def pressure(self, u):
        u = np.asarray(u, dtype=float)
        rho, m, E = u[..., 0], u[..., 1], u[..., 2]
        return (self.gamma - 1.0) * (E - m * m / (2.0 * rho))

    def is_admissible(self, u):
        u = np.asarray(u, dtype=float)
        finite = np.isfinite(u).all(axis=-1)
        rho = u[..., 0]
        with np.errstate(invalid="ignore", divide="ignore"):
            rho_ok = rho > ADMISSIBILITY_MARGIN
            e_int = np.where(rho_ok, u[..., 2] - u[..., 1] ** 2 / (2.0 * np.where(rho_ok, rho, 1.0)), -1.0)
        return finite & rho_ok & (e_int > ADMISSIBILITY_MARGIN)

    def sound_speed(self, u):
        rho = np.asarray(u, dtype=float)[..., 0]
        return np.sqrt(self.gamma * self.pressure(u) / rho)

    def flux(self, u):
        u = self.require_admissible(u)
        rho, m, E = u[..., 0], u[..., 1], u[..., 2]
        p = self.pressure(u)
        v = m / rho
        return np.stack([m, m * v + p, (E + p) * v], axis=-1)

    def flux_jacobian(self, u):
        u = self.require_admissible(u)
        rho, m, E = u[..., 0], u[..., 1], u[..., 2]
        g = self.gamma
        v = m / rho
        p = self.pressure(u)
        H = (E + p) / rho
        zero = np.zeros_like(rho)
        one = np.ones_like(rho)
        row0 = np.stack([zero, one, zero], axis=-1)
        row1 = np.stack(
            [0.5 * (g - 3.0) * v * v, (3.0 - g) * v, (g - 1.0) * one], axis=-1
        )
        row2 = np.stack(
            [v * (0.5 * (g - 1.0) * v * v - H), H - (g - 1.0) * v * v, g * v],
            axis=-1,
        )
        return np.stack([row0, row1, row2], axis=-2)

    def _log_entropy(self, u):
        rho = u[..., 0]
        p = self.pressure(u)
        return np.log(p) - self.gamma * np.log(rho)

    def entropy(self, u):
        u = self.require_admissible(u)
        return -u[..., 0] * self._log_entropy(u) / (self.gamma - 1.0)

    def _pressure_gradient(self, u):
        rho, m = u[..., 0], u[..., 1]
        g = self.gamma
        one = np.ones_like(rho)
        return np.stack(
            [(g - 1.0) * m * m / (2.0 * rho * rho), -(g - 1.0) * m / rho, (g - 1.0) * one],
            axis=-1,
        )

    def entropy_gradient(self, u):
        u = self.require_admissible(u)
        rho, m = u[..., 0], u[..., 1]
        g = self.gamma
        p = self.pressure(u)
        s = self._log_entropy(u)
        g0 = (g - s) / (g - 1.0) - m * m / (2.0 * rho * p)
        g1 = m / p
        g2 = -rho / p
        return np.stack([g0, g1, g2], axis=-1)

    def entropy_hessian(self, u):
        u = self.require_admissible(u)
        rho, m = u[..., 0], u[..., 1]
        g = self.gamma
        p = self.pressure(u)
        pu = self._pressure_gradient(u)
        su = pu / p[..., None]
        su[..., 0] -= g / rho
        # row 0: d/du of (g - s)/(g-1) - m^2/(2 rho p)
        kin = m * m / (2.0 * rho * p)
        row0 = -su / (g - 1.0)
        row0 = row0 - np.stack(
            [
                -kin / rho - kin / p * pu[..., 0],
                m / (rho * p) - kin / p * pu[..., 1],
                -kin / p * pu[..., 2],
            ],
            axis=-1,
        )
        # row 1: d/du of m/p
        row1 = -(m / (p * p))[..., None] * pu
        row1[..., 1] += 1.0 / p
        # row 2: d/du of -rho/p
        row2 = (rho / (p * p))[..., None] * pu
        row2[..., 0] -= 1.0 / p
        return np.stack([row0, row1, row2], axis=-2)

    def entropy_flux(self, u):
        u = self.require_admissible(u)
        return -u[..., 1] * self._log_entropy(u) / (self.gamma - 1.0)

    def char_speeds(self, u):
        u = self.require_admissible(u)
        rho, m = u[..., 0], u[..., 1]
        v = m / rho
        c = self.sound_speed(u)
        return np.stack([v - c, v, v + c], axis=-1)

    def char_vectors(self, u):
        u = self.require_admissible(u)
        rho, m, E = u[..., 0], u[..., 1], u[..., 2]
        v = m / rho
        c = self.sound_speed(u)
        p = self.pressure(u)
        H = (E + p) / rho
        one = np.ones_like(rho)
        col0 = np.stack([one, v - c, H - v * c], axis=-1)
        col1 = np.stack([one, v, 0.5 * v * v], axis=-1)
        col2 = np.stack([one, v + c, H + v * c], axis=-1)
        return np.stack([col0, col1, col2], axis=-1)

    def to_conserved(self, prim):
        prim = np.asarray(prim, dtype=float)
        rho, v, p = prim[..., 0], prim[..., 1], prim[..., 2]
        E = p / (self.gamma - 1.0) + 0.5 * rho * v * v
        return np.stack([rho, rho * v, E], axis=-1)

    def to_primitive(self, u):
        u = np.asarray(u, dtype=float)
        rho, m = u[..., 0], u[..., 1]
        return np.stack([rho, m / rho, self.pressure(u)], axis=-1)


def make_model(name: str, **params) -> SystemModel:
    """Factory used by the configuration layer."""
    if name == "isentropic_euler":
        return IsentropicEuler(**params)
    if name == "full_euler":
        return FullEuler(**params)
    raise InadmissibleStateError(f"unknown model: {name}")


# ---------------------------------------------------------------------
# relative quantities
# ---------------------------------------------------------------------

def relative_entropy(model: SystemModel, u, v):
    """eta(u) - eta(v) - grad_eta(v).(u - v); nonnegative, zero iff u == v."""
    u = model.require_admissible(u)
    v = model.require_admissible(v)
    du = u - v
    return model.entropy(u) - model.entropy(v) - np.sum(model.entropy_gradient(v) * du, axis=-1)


def relative_entropy_flux(model: SystemModel, u, v):
    """q(u) - q(v) - grad_eta(v).(f(u) - f(v))."""
    u = model.require_admissible(u)
    v = model.require_admissible(v)
    df = model.flux(u) - model.flux(v)
    return model.entropy_flux(u) - model.entropy_flux(v) - np.sum(model.entropy_gradient(v) * df, axis=-1)


def relative_flux(model: SystemModel, a, b):
    """f(a) - f(b) - jac_f(b)(a - b); quadratically small in a - b."""
    a = model.require_admissible(a)
    b = model.require_admissible(b)
    da = a - b
    lin = np.einsum("...ij,...j->...i", model.flux_jacobian(b), da)
    return model.flux(a) - model.flux(b) - lin


def relative_entropy_gradient(model: SystemModel, a, b):
    """grad_eta(a) - grad_eta(b) - (a - b)^T hess_eta(b); quadratically small."""
    a = model.require_admissible(a)
    b = model.require_admissible(b)
    da = a - b
    lin = np.einsum("...i,...ij->...j", da, model.entropy_hessian(b))
    return model.entropy_gradient(a) - model.entropy_gradient(b) - lin


# ---------------------------------------------------------------------
# state boxes and sampling
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class StateBox:
    """Axis-aligned box of states in primitive coordinates.

    Sampling returns conserved states; `hull_conserved` gives the
    conserved-coordinate bounding box, which is convex and so contains
    every segment between box states (needed for curvature bounds).
    """

    model: SystemModel
    lows: tuple
    highs: tuple

    def __post_init__(self):
        if len(self.lows) != self.model.n or len(self.highs) != self.model.n:
            raise InadmissibleStateError("box bounds must match model dimension")
        if any(l > h for l, h in zip(self.lows, self.highs)):
            raise InadmissibleStateError("box has low > high")

    def sample(self, count: int, seed=0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        prim = rng.uniform(self.lows, self.highs, size=(count, self.model.n))
        return self.model.to_conserved(prim)

    def grid(self, per_axis: int = 9) -> np.ndarray:
        axes = [np.linspace(l, h, per_axis if h > l else 1) for l, h in zip(self.lows, self.highs)]
        mesh = np.meshgrid(*axes, indexing="ij")
        prim = np.stack([m.ravel() for m in mesh], axis=-1)
        return self.model.to_conserved(prim)

    def contains(self, u) -> np.ndarray:
        prim = self.model.to_primitive(u)
        lo = np.asarray(self.lows)
        hi = np.asarray(self.highs)
        return np.all((prim >= lo - 1e-12) & (prim <= hi + 1e-12), axis=-1)

    def widened(self, factor: float) -> "StateBox":
        lo = np.asarray(self.lows, dtype=float)
        hi = np.asarray(self.highs, dtype=float)
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo) * factor
        new_lo = mid - half
        new_hi = mid + half
        # keep density (and pressure) strictly positive after widening
        new_lo[0] = max(new_lo[0], 1e-6)
        if self.model.n == 3:
            new_lo[2] = max(new_lo[2], 1e-6)
        return StateBox(self.model, tuple(new_lo), tuple(new_hi))

    def hull_conserved(self, per_axis: int = 9) -> tuple:
        g = self.grid(per_axis)
        return g.min(axis=0), g.max(axis=0)


def box_around_states(model: SystemModel, states, pad: float = 0.5) -> StateBox:
    """Smallest primitive-coordinate box containing `states`, padded."""
    prim = model.to_primitive(np.asarray(states, dtype=float))
    lo = prim.min(axis=0)
    hi = prim.max(axis=0)
    span = np.maximum(hi - lo, 0.1)
    lo = lo - pad * span
    hi = hi + pad * span
    lo[0] = max(lo[0], 1e-3)
    if model.n == 3:
        lo[2] = max(lo[2], 1e-3)
    return StateBox(model, tuple(lo), tuple(hi))


# ---------------------------------------------------------------------
# compatibility check (finite-difference oracle)
# ---------------------------------------------------------------------

@dataclass
class CompatibilityReport:
    passed: bool
    max_residual: float
    n_samples: int
    worst_state: np.ndarray | None = None
    tolerance: float = 1e-5


def _fd_gradient(func, u, rel_step=1e-6):
    """Central finite-difference gradient of a scalar function, (..., n)."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    for j in range(u.shape[-1]):
        h = rel_step * np.maximum(np.abs(u[..., j]), 1.0)
        up = u.copy()
        um = u.copy()
        up[..., j] += h
        um[..., j] -= h
        out[..., j] = (func(up) - func(um)) / (2.0 * h)
    return out


def _fd_jacobian(func, u, rel_step=1e-6):
    """Central finite-difference Jacobian of a vector function, (..., n, n)."""
    u = np.asarray(u, dtype=float)
    cols = []
    for j in range(u.shape[-1]):
        h = rel_step * np.maximum(np.abs(u[..., j]), 1.0)
        up = u.copy()
        um = u.copy()
        up[..., j] += h
        um[..., j] -= h
        cols.append((func(up) - func(um)) / (2.0 * h)[..., None])
    return np.stack(cols, axis=-1)


def check_compatibility(model: SystemModel, samples, entropy_flux=None) -> CompatibilityReport:
    """Verify grad(q) = grad(eta) @ jac(f) by central finite differences.

    Everything is differenced numerically (step 1e-6 relative), so the
    check is independent of the model's analytic derivatives.  Passing
    a replacement `entropy_flux` lets tests confirm the check rejects a
    corrupted entropy pair.
    """
    u = model.require_admissible(np.asarray(samples, dtype=float))
    q_func = entropy_flux if entropy_flux is not None else model.entropy_flux
    grad_q = _fd_gradient(q_func, u)
    grad_eta = _fd_gradient(model.entropy, u)
    jac_f = _fd_jacobian(model.flux, u)
    rhs = np.einsum("...i,...ij->...j", grad_eta, jac_f)
    scale = np.maximum(np.abs(rhs).max(axis=-1), 1.0)
    resid = np.abs(grad_q - rhs).max(axis=-1) / scale
    worst = int(np.argmax(resid))
    max_resid = float(resid.flat[worst])
    return CompatibilityReport(
        passed=max_resid < 1e-5,
        max_residual=max_resid,
        n_samples=u.reshape(-1, model.n).shape[0],
        worst_state=u.reshape(-1, model.n)[worst],
    )


# ---------------------------------------------------------------------
# quadratic comparability bounds
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticBounds:
    """Constants with c_star*|u-v|^2 <= eta(u|v) <= c_star_star*|u-v|^2 on the hull."""

    c_star: float
    c_star_star: float
    hull: StateBox

    def __post_init__(self):
        assert self.c_star <= self.c_star_star


def quadratic_bounds(model: SystemModel, box: StateBox, per_axis: int = 13) -> QuadraticBounds:
    """Curvature bounds of the entropy over the box's convex conserved hull.

    c_star is half the smallest Hessian eigenvalue found, shrunk 10%;
    c_star_star is half the largest, inflated 10%.  The Hessian is
    sampled on the conserved bounding box (convex), so the bounds apply
    along any segment between box states.
    """
    lo, hi = box.hull_conserved()
    axes = [np.linspace(l, h, per_axis if h > l else 1) for l, h in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    u = np.stack([m.ravel() for m in mesh], axis=-1)
    ok = model.is_admissible(u)
    if not np.all(ok):
        raise InadmissibleStateError(
            "box hull touches the admissibility boundary", state=u[~ok][:1]
        )
    eig = np.linalg.eigvalsh(model.entropy_hessian(u))
    if eig.min() <= 0:
        raise InadmissibleStateError("entropy not convex over the box hull")
    c_star = 0.5 * float(eig.min()) * 0.9
    c_star_star = 0.5 * float(eig.max()) * 1.1
    return QuadraticBounds(c_star=c_star, c_star_star=c_star_star, hull=box)
