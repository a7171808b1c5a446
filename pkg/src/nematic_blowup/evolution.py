"""Time stepping for the coupled velocity / director-angle system on the half-line.

    v_t = (1/r)(r v_r + r phi_t)_r
    phi_tt + 2 phi_t = (1/r)(r phi_r)_r - k^2 sin(2 phi) / (2 r^2) - v_r

and the equivalent pair for the averaged velocity h = r^-1 int_0^r v R dR,

    h_t = (1/r)(r h_r)_r - h / r^2 + phi_t,      v_r = h_t - phi_t.

The wave part is a kick-drift-kick leapfrog whose two half kicks treat the
damping by the trapezoid rule; the parabolic part is a theta-scheme solved
as a tridiagonal system between the kicks, forced by the half-step rate.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_banded

from .errors import CFLViolation, ConfigurationError, InstabilityError, NotAvailable, ShapeError
from .grid import RadialGrid, apply_bands, cumulative_integral, ddr, divergence, laplacian_bands

FORMULATIONS = ("primal", "h")
DAMPING_TREATMENTS = ("implicit", "explicit")


@dataclass
class FieldState:
    t: float
    phi: np.ndarray
    phi_t: np.ndarray
    v: np.ndarray
    h: np.ndarray | None     # None for a velocity-only state
    k: int
    grid: RadialGrid
    formulation: str = "primal"
    steps: int = 0

    def __post_init__(self):
        n = self.grid.n
        for name in ("phi", "phi_t", "v", "h"):
            if name == "h" and self.h is None:
                if self.formulation == "h":
                    raise ConfigurationError("an h-formulation state needs h")
                continue
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != (n,):
                raise ShapeError(f"{name} has shape {a.shape}, grid has {n} nodes")
            setattr(self, name, a)
        if self.formulation not in FORMULATIONS:
            raise ConfigurationError(f"unknown formulation {self.formulation!r}")

    def is_finite(self) -> bool:
        arrays = (self.phi, self.phi_t, self.v) + (() if self.h is None else (self.h,))
        return all(np.all(np.isfinite(a)) for a in arrays)

    def h_t(self) -> np.ndarray:
        """h_t = (1/r)(r h_r)_r - h/r^2 + phi_t, evaluated on the current samples."""
        if self.h is None:
            raise NotAvailable("this state carries no h samples")
        return apply_B(self.grid, self.h) + self.phi_t

    def copy(self) -> "FieldState":
        return replace(self, phi=self.phi.copy(), phi_t=self.phi_t.copy(), v=self.v.copy(),
                       h=None if self.h is None else self.h.copy())


@dataclass(frozen=True)
class SchemeConfig:
    dt: float
    theta: float = 0.5
    damping_treatment: str = "implicit"
    r_min_guard: float = 1e-3
    cfl_safety: float = 0.9
    # test-harness switches; the physical system has damping 2 and coupling on
    damping: float = 2.0
    coupling: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigurationError(f"dt must be positive, got {self.dt!r}")
        if not 0.5 <= self.theta <= 1.0:
            raise ConfigurationError(f"theta must lie in [1/2, 1], got {self.theta!r}")
        if self.damping_treatment not in DAMPING_TREATMENTS:
            raise ConfigurationError(f"damping_treatment must be one of {DAMPING_TREATMENTS}")
        if not 0 < self.cfl_safety <= 0.9:
            raise ConfigurationError(f"cfl_safety must lie in (0, 0.9], got {self.cfl_safety!r}")
        if self.r_min_guard < 0 or self.damping < 0:
            raise ConfigurationError("r_min_guard and damping must be non-negative")


# --- spatial operators ------------------------------------------------------

def apply_B(grid: RadialGrid, h) -> np.ndarray:
    """(1/r)(r h_r)_r - h/r^2 with h = 0 at the origin and at r_max."""
    h = np.asarray(h, dtype=float)
    return apply_bands(laplacian_bands(grid, "dirichlet"), h, 0.0, 0.0) - h / grid.nodes ** 2


def velocity_from_h(grid: RadialGrid, h) -> np.ndarray:
    """v = (r h)_r / r = h_r + h/r.

    The last node is the half control volume [r_{N-1/2}, r_N], on which the
    mean of v is exactly the flux difference of r h; this is the closure that
    matches the zero-flux velocity equation.
    """
    h = np.asarray(h, dtype=float)
    r = grid.nodes
    v = ddr(grid, h, 0.0) + h / r
    face = 0.5 * (r[-1] + r[-2])
    vol = 0.5 * (r[-1] ** 2 - face ** 2)
    v[-1] = (r[-1] * h[-1] - face * 0.5 * (h[-1] + h[-2])) / vol
    return v


def h_from_velocity(grid: RadialGrid, v) -> np.ndarray:
    """h = r^-1 int_0^r v R dR by cumulative quadrature."""
    return cumulative_integral(grid, v) / grid.nodes


def sin2_over_r2(phi, r, r_min_guard=0.0):
    """sin(2 phi) / (2 r^2); below r_min_guard written as phi * sinc / r^2."""
    out = np.sin(2 * phi) / (2 * r * r)
    m = int(np.searchsorted(r, r_min_guard))   # nodes are increasing
    if m:
        pg = phi[:m]
        out[:m] = pg * np.sinc(2 * pg / np.pi) / r[:m] ** 2
    return out


def stable_dt(grid: RadialGrid, k: int) -> float:
    """Largest leapfrog step for the undamped wave core, from a Gershgorin bound.

    The linearized wave operator is -Lap + k^2 cos(2 phi)/r^2; its spectrum
    lies below max_i(|diag_i| + |off_i|) with |cos| <= 1, and leapfrog is
    stable for dt^2 * lambda_max <= 4.
    """
    lower, diag, upper = laplacian_bands(grid, "dirichlet")
    bound = np.abs(diag) + np.abs(lower) + np.abs(upper) + k * k / grid.nodes ** 2
    return float(2.0 / np.sqrt(bound[:-1].max()))


@lru_cache(maxsize=32)
def _operators(grid: RadialGrid, k: int, dt: float, theta: float, formulation: str):
    r = grid.nodes
    lap_phi = laplacian_bands(grid, "dirichlet")
    if formulation == "primal":
        # zero total flux r (v_r + phi_t) through r_max: the condition equivalent
        # to h(r_max) = 0, since h(r_max) is the momentum integral over r_max
        lo, di, up = laplacian_bands(grid, "regular", "neumann")
        m = grid.n
    else:
        lo, di, up = lap_phi
        di = di - 1.0 / r ** 2
        m = grid.n - 1
    par = (lo, di, up)
    ab = np.zeros((3, m))
    ab[0, 1:] = -theta * dt * up[:m - 1]
    ab[1] = 1.0 - theta * dt * di[:m]
    ab[2, :-1] = -theta * dt * lo[1:m]
    return {"lap_phi": lap_phi, "par": par, "ab": ab, "m": m, "limit": stable_dt(grid, k)}


def _check_dt(state: FieldState, cfg: SchemeConfig, ops):
    grid = state.grid
    if cfg.dt > cfg.cfl_safety * grid.min_spacing:
        raise CFLViolation(f"dt={cfg.dt:.3e} exceeds {cfg.cfl_safety} * min spacing "
                           f"{grid.min_spacing:.3e}")
    if cfg.dt > ops["limit"]:
        raise CFLViolation(f"dt={cfg.dt:.3e} exceeds the k={state.k} stability bound {ops['limit']:.3e}")


def _force(state_k, grid, lap_phi, phi, v_r, cfg):
    r = grid.nodes
    f = apply_bands(lap_phi, phi, 0.0, phi[-1]) - state_k ** 2 * sin2_over_r2(phi, r, cfg.r_min_guard)
    if cfg.coupling:
        f = f - v_r
    return f


def _kick(psi, force, half, cfg):
    c = cfg.damping
    if cfg.damping_treatment == "implicit":
        out = (psi * (1.0 - 0.5 * half * c) + half * force) / (1.0 + 0.5 * half * c)
    else:
        out = psi + half * (force - c * psi)
    out[-1] = 0.0
    return out


def _theta_solve(ops, x, source, cfg):
    """(I - theta dt P) x_new = (I + (1-theta) dt P) x + dt * source on the free nodes."""
    m = ops["m"]
    px = apply_bands(ops["par"], x, 0.0, 0.0)
    rhs = x[:m] + (1.0 - cfg.theta) * cfg.dt * px[:m] + cfg.dt * source[:m]
    out = np.zeros_like(x)
    out[:m] = solve_banded((1, 1), ops["ab"], rhs, check_finite=False)
    return out


def _advance(state: FieldState, cfg: SchemeConfig) -> FieldState:
    grid, k, dt = state.grid, state.k, cfg.dt
    ops = _operators(grid, k, float(dt), float(cfg.theta), state.formulation)
    _check_dt(state, cfg, ops)
    lap_phi = ops["lap_phi"]
    half = 0.5 * dt

    if state.formulation == "primal":
        def v_r(s_v, s_h):
            return ddr(grid, s_v, None)
        par_old = state.v
    else:
        def v_r(s_v, s_h):
            return apply_bands(ops["par"], s_h, 0.0, 0.0)
        par_old = state.h

    psi = _kick(state.phi_t, _force(k, grid, lap_phi, state.phi, v_r(state.v, state.h), cfg), half, cfg)
    phi = state.phi + dt * psi
    phi[-1] = state.phi[-1]
    if state.formulation == "primal":
        src = divergence(grid, psi, "regular", "neumann") if cfg.coupling else np.zeros_like(psi)
        v = _theta_solve(ops, par_old, src, cfg)
        h = h_from_velocity(grid, v)
    else:
        src = psi if cfg.coupling else np.zeros_like(psi)
        h = _theta_solve(ops, par_old, src, cfg)
        v = velocity_from_h(grid, h)
    psi = _kick(psi, _force(k, grid, lap_phi, phi, v_r(v, h), cfg), half, cfg)
    new = FieldState(state.t + dt, phi, psi, v, h, k, grid, state.formulation, state.steps + 1)
    if not new.is_finite():
        raise InstabilityError(f"non-finite samples at t={new.t:.6g}", last_state=state)
    return new


def step(state: FieldState, cfg: SchemeConfig) -> FieldState:
    """Advance the (phi, v) system by one step of size cfg.dt."""
    if state.formulation != "primal":
        raise ConfigurationError("step expects a primal-formulation state; use step_h_formulation")
    return _advance(state, cfg)


def step_h_formulation(state: FieldState, cfg: SchemeConfig) -> FieldState:
    """Advance the (phi, h) system; v is rebuilt as (r h)_r / r."""
    if state.formulation != "h":
        h = state.h if state.h is not None else h_from_velocity(state.grid, state.v)
        state = replace(state.copy(), h=np.array(h, dtype=float), formulation="h")
    return _advance(state, cfg)


def evolve(state: FieldState, cfg: SchemeConfig, t_end: float, callback=None) -> FieldState:
    """Step until t_end (last step shortened is not allowed: t_end should be a multiple of dt)."""
    stepper = step if state.formulation == "primal" else step_h_formulation
    nsteps = int(round((t_end - state.t) / cfg.dt))
    for _ in range(nsteps):
        state = stepper(state, cfg)
        if callback is not None:
            callback(state)
    return state


def reconstruct_director(state: FieldState, theta_samples) -> np.ndarray:
    """Unit director (sin phi cos k theta, sin phi sin k theta, cos phi), shape (n_r, n_theta, 3)."""
    th = np.asarray(theta_samples, dtype=float)
    sp = np.sin(state.phi)[:, None]
    kt = state.k * th[None, :]
    d = np.empty((state.phi.size, th.size, 3))
    d[..., 0] = sp * np.cos(kt)
    d[..., 1] = sp * np.sin(kt)
    d[..., 2] = np.cos(state.phi)[:, None]
    return d
