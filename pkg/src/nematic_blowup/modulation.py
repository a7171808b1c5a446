"""Scale tracking lambda(t) and the residuals of the modulation equations.

The scale is fixed by the orthogonality <phi - I_lambda, J_lambda> = 0.  It
is obtained either by root finding at every step or by integrating the
first-order equation obtained from differentiating that condition in time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateDenominatorError, NotReady, TrackingLostError
from .grid import RadialGrid, inner
from .profiles import (ProfileConstants, ProfileParams, eval_I, eval_J, eval_J_ddot, eval_rJr,
                       nonlinearity_N)

SOURCES = ("orthogonality_rootfind", "ode63")
BRACKET = 4.0
ALPHA_FLOOR = 0.1
_RTOL = 4 * np.finfo(float).eps


def orthogonality_gap(grid: RadialGrid, phi, lam: float, k: int) -> float:
    """g(lambda) = <phi - I_lambda, J_lambda>."""
    p = ProfileParams(k, lam)
    r = grid.nodes
    return inner(grid, phi - eval_I(p, r), eval_J(p, r))


def extract_lambda(state, lambda_prev: float, grid: RadialGrid | None = None,
                   initial_step: float = 1e-3) -> float:
    """Root of the orthogonality gap nearest lambda_prev within [lambda_prev/4, 4 lambda_prev].

    The bracket is grown symmetrically in log(lambda) from lambda_prev until
    the gap changes sign, so the first sign change found is the one closest
    to the previous scale; brentq then polishes it.
    """
    grid = grid or state.grid
    phi, k = state.phi, state.k

    def g(lam):
        return orthogonality_gap(grid, phi, lam, k)

    g0 = g(lambda_prev)
    if g0 == 0.0:
        return float(lambda_prev)
    top = np.log(BRACKET)
    step = float(np.clip(initial_step, 1e-8, top))
    lo_x, lo_g, hi_x, hi_g = lambda_prev, g0, lambda_prev, g0
    while True:
        s = min(step, top)
        a, b = lambda_prev * np.exp(-s), lambda_prev * np.exp(s)
        ga, gb = g(a), g(b)
        if np.sign(gb) != np.sign(hi_g):
            lo, hi = hi_x, b
            break
        if np.sign(ga) != np.sign(lo_g):
            lo, hi = a, lo_x
            break
        lo_x, lo_g, hi_x, hi_g = a, ga, b, gb
        if s >= top:
            raise TrackingLostError(
                f"orthogonality gap keeps one sign on [{a:.6g}, {b:.6g}]",
                bracket=(a, b), values=(ga, gb))
        step *= 2.0
    return float(brentq(g, lo, hi, xtol=1e-300, rtol=_RTOL, maxiter=200))


def lambda_ode_rhs(state, lam: float, consts: ProfileConstants, grid: RadialGrid | None = None):
    """Return (lambda_dot, alpha) from alpha * lambda_dot = -<phi_t, J_lambda> lambda^3.

    alpha = 2<I, J> + lambda^2 <phi, (r J')_lambda>.  The constant 2<I, J> is
    rewritten through -<I, r J'> - <J, J> and evaluated at scale lambda on the
    run grid, so that alpha is exactly -lambda^3 d/dlambda of the discrete
    orthogonality gap; the two scale sources then track the same root.
    """
    grid = grid or state.grid
    p = ProfileParams(state.k, lam)
    r = grid.nodes
    J = eval_J(p, r)
    rJr = eval_rJr(p, r)
    alpha = lam ** 2 * (inner(grid, state.phi - eval_I(p, r), rJr) - inner(grid, J, J))
    if abs(alpha) < ALPHA_FLOOR * consts.c0_const:
        raise DegenerateDenominatorError(f"alpha = {alpha:.4g} is below {ALPHA_FLOOR} C0 at lambda = {lam:.6g}")
    beta = -inner(grid, state.phi_t, J) * lam ** 3
    return beta / alpha, alpha


def alpha_literal(state, lam: float, consts: ProfileConstants, grid: RadialGrid | None = None) -> float:
    """alpha with the tabulated constant 2<I, J> (differs from the grid form by truncation only)."""
    grid = grid or state.grid
    p = ProfileParams(state.k, lam)
    return 2 * consts.ij_inner + lam ** 2 * inner(grid, state.phi, eval_rJr(p, grid.nodes))


# --- track -------------------------------------------------------------------

TRACK_COLUMNS = ("t", "lambda", "lambda_dot", "gamma", "focus_monitor", "alpha_coeff",
                 "key1_residual", "divergence_metric", "lambda_root", "lambda_ode",
                 "orthogonality", "key3_ratio", "integrated_residual")


@dataclass
class ModulationTrack:
    source: str = "orthogonality_rootfind"
    rows: dict = field(default_factory=lambda: {c: [] for c in TRACK_COLUMNS})

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown lambda source {self.source!r}")

    def append(self, **values):
        for c in TRACK_COLUMNS:
            self.rows[c].append(float(values.get(c, np.nan)))

    def __len__(self):
        return len(self.rows["t"])

    def array(self, name) -> np.ndarray:
        return np.asarray(self.rows[name], dtype=float)

    @property
    def times(self):
        return self.array("t")

    @property
    def lam(self):
        return self.array("lambda")

    @property
    def lam_dot(self):
        return self.array("lambda_dot")


def normalized_orthogonality(grid: RadialGrid, phi, lam: float, k: int) -> float:
    """|<u, J_lambda>| / (||u|| ||J_lambda||) with u = phi - I_lambda."""
    p = ProfileParams(k, lam)
    r = grid.nodes
    u = phi - eval_I(p, r)
    J = eval_J(p, r)
    nu = np.sqrt(inner(grid, u, u))
    if nu == 0.0:
        return 0.0
    return abs(inner(grid, u, J)) / (nu * np.sqrt(inner(grid, J, J)))


@dataclass
class TrackerState:
    lam_root: float
    lam_ode: float
    f_ode: float        # rhs at (current state, lam_ode)
    alpha_ode: float


class LambdaTracker:
    """Advance both scale sources alongside the PDE.

    The ODE is integrated for 1/lambda by Heun's method using the PDE states
    at both ends of each step; the root-find is warm-started from its
    previous value.
    """

    def __init__(self, grid, consts, lambda0, source="orthogonality_rootfind"):
        if source not in SOURCES:
            raise ValueError(f"unknown lambda source {source!r}")
        self.grid, self.consts, self.source = grid, consts, source
        self.lambda0 = float(lambda0)
        self.ts: TrackerState | None = None

    def start(self, state):
        lam_root = extract_lambda(state, self.lambda0, self.grid)
        f, alpha = lambda_ode_rhs(state, self.lambda0, self.consts, self.grid)
        self.ts = TrackerState(lam_root, self.lambda0, f, alpha)
        return self.sample(state)

    def advance(self, state, dt):
        ts = self.ts
        # Heun on y = 1/lambda: y' = -lambda'/lambda^2 stays bounded as lambda
        # blows up like 1/(T - t), where lambda itself is stiff for the scheme
        y = 1.0 / ts.lam_ode
        dy0 = -ts.f_ode * y * y
        y_pred = y + dt * dy0
        f_pred, _ = lambda_ode_rhs(state, 1.0 / y_pred, self.consts, self.grid)
        y_new = y + 0.5 * dt * (dy0 - f_pred * y_pred * y_pred)
        lam_ode = 1.0 / y_new
        f_new, alpha = lambda_ode_rhs(state, lam_ode, self.consts, self.grid)
        # first bracket guess: a bit more than the last relative change of the ODE scale
        hint = 2.0 * abs(lam_ode - ts.lam_ode) / ts.lam_ode
        lam_root = extract_lambda(state, ts.lam_root, self.grid, initial_step=max(hint, 1e-6))
        self.ts = TrackerState(lam_root, lam_ode, f_new, alpha)
        return self.sample(state)

    def sample(self, state) -> dict:
        ts = self.ts
        if self.source == "ode63":
            lam, lam_dot, alpha = ts.lam_ode, ts.f_ode, ts.alpha_ode
        else:
            lam = ts.lam_root
            lam_dot, alpha = lambda_ode_rhs(state, lam, self.consts, self.grid)
        return {
            "t": state.t, "lambda": lam, "lambda_dot": lam_dot, "gamma": -lam_dot / lam ** 2,
            "focus_monitor": lam_dot ** 4 / lam ** 7, "alpha_coeff": alpha,
            "divergence_metric": abs(ts.lam_ode - ts.lam_root) / ts.lam_root,
            "lambda_root": ts.lam_root, "lambda_ode": ts.lam_ode,
            "orthogonality": normalized_orthogonality(self.grid, state.phi, ts.lam_root, state.k),
        }

    def get_state(self) -> dict:
        return dict(vars(self.ts))

    def set_state(self, d: dict):
        self.ts = TrackerState(**{k: float(v) for k, v in d.items()})


def evolve_lambda_ode(states, lambda0, consts, grid=None, source="ode63") -> ModulationTrack:
    """Integrate the scale equation along a sequence of PDE states with uniform spacing."""
    states = list(states)
    grid = grid or states[0].grid
    tracker = LambdaTracker(grid, consts, lambda0, source)
    track = ModulationTrack(source)
    track.append(**tracker.start(states[0]))
    for prev, s in zip(states[:-1], states[1:]):
        track.append(**tracker.advance(s, s.t - prev.t))
    return track


# --- second-order equation ---------------------------------------------------

KEY1_TERMS = ("ut_Jdot", "u_Jddot", "N_J", "damping", "ut_J", "ht_J")


def key1_residual(state, lam, lam_dot, lam_ddot, consts: ProfileConstants, grid=None, h_t=None):
    """Residual of C0 (lambda'' - 2 lambda'^2/lambda) against its six right-hand terms.

    Returns (residual, terms); the residual is normalized by C0 lambda'^2/lambda
    unless lambda' = 0.  ``terms`` also carries the raw pairing <u, (r J')_lambda>.
    """
    if lam_ddot is None or not np.isfinite(lam_ddot):
        raise NotReady("lambda'' needs lambda' on both sides of this time")
    grid = grid or state.grid
    r = grid.nodes
    p = ProfileParams(state.k, lam)
    C0 = consts.c0_const
    J = eval_J(p, r)
    rJr = eval_rJr(p, r)
    u = state.phi - eval_I(p, r)
    u[-1] = 0.0
    u_t = state.phi_t - (lam_dot / lam) * J
    if h_t is None:
        h_t = state.h_t()
    l3 = lam ** 3
    Jdot = (lam_dot / lam) * rJr
    Jddot = eval_J_ddot(p, lam_dot, lam_ddot, r)
    terms = {
        "ut_Jdot": 2 * inner(grid, u_t, Jdot) * l3,
        "u_Jddot": inner(grid, u, Jddot) * l3,
        "N_J": inner(grid, nonlinearity_N(p, u, r), J) * l3,
        "damping": -C0 * lam_dot,
        "ut_J": -inner(grid, u_t, J) * l3,
        "ht_J": -inner(grid, h_t, J) * l3,
    }
    lhs = C0 * (lam_ddot - 2 * lam_dot ** 2 / lam)
    raw = abs(lhs - sum(terms[k] for k in KEY1_TERMS))
    terms["lhs"] = lhs
    terms["u_rJr"] = inner(grid, u, rJr)
    norm = C0 * lam_dot ** 2 / lam
    return (raw / norm if norm != 0 else raw), terms


def key3_ratio(lam, lam_dot, lam_ddot) -> float:
    """|lambda'' - 2 lambda'^2/lambda| in units of lambda'^2/lambda."""
    if lam_dot == 0:
        return np.nan
    return abs(lam_ddot - 2 * lam_dot ** 2 / lam) * lam / lam_dot ** 2


def initial_coefficient(consts: ProfileConstants, lambda0, lambda_dot0, u0_rJr) -> dict:
    """Coefficient K2 of lambda^2 in the integrated equation, from t = 0 data.

    ``u0_rJr`` is <u_0, (r J')_{lambda_0}>.  ``K2`` follows from integrating
    the second-order equation; ``K2_printed`` carries the factor 2 on C0/lambda_0
    that appears in the published statement of the integrated form.
    """
    C0 = consts.c0_const
    base = C0 * lambda_dot0 / lambda0 ** 2 - 2 * lambda_dot0 * u0_rJr
    return {"K2": base - C0 / lambda0, "K2_printed": base - 2 * C0 / lambda0}


class IntegratedResidual:
    """Running form of the time-integrated scale equation.

        K1 lambda' = K2 lambda^2 + C0 lambda + lambda^2 int_0^t (E1 + E2) ds,
        K1 = C0 - 2 lambda^2 <u, (r J')_lambda>,

    with E1, E2 taken from the key1 terms.  Integrals use the trapezoid rule
    over the samples fed to :meth:`update`.
    """

    def __init__(self, consts, lambda0, K2):
        self.C0 = consts.c0_const
        self.lambda0 = lambda0
        self.K2 = K2
        self.integral = 0.0
        self.prev = None    # (t, E1 + E2)

    @staticmethod
    def integrand(lam, lam_dot, terms):
        l2 = lam ** 2
        e1 = -2 * (lam_dot / lam) * terms["u_rJr"] * lam_dot - terms["u_Jddot"] / l2 + terms["N_J"] / l2
        e2 = (terms["ut_J"] + terms["ht_J"]) / l2
        return e1 + e2

    def update(self, t, lam, lam_dot, terms) -> float:
        e = self.integrand(lam, lam_dot, terms)
        if self.prev is not None:
            self.integral += 0.5 * (t - self.prev[0]) * (e + self.prev[1])
        self.prev = (t, e)
        K1 = self.C0 - 2 * lam ** 2 * terms["u_rJr"]
        lhs = K1 * lam_dot
        rhs = self.K2 * lam ** 2 + self.C0 * lam + lam ** 2 * self.integral
        return abs(lhs - rhs) / (self.C0 * abs(lam_dot)) if lam_dot else abs(lhs - rhs)

    def get_state(self):
        return {"integral": self.integral, "prev": None if self.prev is None else list(self.prev)}

    def set_state(self, d):
        self.integral = float(d["integral"])
        self.prev = None if d["prev"] is None else tuple(float(x) for x in d["prev"])


# --- Riccati monitor ----------------------------------------------------------

@dataclass
class RiccatiReport:
    sign_lambda_dot: np.ndarray
    gamma: np.ndarray
    focus_monitor: np.ndarray
    lambda_violations: int
    focus_violations: int
    transient_end: float
    violations_after_transient: int
    t_star: float = np.nan
    t_star_r2: float = np.nan
    fit_window: tuple = (np.nan, np.nan)
    M_fit: float = np.nan
    M_spread: float = np.nan
    log_fit_C: float = np.nan
    log_fit_r2: float = np.nan
    warnings: list = field(default_factory=list)


def _violations(x):
    return np.flatnonzero(np.diff(x) < 0)


def fit_blowup_time(t, lam, decades: float = 1.0):
    """Extrapolate 1/lambda linearly to zero over the last ``decades`` of lambda growth.

    Returns (T*, R^2, (t_start, t_end)); NaNs when lambda did not grow enough.
    """
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    ok = np.isfinite(lam) & np.isfinite(t)
    t, lam = t[ok], lam[ok]
    if t.size < 3 or lam[-1] < 10 ** decades * lam.min():
        return np.nan, np.nan, (np.nan, np.nan)
    # window: from the last time lambda was below lam_end / 10^decades
    below = np.flatnonzero(lam <= lam[-1] / 10 ** decades)
    i0 = below[-1]
    tw, y = t[i0:], 1.0 / lam[i0:]
    if tw.size < 3:
        return np.nan, np.nan, (np.nan, np.nan)
    slope, icpt = np.polyfit(tw, y, 1)
    pred = slope * tw + icpt
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else np.nan
    t_star = -icpt / slope if slope < 0 else np.nan
    return float(t_star), float(r2), (float(tw[0]), float(tw[-1]))


def riccati_monitor(track_or_t, lam=None, lam_dot=None, t_star=None, c_small: float = 1.0,
                    decades: float = 1.0) -> RiccatiReport:
    """Monotonicity of lambda and lambda'^4/lambda^7, blowup-time fit and rate fits.

    The transient is the shortest initial window after which both sequences
    are non-decreasing; its end time is reported.  Given T* (estimated when
    not supplied), lambda (T* - t) is fitted by a constant M and by
    C c^(1/4) sqrt|ln(T* - t)| over the fit window.
    """
    if isinstance(track_or_t, ModulationTrack):
        t, lam, lam_dot = track_or_t.times, track_or_t.lam, track_or_t.lam_dot
    else:
        t = np.asarray(track_or_t, dtype=float)
        lam = np.asarray(lam, dtype=float)
        lam_dot = np.asarray(lam_dot, dtype=float)
    if t.size < 3:
        raise NotReady("the Riccati monitor needs at least three samples")
    focus = lam_dot ** 4 / lam ** 7
    warn = []
    vl, vf = _violations(lam), _violations(focus)
    if not np.any(np.diff(lam) > 0):
        warn.append("lambda is non-increasing")
    last = max(vl.max(initial=-1), vf.max(initial=-1))
    transient_end = float(t[last + 1]) if last >= 0 else float(t[0])
    rep = RiccatiReport(np.sign(lam_dot), -lam_dot / lam ** 2, focus, int(vl.size), int(vf.size),
                        transient_end, 0, warnings=warn)
    est, r2, window = fit_blowup_time(t, lam, decades)
    rep.t_star_r2, rep.fit_window = r2, window
    rep.t_star = est if t_star is None else float(t_star)
    if np.isfinite(rep.t_star) and np.isfinite(window[0]):
        sel = (t >= window[0]) & (t < rep.t_star)
        if np.count_nonzero(sel) >= 3:
            tau = rep.t_star - t[sel]
            y = lam[sel] * tau
            rep.M_fit = float(np.mean(y))
            rep.M_spread = float(np.std(y) / np.mean(y))
            basis = c_small ** 0.25 * np.sqrt(np.abs(np.log(tau)))
            C = float(np.dot(basis, y) / np.dot(basis, basis))
            ss_tot = float(np.sum((y - y.mean()) ** 2))
            rep.log_fit_C = C
            rep.log_fit_r2 = 1.0 - float(np.sum((y - C * basis) ** 2)) / ss_tot if ss_tot > 0 else np.nan
    return rep
