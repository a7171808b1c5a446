"""Focusing initial data: a rescaled profile plus a small orthogonal perturbation.

    phi_0 = u_0 + I(lambda_0 r),   phi_1 = lambda_1 J(lambda_0 r) + g_0,   v_0 = 0,

with lambda_0 = eps^-4 and lambda_1 = C_0^2 (eps^5 / pi) / ||J(lambda_0 .)||^2.
The bump shapes for u_0 and g_0 are our own choice; only smoothness, decay,
orthogonality to J(lambda_0 .) and smallness are required of them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ResolutionError
from .evolution import FieldState
from .grid import RadialGrid, ddr, inner, weighted_integral
from .profiles import ProfileParams, eval_I, eval_J, eval_rJr, eval_rJr_r, profile_constants

FAMILIES = ("rational", "gaussian", "random", "zero")
MIN_CORE_NODES = 16


class SmallnessWarning(UserWarning):
    """The initial perturbation exceeds the smallness budget c^2 eps^2."""


@dataclass(frozen=True)
class BumpFamily:
    shape: str = "rational"
    amplitude: float = 1e-3

    def __post_init__(self):
        if self.shape not in FAMILIES:
            raise ConfigurationError(f"unknown bump family {self.shape!r}; expected one of {FAMILIES}")
        if not np.isfinite(self.amplitude):
            raise ConfigurationError("bump amplitude must be finite")


@dataclass(frozen=True)
class InitialDataSpec:
    epsilon: float = 0.5
    c_small: float | None = None    # None -> sqrt(epsilon), the smallest admissible value
    k: int = 4
    u0_family: BumpFamily = field(default_factory=BumpFamily)
    g0_family: BumpFamily = field(default_factory=BumpFamily)
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon!r}")
        if int(self.k) != self.k or self.k < 4:
            raise ConfigurationError(f"the focusing data need k >= 4, got {self.k!r}")
        if self.c_small is not None and self.c_small ** 2 < self.epsilon:
            raise ConfigurationError(f"c_small^2 = {self.c_small ** 2:.4g} must be >= epsilon")

    @property
    def c(self) -> float:
        return float(np.sqrt(self.epsilon)) if self.c_small is None else float(self.c_small)

    @property
    def lambda0(self) -> float:
        return self.epsilon ** -4


@dataclass(frozen=True)
class ModulationSeed:
    lambda0: float
    lambda_dot0: float
    lambda1: float
    smallness: float
    smallness_bound: float

    @property
    def flagged(self) -> bool:
        return self.smallness > self.smallness_bound


# --- bump shapes with analytic derivatives ----------------------------------

def rational_bump(r, scale, m, p):
    """x^m (1+x^2)^-p with x = scale * r, and its first two r-derivatives."""
    x = scale * np.asarray(r, dtype=float)
    q = 1.0 + x * x
    f = x ** m * q ** -p
    # log-derivative d/dx ln f and its derivative
    g = m / x - 2 * p * x / q
    g_x = -m / x ** 2 - 2 * p * (1 - x * x) / q ** 2
    return f, scale * f * g, scale ** 2 * f * (g * g + g_x)


def gaussian_bump(r, scale):
    """x exp(-x^2) with x = scale * r, and its first two r-derivatives."""
    x = scale * np.asarray(r, dtype=float)
    e = np.exp(-x * x)
    return x * e, scale * (1 - 2 * x * x) * e, scale ** 2 * (4 * x ** 3 - 6 * x) * e


def _u_shape(fam: BumpFamily, r, lam0, k, rng):
    if fam.shape == "zero" or fam.amplitude == 0:
        z = np.zeros_like(r)
        return z, z.copy(), z.copy()
    if fam.shape == "rational":
        f, f1, f2 = rational_bump(r, lam0, 3, (k + 2) / 2)
    elif fam.shape == "gaussian":
        f, f1, f2 = gaussian_bump(r, lam0)
    else:
        f, f1, f2 = _random_sum(r, lam0, 3, (k + 2) / 2, rng)
    return fam.amplitude * f, fam.amplitude * f1, fam.amplitude * f2


def _g_shape(fam: BumpFamily, r, lam0, k, rng):
    if fam.shape == "zero" or fam.amplitude == 0:
        z = np.zeros_like(r)
        return z, z.copy()
    if fam.shape == "rational":
        f, f1, _ = rational_bump(r, lam0, 2, (k + 3) / 2)
    elif fam.shape == "gaussian":
        f, f1, _ = gaussian_bump(r, lam0)
    else:
        f, f1, _ = _random_sum(r, lam0, 2, (k + 3) / 2, rng)
    return fam.amplitude * f, fam.amplitude * f1


def _random_sum(r, lam0, m, p, rng, terms=4):
    """Seeded combination of rational bumps at random widths, peak-normalized."""
    widths = np.exp(rng.uniform(np.log(0.5), np.log(2.0), terms))
    coef = rng.normal(size=terms)
    f = np.zeros_like(r)
    f1 = np.zeros_like(r)
    f2 = np.zeros_like(r)
    for c, w in zip(coef, widths):
        a, b, d = rational_bump(r, lam0 / w, m, p)
        f += c * a
        f1 += c * b
        f2 += c * d
    s = np.abs(f).max()
    return f / s, f1 / s, f2 / s


# --- construction -----------------------------------------------------------

def project_out(grid: RadialGrid, f, j):
    """Remove the component of f along j in L^2(r dr); returns (projected, coefficient)."""
    coef = inner(grid, f, j) / inner(grid, j, j)
    return f - coef * j, coef


def smallness_functional(grid: RadialGrid, u, du, d2u, g, dg) -> float:
    """Weighted H^2 x H^1 size of (u_0, g_0), summed over derivative order 0 and 1."""
    r = grid.nodes
    w0 = (1 + r * r) * (du ** 2 + (u / r) ** 2 + g ** 2 + (g / r) ** 2)
    w1 = d2u ** 2 + (du / r) ** 2 + dg ** 2 + (g / r) ** 2
    return weighted_integral(grid, w0 + w1, 0, origin_value=_origin_limit(w0 + w1, r))


def _origin_limit(f, r):
    # integrands here are bounded near 0; linear extrapolation can undershoot below zero
    s = r[0] / (r[1] - r[0])
    return max(0.0, f[0] * (1 + s) - f[1] * s)


def check_resolution(grid: RadialGrid, lambda0: float, min_nodes: int = MIN_CORE_NODES):
    inside = int(np.count_nonzero(grid.nodes < 1.0 / lambda0))
    if inside < min_nodes:
        raise ResolutionError(f"only {inside} nodes inside r < 1/lambda0 = {1 / lambda0:.3g}; "
                              f"need {min_nodes}")
    return inside


def build_initial(spec: InitialDataSpec, grid: RadialGrid, consts=None):
    """Return the t = 0 state (v = h = 0) and the modulation seed (lambda_0, lambda_dot(0))."""
    lam0 = spec.lambda0
    check_resolution(grid, lam0)
    k = int(spec.k)
    consts = consts or profile_constants(k)
    r = grid.nodes
    p0 = ProfileParams(k, lam0)
    rng = np.random.default_rng(spec.seed)

    J0 = eval_J(p0, r)
    u_raw, du_raw, d2u_raw = _u_shape(spec.u0_family, r, lam0, k, rng)
    u0, coef = project_out(grid, u_raw, J0)
    dJ = eval_rJr(p0, r) / r
    d2J = (eval_rJr_r(p0, r) - eval_rJr(p0, r)) / r ** 2
    du0 = du_raw - coef * dJ
    d2u0 = d2u_raw - coef * d2J
    g0, dg0 = _g_shape(spec.g0_family, r, lam0, k, rng)

    norm_J = inner(grid, J0, J0)
    lam1 = consts.c0_const ** 2 * spec.epsilon ** 5 / np.pi / norm_J

    phi = eval_I(p0, r) + u0
    # the outer node carries the boundary value of the profile alone
    phi[-1] = eval_I(p0, r[-1])
    phi_t = lam1 * J0 + g0
    phi_t[-1] = 0.0
    z = np.zeros_like(r)
    state = FieldState(0.0, phi, phi_t, z, z.copy(), k, grid)

    small = smallness_functional(grid, u0, du0, d2u0, g0, dg0)
    bound = spec.c ** 2 * spec.epsilon ** 2
    seed = ModulationSeed(lam0, lam1 * lam0, lam1, small, bound)
    if seed.flagged:
        warnings.warn(f"initial perturbation size {small:.3e} exceeds c^2 eps^2 = {bound:.3e}",
                      SmallnessWarning, stacklevel=2)
    return state, seed


def smallness_report(state: FieldState, spec: InitialDataSpec, grid: RadialGrid, consts=None) -> float:
    """Smallness functional of the perturbation carried by a t = 0 state, by differencing."""
    lam0 = spec.lambda0
    consts = consts or profile_constants(spec.k)
    p0 = ProfileParams(spec.k, lam0)
    r = grid.nodes
    J0 = eval_J(p0, r)
    lam1 = consts.c0_const ** 2 * spec.epsilon ** 5 / np.pi / inner(grid, J0, J0)
    u = state.phi - eval_I(p0, r)
    g = state.phi_t - lam1 * J0
    u[-1] = g[-1] = 0.0
    du = ddr(grid, u, 0.0)
    return smallness_functional(grid, u, du, ddr(grid, du, None), g, ddr(grid, g, 0.0))


def build_profile_state(grid: RadialGrid, k: int, mu: float, u_family: BumpFamily | None = None,
                        g_family: BumpFamily | None = None, seed: int = 0) -> FieldState:
    """Profile data (I_mu + u, g, 0) with bumps at scale mu, u projected off J_mu.

    With both families absent this is the static solution; small amplitudes
    give the perturbation runs used to check dissipation and formulation
    equivalence.  No initial kick along J_mu is added.
    """
    k = int(k)
    p = ProfileParams(k, mu)
    r = grid.nodes
    rng = np.random.default_rng(seed)
    u_family = u_family or BumpFamily("zero", 0.0)
    g_family = g_family or BumpFamily("zero", 0.0)
    u_raw = _u_shape(u_family, r, mu, k, rng)[0]
    u, _ = project_out(grid, u_raw, eval_J(p, r))
    g = _g_shape(g_family, r, mu, k, rng)[0]
    phi = eval_I(p, r) + u
    phi[-1] = eval_I(p, r[-1])
    phi_t = g.copy()
    phi_t[-1] = 0.0
    z = np.zeros_like(r)
    return FieldState(0.0, phi, phi_t, z, z.copy(), k, grid)
