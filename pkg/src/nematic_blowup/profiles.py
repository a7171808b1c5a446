"""Harmonic-map profiles I = 2 arctan(r^k), J = r I', their rescalings and linearized operators.

Everything is written in the log variable s = k ln(lambda r), in which
sin I = sech s and cos I = -tanh s.  This keeps the profile finite for
any lambda r without overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, UnsupportedIndexError
from .grid import RadialGrid, apply_bands, build_grid, coarsen, ddr, laplacian_bands

SERIES_CUTOFF = 1e-4


@dataclass(frozen=True)
class ProfileParams:
    k: int
    lam: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigurationError(f"equivariance index must be a positive integer, got {self.k!r}")
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise ConfigurationError(f"scale must be positive, got {self.lam!r}")


@dataclass(frozen=True)
class ProfileConstants:
    k: int
    c0_const: float      # <J, J>
    a_coeff: float       # -<J, r^2 J> / (4 <J, J>)
    b_coeff: float       # 1/4
    ij_inner: float      # <I, J>
    jr2j_inner: float    # <J, r^2 J>


def _radii(r):
    if isinstance(r, RadialGrid):
        return r.nodes
    return np.asarray(r, dtype=float)


def _log_var(p: ProfileParams, r):
    x = p.lam * _radii(r)
    with np.errstate(divide="ignore"):
        return p.k * np.log(x)


def _sech(s):
    e = np.exp(-np.abs(s))
    return 2.0 * e / (1.0 + e * e)


def eval_I(p: ProfileParams, r):
    """I_lambda(r) = 2 arctan((lambda r)^k)."""
    s = _log_var(p, r)
    e = np.exp(-np.abs(s))
    return np.where(s <= 0, 2.0 * np.arctan(e), np.pi - 2.0 * np.arctan(e))


def eval_J(p: ProfileParams, r):
    """J_lambda(r) = k sin I_lambda = r d/dr I_lambda."""
    return p.k * _sech(_log_var(p, r))


def cos_I(p: ProfileParams, r):
    return -np.tanh(_log_var(p, r))


def dI_dr(p: ProfileParams, r):
    """d/dr I_lambda = 2 k lambda (lambda r)^(k-1) / (1 + (lambda r)^(2k))."""
    x = p.lam * _radii(r)
    with np.errstate(over="ignore"):
        return 2.0 * p.k * p.lam * x ** (p.k - 1) / (1.0 + x ** (2 * p.k))


def eval_rJr(p: ProfileParams, r):
    """(r d/dr J)_lambda = k cos(I) J."""
    s = _log_var(p, r)
    return -p.k * np.tanh(s) * p.k * _sech(s)


def eval_rJr_r(p: ProfileParams, r):
    """(r d/dr (r d/dr J))_lambda = k^2 cos(2I) J."""
    s = _log_var(p, r)
    sech = _sech(s)
    return p.k ** 2 * (1.0 - 2.0 * sech ** 2) * p.k * sech


def eval_r2J(p: ProfileParams, r):
    """(r^2 J)_lambda = (lambda r)^2 J(lambda r)."""
    x = p.lam * _radii(r)
    return x * x * eval_J(p, r)


def eval_J_dot(p: ProfileParams, lambda_dot, r):
    return (lambda_dot / p.lam) * eval_rJr(p, r)


def eval_J_ddot(p: ProfileParams, lambda_dot, lambda_ddot, r):
    """Second time derivative of J_lambda(t) along a trajectory lambda(t)."""
    lam = p.lam
    return ((lambda_ddot / lam - (lambda_dot / lam) ** 2) * eval_rJr(p, r)
            + (lambda_dot / lam) ** 2 * eval_rJr_r(p, r))


def potential_V(p: ProfileParams, r):
    """V_lambda = (k^2 + 1)/r^2 + (2k/r^2) cos I_lambda."""
    r = _radii(r)
    return (p.k ** 2 + 1 + 2 * p.k * cos_I(p, r)) / r ** 2


# --- operators ---------------------------------------------------------------

def apply_A(p: ProfileParams, f, grid: RadialGrid, origin_value=0.0):
    """A_lambda f = -f_r + (k/r) cos(I_lambda) f."""
    f = np.asarray(f, dtype=float)
    r = grid.nodes
    return -ddr(grid, f, origin_value) + p.k * cos_I(p, r) / r * f


def apply_A_star(p: ProfileParams, g, grid: RadialGrid, origin_value=None):
    """A*_lambda g = g_r + g/r + (k/r) cos(I_lambda) g."""
    g = np.asarray(g, dtype=float)
    r = grid.nodes
    return ddr(grid, g, origin_value) + (1.0 + p.k * cos_I(p, r)) / r * g


def _neg_laplacian(grid, f):
    f = np.asarray(f, dtype=float)
    bands = laplacian_bands(grid, "dirichlet")
    return -apply_bands(bands, f, origin_value=0.0, outer_value=2 * f[-1] - f[-2])


def apply_H(p: ProfileParams, f, grid: RadialGrid):
    """H_lambda f = -f_rr - f_r/r + (k^2/r^2) cos(2 I_lambda) f, with f(0) = 0."""
    r = grid.nodes
    c = cos_I(p, r)
    return _neg_laplacian(grid, f) + p.k ** 2 * (2 * c * c - 1) / r ** 2 * np.asarray(f, dtype=float)


def apply_H_tilde(p: ProfileParams, f, grid: RadialGrid):
    """Conjugate operator -f_rr - f_r/r + V_lambda f, with f(0) = 0."""
    return _neg_laplacian(grid, f) + potential_V(p, grid.nodes) * np.asarray(f, dtype=float)


# --- constants ---------------------------------------------------------------

def default_oracle_grid() -> RadialGrid:
    return build_grid(1.0e4, 2 ** 15, "geometric", float(np.exp(18.0 / 2 ** 15)))


def _richardson(grid: RadialGrid, integrand):
    fine = float(np.dot(grid.quad_weights, integrand(grid.nodes)))
    try:
        cg = coarsen(grid)
    except ConfigurationError:
        return fine
    coarse = float(np.dot(cg.quad_weights, integrand(cg.nodes)))
    return (4.0 * fine - coarse) / 3.0


def profile_constants(k: int, oracle_grid: RadialGrid | None = None) -> ProfileConstants:
    """Inner products of the unit-scale profile by quadrature, with tail corrections.

    The trapezoid sums on the oracle grid and its every-second-node subgrid
    are Richardson-extrapolated; beyond r_max the leading far-field terms
    I ~ pi - 2 r^-k, J ~ 2k r^-k are integrated in closed form.
    """
    if int(k) != k or k < 3:
        raise UnsupportedIndexError(f"<I, J> is integrable only for k >= 3, got k={k!r}")
    k = int(k)
    grid = oracle_grid or default_oracle_grid()
    p = ProfileParams(k, 1.0)
    R = grid.r_max
    jj = _richardson(grid, lambda r: eval_J(p, r) ** 2)
    jj += 4 * k * k * R ** (2 - 2 * k) / (2 * k - 2)
    jr2j = _richardson(grid, lambda r: eval_J(p, r) ** 2 * r * r)
    jr2j += 4 * k * k * R ** (4 - 2 * k) / (2 * k - 4)
    ij = _richardson(grid, lambda r: eval_I(p, r) * eval_J(p, r))
    ij += 2 * k * np.pi * R ** (2 - k) / (k - 2) - 4 * k * R ** (2 - 2 * k) / (2 * k - 2)
    return ProfileConstants(k=k, c0_const=jj, a_coeff=-jr2j / (4.0 * jj), b_coeff=0.25,
                            ij_inner=ij, jr2j_inner=jr2j)


# --- correction profile and nonlinearity ------------------------------------

def eval_w0(p: ProfileParams, lambda_dot, consts: ProfileConstants, r):
    """w0 = (lambda_dot^2 / lambda^4) (a J_lambda + b (r^2 J)_lambda)."""
    pref = lambda_dot ** 2 / p.lam ** 4
    return pref * (consts.a_coeff * eval_J(p, r) + consts.b_coeff * eval_r2J(p, r))


def eval_w0_t(p: ProfileParams, lambda_dot, lambda_ddot, consts: ProfileConstants, r):
    """Time derivative of w0 along lambda(t), by the chain rule."""
    lam = p.lam
    a, b = consts.a_coeff, consts.b_coeff
    x2 = (lam * _radii(r)) ** 2
    J = eval_J(p, r)
    rJr = eval_rJr(p, r)
    shape = a * J + b * x2 * J
    # x d/dx of the shape function a J + b x^2 J
    x_shape_x = a * rJr + b * x2 * (2 * J + rJr)
    pref_t = 2 * lambda_dot * lambda_ddot / lam ** 4 - 4 * lambda_dot ** 3 / lam ** 5
    return pref_t * shape + (lambda_dot ** 2 / lam ** 4) * (lambda_dot / lam) * x_shape_x


def nonlinearity_N(p: ProfileParams, u, r):
    """N(u) = (k^2 sin 2I / 2r^2)(1 - cos 2u) + (k^2 cos 2I / r^2)(u - sin(2u)/2)."""
    r = _radii(r)
    u = np.asarray(u, dtype=float)
    s = _log_var(p, r)
    sin_i = _sech(s)
    cos_i = -np.tanh(s)
    sin2i = 2 * sin_i * cos_i
    cos2i = 1 - 2 * sin_i ** 2
    one_minus_cos = 2 * np.sin(u) ** 2
    small = np.abs(u) < SERIES_CUTOFF
    cubic = np.where(small, (2.0 / 3.0) * u ** 3 - (2.0 / 15.0) * u ** 5, u - 0.5 * np.sin(2 * u))
    k2 = p.k ** 2
    return k2 / r ** 2 * (0.5 * sin2i * one_minus_cos + cos2i * cubic)
