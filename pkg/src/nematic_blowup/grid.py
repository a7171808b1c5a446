"""Radial grids on (0, r_max], weighted quadrature and finite-difference stencils.

The origin is never a node.  Every evolved field has a prescribed value (or a
regularity condition) at r = 0, and all stencils touching the first node take
that into account explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ShapeError

MIN_NODES = 16
MAX_RATIO = 1.1


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes r_1 < ... < r_N = r_max and trapezoid weights for the measure r dr."""

    nodes: np.ndarray
    r_max: float
    grading: str
    ratio: float | None
    quad_weights: np.ndarray
    _weights_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def r(self) -> np.ndarray:
        return self.nodes

    @property
    def spacing(self) -> np.ndarray:
        """Cell widths h_{i-1/2} = r_i - r_{i-1}, with r_0 = 0."""
        return np.diff(self.nodes, prepend=0.0)

    @property
    def min_spacing(self) -> float:
        return float(self.spacing.min())

    def spacing_at(self, radius: float) -> float:
        """Width of the cell containing ``radius``."""
        i = int(np.searchsorted(self.nodes, radius))
        i = min(max(i, 0), self.n - 1)
        return float(self.spacing[i])

    def spec(self) -> dict:
        return {"r_max": self.r_max, "n": self.n, "grading": self.grading, "ratio": self.ratio}

    def weights(self, p: float = 0, origin_value=None) -> np.ndarray:
        """Quadrature weights w with sum(w * f) ~ integral of f(r) r^(1+p) dr on [0, r_max].

        On [r_1, r_N] the trapezoid rule is applied to f r^(1+p).  On the stub
        [0, r_1] f is taken linear between its origin value and f(r_1); with
        ``origin_value=None`` that value is extrapolated from the first two
        nodes, otherwise it is the fixed number passed (added by
        :func:`weighted_integral`, so the weights only cover the node part).
        """
        key = (float(p), origin_value is None)
        w = self._weights_cache.get(key)
        if w is not None:
            return w
        r = self.nodes
        q = r ** (1 + p)
        w = np.zeros_like(r)
        h = np.diff(r)
        w[:-1] += 0.5 * h * q[:-1]
        w[1:] += 0.5 * h * q[1:]
        r1, r2 = r[0], r[1]
        lead = r1 ** (2 + p)
        a = lead / (2 + p) - lead / (3 + p)   # coefficient of f(0)
        b = lead / (3 + p)                    # coefficient of f(r_1)
        w[0] += b
        if origin_value is None:
            s = r1 / (r2 - r1)
            w[0] += a * (1.0 + s)
            w[1] -= a * s
        w.setflags(write=False)
        self._weights_cache[key] = w
        return w

    def origin_weight(self, p: float = 0) -> float:
        """Weight multiplying a prescribed origin value f(0)."""
        lead = self.nodes[0] ** (2 + p)
        return lead / (2 + p) - lead / (3 + p)


def build_grid(r_max: float, n: int, grading: str = "geometric", ratio: float | None = 1.002) -> RadialGrid:
    """Build a uniform or geometrically graded grid on (0, r_max].

    Geometric nodes are r_i = r_max (q^i - 1)/(q^n - 1), so spacing grows by the
    factor q away from the origin where focusing happens.
    """
    if not np.isfinite(r_max) or r_max <= 0:
        raise ConfigurationError(f"r_max must be positive, got {r_max!r}")
    if int(n) != n or n < MIN_NODES:
        raise ConfigurationError(f"need at least {MIN_NODES} nodes, got {n!r}")
    n = int(n)
    i = np.arange(1, n + 1, dtype=float)
    if grading == "uniform":
        nodes = r_max * i / n
        ratio = None
    elif grading == "geometric":
        if ratio is None or not (1.0 < ratio <= MAX_RATIO):
            raise ConfigurationError(f"geometric ratio must lie in (1, {MAX_RATIO}], got {ratio!r}")
        lq = np.log(ratio)
        # overflow-free form of (q^i - 1)/(q^n - 1)
        nodes = r_max * np.exp((i - n) * lq) * np.expm1(-i * lq) / np.expm1(-n * lq)
    else:
        raise ConfigurationError(f"unknown grading {grading!r}")
    nodes[-1] = r_max
    if nodes[0] <= 0 or np.any(np.diff(nodes) <= 0):
        raise ConfigurationError("grid nodes are not strictly increasing and positive")
    nodes.setflags(write=False)
    grid = RadialGrid(nodes=nodes, r_max=float(r_max), grading=grading, ratio=ratio,
                      quad_weights=np.empty(0))
    object.__setattr__(grid, "quad_weights", grid.weights(0))
    return grid


def grid_from_spec(spec: dict) -> RadialGrid:
    return build_grid(spec["r_max"], spec["n"], spec.get("grading", "geometric"), spec.get("ratio"))


def refine(grid: RadialGrid) -> RadialGrid:
    """Halve the mesh: twice the nodes, square-rooted grading ratio.

    Every node of ``grid`` is a node of the result (odd-indexed ones).
    """
    ratio = None if grid.ratio is None else float(np.sqrt(grid.ratio))
    return build_grid(grid.r_max, 2 * grid.n, grid.grading, ratio)


def coarsen(grid: RadialGrid) -> RadialGrid:
    """Every second node of ``grid`` (requires an even node count)."""
    if grid.n % 2:
        raise ConfigurationError("coarsening needs an even number of nodes")
    ratio = None if grid.ratio is None else grid.ratio ** 2
    if ratio is not None and ratio > MAX_RATIO:
        raise ConfigurationError("coarsened grading ratio leaves the admissible range")
    return build_grid(grid.r_max, grid.n // 2, grid.grading, ratio)


def _check(grid: RadialGrid, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != grid.nodes.shape:
        raise ShapeError(f"expected {grid.n} samples, got shape {f.shape}")
    return f


def weighted_integral(grid: RadialGrid, f, p: float = 0, origin_value=None) -> float:
    """Approximate the integral of f(r) r^(1+p) over [0, r_max] (second order)."""
    if p < 0:
        raise ConfigurationError("weight power p must be non-negative")
    f = _check(grid, f)
    total = float(np.dot(grid.weights(p, origin_value), f))
    if origin_value is not None:
        total += grid.origin_weight(p) * float(origin_value)
    return total


def inner(grid: RadialGrid, f, g) -> float:
    """<f, g> = integral of f g r dr."""
    f = _check(grid, f)
    g = _check(grid, g)
    return float(np.dot(grid.quad_weights, f * g))


def cumulative_integral(grid: RadialGrid, f) -> np.ndarray:
    """Running integral of f(R) R dR from 0 to each node (f(0) finite)."""
    f = _check(grid, f)
    r = grid.nodes
    g = f * r
    h = np.diff(r)
    out = np.empty_like(r)
    # stub: f linear between extrapolated f(0) and f(r_1)
    s = r[0] / (r[1] - r[0])
    f0 = f[0] * (1 + s) - f[1] * s
    out[0] = r[0] ** 2 * (f0 / 6.0 + f[0] / 3.0)
    out[1:] = out[0] + np.cumsum(0.5 * h * (g[:-1] + g[1:]))
    return out


def cell_midpoints(grid: RadialGrid) -> np.ndarray:
    """Midpoints of the cells [r_{i-1}, r_i], with r_0 = 0."""
    r = grid.nodes
    return 0.5 * (r + np.concatenate(([0.0], r[:-1])))


# --- finite differences -----------------------------------------------------

def _volumes(r, rl, rr, axis):
    # area of the control volume [r_{i-1/2}, r_{i+1/2}] under r dr; with the
    # plain r_i * width the first nodes carry an O(grading) error
    inner_face = 0.5 * (r + rl)
    if axis == "regular":
        inner_face = inner_face.copy()
        inner_face[0] = 0.0
    return 0.5 * ((0.5 * (r + rr)) ** 2 - inner_face ** 2)


def _cached(grid: RadialGrid, key, build):
    cache = grid._weights_cache
    if key not in cache:
        cache[key] = build()
    return cache[key]


def _ddr_coeffs(grid: RadialGrid, one_sided: bool):
    r = grid.nodes
    xm = np.concatenate(([0.0], r[:-2]))
    x0, xp = r[:-1], r[1:]
    h1 = x0 - xm
    h2 = xp - x0
    cm = -h2 / (h1 * (h1 + h2))
    c0 = (h2 - h1) / (h1 * h2)
    cp = h1 / (h2 * (h1 + h2))
    first = None
    if one_sided:
        h1, h2 = r[1] - r[0], r[2] - r[1]
        first = (-(2 * h1 + h2) / (h1 * (h1 + h2)), (h1 + h2) / (h1 * h2), -h1 / (h2 * (h1 + h2)))
    h1, h2 = r[-1] - r[-2], r[-2] - r[-3]
    last = ((2 * h1 + h2) / (h1 * (h1 + h2)), -(h1 + h2) / (h1 * h2), h1 / (h2 * (h1 + h2)))
    for a in (cm, c0, cp):
        a.flags.writeable = False
    return cm, c0, cp, first, last


def ddr(grid: RadialGrid, f, origin_value=0.0) -> np.ndarray:
    """Second-order first derivative at every node.

    With ``origin_value`` given, the first node uses the centred stencil through
    (0, origin_value); with ``None`` it uses a one-sided stencil on nodes 1-3.
    The last node always uses a one-sided backward stencil.
    """
    f = _check(grid, f)
    one_sided = origin_value is None
    cm, c0, cp, first, last = _cached(grid, ("ddr", one_sided), lambda: _ddr_coeffs(grid, one_sided))
    out = np.empty_like(f)
    out[:-1] = c0 * f[:-1] + cp * f[1:]
    out[1:-1] += cm[1:] * f[:-2]
    if one_sided:
        out[0] = first[0] * f[0] + first[1] * f[1] + first[2] * f[2]
    else:
        out[0] += cm[0] * origin_value
    out[-1] = last[0] * f[-1] + last[1] * f[-2] + last[2] * f[-3]
    return out


OUTER_CONDITIONS = ("mirror", "neumann")


def laplacian_bands(grid: RadialGrid, axis: str = "dirichlet", outer: str = "mirror"):
    """Tridiagonal coefficients (lower, diag, upper) of (1/r)(r f_r)_r at every node.

    ``axis='dirichlet'`` uses a node value f(0) (whose coefficient is ``lower[0]``,
    to be multiplied by the prescribed origin value); ``axis='regular'`` puts
    zero flux through r = 0, which is exact for f = a + b r^2.  With
    ``outer='mirror'`` the last row uses a mirrored ghost node and callers fix
    an outer Dirichlet value themselves; ``outer='neumann'`` closes the last
    half control volume with zero flux through r_max.
    """
    if axis not in ("dirichlet", "regular"):
        raise ConfigurationError(f"unknown axis condition {axis!r}")
    if outer not in OUTER_CONDITIONS:
        raise ConfigurationError(f"unknown outer condition {outer!r}")
    return _cached(grid, ("lap", axis, outer), lambda: _laplacian_bands(grid, axis, outer))


def _outer_half_volume(r):
    return 0.5 * (r[-1] ** 2 - (0.5 * (r[-1] + r[-2])) ** 2)


def _laplacian_bands(grid, axis, outer="mirror"):
    r = grid.nodes
    rl = np.concatenate(([0.0], r[:-1]))          # r_{i-1}, r_0 = 0
    rr = np.concatenate((r[1:], [2 * r[-1] - r[-2]]))  # mirrored ghost beyond r_max
    hm = r - rl
    hp = rr - r
    fm = 0.5 * (r + rl) / hm                       # r_{i-1/2}/h_{i-1/2}
    fp = 0.5 * (r + rr) / hp
    vol = _volumes(r, rl, rr, axis)
    if axis == "regular":
        fm[0] = 0.0
    if outer == "neumann":
        fp[-1] = 0.0
        vol[-1] = _outer_half_volume(r)
    lower = fm / vol
    upper = fp / vol
    diag = -(fm + fp) / vol
    for a in (lower, diag, upper):
        a.flags.writeable = False
    return lower, diag, upper


def apply_bands(bands, f, origin_value=0.0, outer_value=None) -> np.ndarray:
    """Apply tridiagonal ``bands`` to f; node N uses ``outer_value`` as its right neighbour."""
    lower, diag, upper = bands
    out = diag * f
    out[1:] += lower[1:] * f[:-1]
    out[:-1] += upper[:-1] * f[1:]
    out[0] += lower[0] * origin_value
    if outer_value is not None:
        out[-1] += upper[-1] * outer_value
    return out


def divergence(grid: RadialGrid, g, axis: str = "regular", outer: str = "mirror") -> np.ndarray:
    """(1/r)(r g)_r in flux form, matching the control volumes of :func:`laplacian_bands`.

    g must vanish at the origin; the face value at r = 0 is zero either way.
    With ``outer='neumann'`` the last half volume has no flux through r_max.
    """
    g = _check(grid, g)
    if outer not in OUTER_CONDITIONS:
        raise ConfigurationError(f"unknown outer condition {outer!r}")

    def build():
        r = grid.nodes
        rl = np.concatenate(([0.0], r[:-1]))
        rr = np.concatenate((r[1:], [2 * r[-1] - r[-2]]))
        vol = _volumes(r, rl, rr, axis)
        if outer == "neumann":
            vol[-1] = _outer_half_volume(r)
        wm = 0.25 * (r + rl) / vol
        wp = 0.25 * (r + rr) / vol
        if axis == "regular":
            wm[0] = 0.0
        if outer == "neumann":
            wp[-1] = 0.0
        return wm, wp

    wm, wp = _cached(grid, ("div", axis, outer), build)
    gl = np.empty_like(g)
    gl[0] = 0.0
    gl[1:] = g[:-1]
    gr = np.empty_like(g)
    gr[:-1] = g[1:]
    gr[-1] = 2 * g[-1] - g[-2]
    return wp * (g + gr) - wm * (g + gl)
