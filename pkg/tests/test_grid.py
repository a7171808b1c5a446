import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nematic_blowup.errors import ConfigurationError, ShapeError
from nematic_blowup.grid import (build_grid, coarsen, cumulative_integral, ddr, divergence, grid_from_spec, inner,
                                 laplacian_bands, apply_bands, refine, weighted_integral)


def test_uniform_nodes():
    g = build_grid(1.0, 16, "uniform")
    assert np.allclose(g.nodes, np.arange(1, 17) / 16)
    assert g.nodes[-1] == 1.0


def test_default_geometric_first_node_below_1e3():
    r_max, n, q = 50.0, 4096, 1.002
    r1 = r_max * (q - 1) / (q ** n - 1)
    g = build_grid(r_max, n, "geometric", q)
    assert r1 < 1e-3
    assert g.nodes[0] == pytest.approx(r1, rel=1e-10)
    assert g.nodes[-1] == r_max
    assert np.all(np.diff(g.nodes) > 0)


@pytest.mark.parametrize("grading,ratio", [("uniform", None), ("geometric", 1.01), ("geometric", 1.002)])
def test_constant_quadrature_exact(grading, ratio):
    g = build_grid(7.5, 600, grading, ratio)
    assert weighted_integral(g, np.ones(g.n)) == pytest.approx(7.5 ** 2 / 2, rel=1e-12)


def test_simple_integrals():
    g = build_grid(1.0, 256, "uniform")
    assert weighted_integral(g, g.nodes) == pytest.approx(1 / 3, rel=1e-5)
    assert weighted_integral(g, np.zeros(g.n), 3) == 0.0


def test_profile_norm_k4():
    from nematic_blowup.profiles import ProfileParams, eval_J
    g = build_grid(1e3, 8192, "geometric", 1.002)
    J = eval_J(ProfileParams(4, 1.0), g)
    assert inner(g, J, J) == pytest.approx(2 * np.pi / np.sin(np.pi / 4), rel=1e-5)


def test_quadrature_second_order():
    # smooth, effectively compactly supported integrand: int r^2 exp(-r^2) r dr = 1/2
    errs = []
    for n, q in [(256, 1.016), (512, 1.008), (1024, 1.004)]:
        g = build_grid(12.0, n, "geometric", q)
        r = g.nodes
        errs.append(abs(weighted_integral(g, r * r * np.exp(-r * r)) - 0.5))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders > 1.8) & (orders < 2.2)), orders


def test_errors():
    with pytest.raises(ConfigurationError):
        build_grid(-1.0, 100)
    with pytest.raises(ConfigurationError):
        build_grid(1.0, 8)
    with pytest.raises(ConfigurationError):
        build_grid(1.0, 100, "geometric", 1.2)
    with pytest.raises(ConfigurationError):
        build_grid(1.0, 100, "chebyshev")
    g = build_grid(1.0, 32, "uniform")
    with pytest.raises(ShapeError):
        weighted_integral(g, np.ones(31))
    with pytest.raises(ConfigurationError):
        laplacian_bands(g, "periodic")


def test_refine_coarsen_roundtrip():
    g = build_grid(10.0, 400, "geometric", 1.01)
    f = refine(g)
    assert f.n == 800
    assert np.allclose(f.nodes[1::2], g.nodes, rtol=1e-12)
    c = coarsen(f)
    assert np.allclose(c.nodes, g.nodes, rtol=1e-12)
    assert grid_from_spec(g.spec()).nodes.tolist() == g.nodes.tolist()


def test_ddr_second_order():
    errs = []
    for n, q in [(200, 1.02), (400, np.sqrt(1.02)), (800, 1.02 ** 0.25)]:
        g = build_grid(5.0, n, "geometric", q)
        r = g.nodes
        errs.append(np.max(np.abs(ddr(g, np.sin(r), 0.0) - np.cos(r))))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_regular_laplacian_exact_on_quadratics():
    g = build_grid(3.0, 100, "geometric", 1.03)
    r = g.nodes
    lap = apply_bands(laplacian_bands(g, "regular"), 2.0 + r * r, 0.0, None)
    # (1/r)(r f_r)_r = 4 for f = 2 + r^2 (interior rows; last row needs an outer value)
    assert np.max(np.abs(lap[:-1] - 4.0)) < 1e-9


def test_divergence_matches_analytic():
    g = build_grid(6.0, 800, "geometric", 1.005)
    r = g.nodes
    f = r * np.exp(-r * r)
    exact = (2 - 2 * r * r) * np.exp(-r * r)
    assert np.max(np.abs(divergence(g, f)[:-1] - exact[:-1])) < 1e-3


def test_neumann_divergence_conserves_volume_sum():
    # zero flux through both ends: the control-volume sum of the divergence vanishes
    from nematic_blowup.grid import _outer_half_volume, _volumes
    g = build_grid(4.0, 300, "geometric", 1.01)
    r = g.nodes
    f = np.sin(3 * r) * r
    f[-1] = 0.0
    vol = _volumes(r, np.concatenate(([0.0], r[:-1])), np.concatenate((r[1:], [2 * r[-1] - r[-2]])), "regular")
    vol[-1] = _outer_half_volume(r)
    assert abs(np.dot(vol, divergence(g, f, "regular", "neumann"))) < 1e-12
    lap = apply_bands(laplacian_bands(g, "regular", "neumann"), np.cos(r), 0.0, 0.0)
    assert abs(np.dot(vol, lap)) < 1e-12


def test_cumulative_integral_endpoint():
    g = build_grid(10.0, 500, "geometric", 1.01)
    r = g.nodes
    f = np.exp(-r * r)
    assert cumulative_integral(g, f)[-1] == pytest.approx(weighted_integral(g, f), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10), p=st.integers(0, 3), seed=st.integers(0, 2 ** 16))
def test_weighted_integral_linear(a, b, p, seed):
    g = build_grid(5.0, 64, "geometric", 1.05)
    rng = np.random.default_rng(seed)
    f, h = rng.normal(size=(2, g.n))
    lhs = weighted_integral(g, a * f + b * h, p)
    rhs = a * weighted_integral(g, f, p) + b * weighted_integral(g, h, p)
    scale = abs(a) * weighted_integral(g, np.abs(f), p) + abs(b) * weighted_integral(g, np.abs(h), p) + 1e-300
    assert abs(lhs - rhs) <= 1e-12 * scale


@settings(max_examples=25, deadline=None)
@given(r_max=st.floats(0.5, 100), n=st.integers(16, 600), q=st.floats(1.0001, 1.1))
def test_grid_invariants(r_max, n, q):
    g = build_grid(r_max, n, "geometric", q)
    assert g.nodes[0] > 0 and np.all(np.diff(g.nodes) > 0) and g.nodes[-1] == r_max
    assert np.all(g.quad_weights > 0)
    assert weighted_integral(g, np.ones(n)) == pytest.approx(r_max ** 2 / 2, rel=1e-12)
