import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixhilbert.errors import ConfigError, ShapeError
from mixhilbert.grids import SUPPORTED_ORDERS, SpatialGrid, VelocityGrid, lebedev_like_rule, quad_v, tree_sum
from oracles import maxwellian, sphere_monomial


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=70))
def test_tree_sum_matches_fsum(xs):
    assert tree_sum(np.array(xs)) == pytest.approx(np.sum(xs), rel=1e-9, abs=1e-6)


def test_tree_sum_independent_of_layout():
    x = np.random.default_rng(0).normal(size=(37, 5))
    a = tree_sum(x, axis=0)
    b = tree_sum(np.asfortranarray(x), axis=0)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("N", [3, 7, 2])
def test_odd_or_tiny_lattice_rejected(N):
    with pytest.raises(ConfigError):
        VelocityGrid(6.0, N)


def test_maxwellian_mass_on_lattice():
    g = VelocityGrid(6.0, 24)
    assert quad_v(maxwellian(1.3, (0.2, 0, 0), 1.0, 2.0, g.nodes), g) == pytest.approx(1.3, rel=1e-8)


def test_quad_shape_checked():
    with pytest.raises(ShapeError):
        quad_v(np.ones(7), VelocityGrid(6.0, 4))


@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test_sphere_rule_integrates_low_monomials(order):
    r = lebedev_like_rule(order)
    assert r.integrate(lambda w: np.ones(len(w))) == pytest.approx(4 * np.pi)
    for a, b, c in [(2, 0, 0), (0, 0, 2), (2, 2, 0), (0, 2, 2)]:
        if a + b + c < order:
            got = r.integrate(lambda w: w[:, 0] ** a * w[:, 1] ** b * w[:, 2] ** c)
            assert got == pytest.approx(sphere_monomial(a, b, c), abs=1e-12)


def test_sphere_rule_is_antipodal():
    d = lebedev_like_rule(6).directions
    n = len(d) // 2
    assert np.allclose(d[:n], -d[n:])


def test_unsupported_order():
    with pytest.raises(ConfigError):
        lebedev_like_rule(5)


@settings(max_examples=20)
@given(st.integers(1, 5))
def test_spatial_derivative_second_order(k):
    errs = []
    for M in (64, 128):
        g = SpatialGrid(2 * np.pi, M, 1)
        errs.append(np.abs(g.ddx(np.sin(k * g.x)) - k * np.cos(k * g.x)).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_integrate_constant_3d():
    g = SpatialGrid(2.0, 8, 3)
    assert g.integrate(np.ones(g.shape)) == pytest.approx(8.0)
