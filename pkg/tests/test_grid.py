import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rswshock.grid import GridSpec, OutOfDomain, centred_x2, ddx1, ddx2, interp_bilinear, interp_points


def test_gridspec_spacings():
    g = GridSpec(16, 8, 0.0, 2.0, 0.5)
    assert g.dx1 == 2.0 / 16
    assert g.dx2 == 0.5 / 8
    assert g.shape == (16, 8)
    assert g.x1[0] == pytest.approx(g.dx1 / 2)
    assert g.x2[-1] == pytest.approx(0.5 - g.dx2 / 2)


@pytest.mark.parametrize("args", [(7, 8, 0, 1), (8, 3, 0, 1), (8, 8, 1, 1), (8, 8, 0, 1, 0.0)])
def test_gridspec_rejects_bad_input(args):
    with pytest.raises(ValueError):
        GridSpec(*args)


def test_shifted_moves_by_whole_cells():
    g = GridSpec(10, 4, 0.0, 1.0)
    s = g.shifted(3)
    assert s.x1_min == pytest.approx(0.3) and s.x1_max == pytest.approx(1.3)
    assert s.dx1 == pytest.approx(g.dx1)


def test_ddx_of_constant_is_zero():
    g = GridSpec(32, 8, 0.0, 1.0)
    f = np.full(g.shape, 2.5)
    assert np.all(ddx1(f, g) == 0.0)
    assert np.all(ddx2(f, g) == 0.0)


def test_ddx1_exact_on_polynomials_up_to_degree_four():
    g = GridSpec(40, 4, -1.0, 1.0)
    X1, _ = g.mesh()
    np.testing.assert_allclose(ddx1(X1, g), 1.0, atol=1e-12)
    for p in range(2, 5):
        np.testing.assert_allclose(ddx1(X1 ** p, g), p * X1 ** (p - 1), atol=1e-10)


def test_ddx2_fourth_order_convergence():
    errs = []
    for n2 in (16, 32, 64):
        g = GridSpec(8, n2, 0.0, 1.0, 1.0)
        _, X2 = g.mesh()
        f = np.sin(2 * np.pi * X2)
        errs.append(np.max(np.abs(ddx2(f, g) - 2 * np.pi * np.cos(2 * np.pi * X2))))
    assert errs[0] / errs[1] >= 15.5
    assert errs[1] / errs[2] >= 15.5


def test_ddx1_fourth_order_convergence_including_edges():
    errs = []
    for n1 in (32, 64, 128):
        g = GridSpec(n1, 4, 0.0, 1.0)
        X1, _ = g.mesh()
        errs.append(np.max(np.abs(ddx1(np.sin(3 * X1), g) - 3 * np.cos(3 * X1))))
    assert errs[0] / errs[1] > 14 and errs[1] / errs[2] > 14


def test_ddx_linearity_and_periodic_shift():
    rng = np.random.default_rng(1)
    g = GridSpec(24, 12, 0.0, 1.0)
    f, h = rng.standard_normal((2,) + g.shape)
    for op in (ddx1, ddx2):
        np.testing.assert_allclose(op(2 * f - 3 * h, g), 2 * op(f, g) - 3 * op(h, g), atol=1e-10)
    # shifting by a whole period in x2 is the identity on cell data
    assert np.array_equal(ddx2(np.roll(f, g.n2, axis=1), g), ddx2(f, g))
    np.testing.assert_array_equal(ddx1(np.roll(f, 5, axis=1), g), np.roll(ddx1(f, g), 5, axis=1))


def test_discrete_mixed_derivatives_commute_at_fourth_order():
    errs = []
    for n in (32, 64):
        g = GridSpec(n, n, 0.0, 1.0)
        X1, X2 = g.mesh()
        f = np.exp(X1) * np.sin(2 * np.pi * X2)
        d = ddx1(ddx2(f, g), g) - ddx2(ddx1(f, g), g)
        errs.append(np.max(np.abs(d)))
    # the difference vanishes identically: the two operators act on different axes
    assert max(errs) < 1e-9


def test_interp_reproduces_constants_and_linear_nodes():
    g = GridSpec(16, 8, 0.0, 1.0)
    assert interp_bilinear(np.full(g.shape, 3.5), g, 0.37, 0.91) == pytest.approx(3.5, abs=1e-15)
    X1, X2 = g.mesh()
    f = X1 + 2 * X2
    assert interp_bilinear(f, g, g.x1[5], g.x2[3]) == pytest.approx(g.x1[5] + 2 * g.x2[3], abs=1e-14)


def test_interp_out_of_domain():
    g = GridSpec(16, 8, 0.0, 1.0)
    with pytest.raises(OutOfDomain):
        interp_bilinear(np.zeros(g.shape), g, 1.5, 0.0)
    vals, inside = interp_points([np.zeros(g.shape)], g, np.array([0.5, -0.1, np.nan]), np.zeros(3))
    assert inside.tolist() == [True, False, False]
    assert np.isnan(vals[0, 1]) and np.isnan(vals[0, 2])


def test_interp_wraps_in_x2():
    g = GridSpec(16, 8, 0.0, 1.0)
    rng = np.random.default_rng(3)
    f = rng.standard_normal(g.shape)
    a = interp_bilinear(f, g, 0.4, 0.3)
    assert interp_bilinear(f, g, 0.4, 2.3) == pytest.approx(a, abs=1e-13)
    assert interp_bilinear(f, g, 0.4, -0.7) == pytest.approx(a, abs=1e-13)


def test_interp_second_order_under_refinement():
    pts = np.random.default_rng(0).uniform(0.1, 0.9, (2, 200))
    errs = []
    for n in (32, 64, 128):
        g = GridSpec(n, n, 0.0, 1.0)
        X1, X2 = g.mesh()
        f = np.sin(3 * X1) * np.cos(2 * np.pi * X2)
        v, _ = interp_points([f], g, pts[0], pts[1])
        errs.append(np.max(np.abs(v[0] - np.sin(3 * pts[0]) * np.cos(2 * np.pi * pts[1]))))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(-5.0, 5.0))
def test_interp_continuous_and_bounded(x1, x2):
    g = GridSpec(12, 6, 0.0, 1.0)
    f = np.random.default_rng(7).uniform(-1, 1, g.shape)
    v = interp_bilinear(f, g, x1, x2)
    assert f.min() - 1e-12 <= v <= f.max() + 1e-12
    eps = 1e-9
    v2 = interp_bilinear(f, g, min(x1 + eps, 1.0), x2 + eps)
    assert abs(v2 - v) < 1e-6


def test_centred_x2():
    np.testing.assert_allclose(centred_x2(np.array([0.0, 0.25, 0.5, 0.75, 1.0]), 1.0),
                               [0.0, 0.25, -0.5, -0.25, 0.0])
