import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from advmems.grid import (
    Field,
    VectorField,
    build_grid,
    dirichlet_energy,
    discrete_gradient,
    gradient_array,
    integrate,
    nodal_integral,
    sphere_measure,
)


def test_interval_m11_spacing_and_boundary():
    g = build_grid("interval", N=1, m=11, bounds=(0, 1))
    assert g.h == pytest.approx(0.1, abs=1e-15)
    assert list(g.boundary) == [0, 10]
    assert g.axes[0][g.boundary].tolist() == [0.0, 1.0]


def test_ball_weights_sum_to_volume():
    g = build_grid("radial", N=3, m=101)
    assert abs(g.weights.sum() - 4 * math.pi / 3) <= 1e-10 * 4 * math.pi / 3


def test_rectangle_node_counts():
    g = build_grid("rectangle", N=2, m=33, bounds=((0, 1), (0, 1)))
    assert g.size == 1089
    assert len(g.boundary) == 128 == 4 * 32


def test_radial_symmetry_node_is_not_boundary():
    g = build_grid("radial", N=4, m=17)
    assert g.symmetry == 0
    assert 0 not in g.boundary
    assert list(g.boundary) == [16]


@pytest.mark.parametrize("N, volume", [(2, math.pi), (3, 4 * math.pi / 3), (4, math.pi**2 / 2)])
def test_sphere_measure_against_ball_volumes(N, volume):
    assert sphere_measure(N) / N == pytest.approx(volume, rel=1e-14)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="rectangle", m=8),
        dict(kind="rectangle", m=10),
        dict(kind="interval", m=2),
        dict(kind="interval", bounds=(1.0, 0.0)),
        dict(kind="interval", bounds=(0.0, 0.0)),
        dict(kind="radial", N=11),
        dict(kind="radial", N=0),
        dict(kind="radial", N=1),
        dict(kind="interval", N=2),
        dict(kind="disk"),
    ],
)
def test_build_grid_rejects(kwargs):
    with pytest.raises(ValueError):
        build_grid(**kwargs)


def test_integrate_constants():
    assert integrate(build_grid("interval", m=11).field(np.ones(11))) == pytest.approx(1.0, abs=1e-15)
    g = build_grid("radial", N=3, m=101)
    assert integrate(g.field(np.ones(g.size))) == pytest.approx(4 * math.pi / 3, rel=1e-10)


def test_integrate_sin_squared():
    g = build_grid("interval", m=513)
    f = g.sample(lambda x, r: np.sin(np.pi * x) ** 2)
    assert abs(integrate(f) - 0.5) <= 1e-6


def test_integrate_with_weight_and_grid_mismatch():
    g = build_grid("interval", m=33)
    x = g.coords()["x"]
    assert integrate(g.field(x), g.field(x)) == pytest.approx(nodal_integral(g, x * x))
    with pytest.raises(ValueError):
        integrate(g.field(x), build_grid("interval", m=35).field(np.ones(35)))


def _integrate_errors(kind, N, fn, exact, ms=(33, 65, 129)):
    errs = []
    for m in ms:
        g = build_grid(kind, N=N, m=m)
        errs.append(abs(nodal_integral(g, fn(g.coords())) - exact))
    return errs


@pytest.mark.parametrize(
    "kind, N, fn, exact",
    [
        ("interval", 1, lambda X: np.exp(X["x"]), math.e - 1),
        ("rectangle", 2, lambda X: np.exp(X["x"] + X["y"]), (math.e - 1) ** 2),
        ("radial", 3, lambda X: np.cos(X["r"]), 4 * math.pi * (2 * math.cos(1) - math.sin(1))),
        ("radial", 8, lambda X: np.cos(X["r"]),
         sphere_measure(8) * quad(lambda s: s**7 * math.cos(s), 0, 1, epsabs=1e-15)[0]),
    ],
)
def test_integrate_second_order(kind, N, fn, exact):
    e = _integrate_errors(kind, N, fn, exact)
    for k in range(len(e) - 1):
        assert 3.2 <= e[k] / e[k + 1] <= 4.8


def test_gradient_examples():
    g = build_grid("interval", m=11)
    x = g.coords()["x"]
    assert np.all(discrete_gradient(g.field(np.full(11, 3.0))).values == 0)
    assert np.allclose(discrete_gradient(g.field(x)).values, 1.0, atol=1e-13, rtol=0)
    d = discrete_gradient(g.field(x**2)).values[:, 0]
    assert d[5] == pytest.approx(1.0, abs=1e-14)
    # one-sided second order stencils are exact on quadratics too
    assert np.allclose(d, 2 * x, atol=1e-12)


def test_gradient_radial_symmetry_node():
    g = build_grid("radial", N=3, m=33)
    r = g.coords()["r"]
    d = gradient_array(g, np.cos(r))[:, 0]
    assert d[0] == 0.0
    assert np.max(np.abs(d[1:-1] + np.sin(r[1:-1]))) < 1e-3


def test_gradient_rectangle_components():
    g = build_grid("rectangle", m=17)
    X = g.coords()
    d = gradient_array(g, 2 * X["x"] - 3 * X["y"])
    assert np.allclose(d, [2.0, -3.0], atol=1e-12)


@pytest.mark.parametrize("kind", ["interval", "rectangle"])
def test_summation_by_parts(kind):
    """|int f dg + int g df| <= C h^2 for f, g vanishing on the boundary."""
    for m in (17, 33, 65):
        g = build_grid(kind, m=m)
        X = g.coords()
        if kind == "interval":
            f = np.sin(np.pi * X["x"])
            q = X["x"] * (1 - X["x"]) * np.exp(X["x"])
        else:
            f = np.sin(np.pi * X["x"]) * np.sin(2 * np.pi * X["y"])
            q = X["x"] * (1 - X["x"]) * X["y"] * (1 - X["y"])
        gf, gq = gradient_array(g, f), gradient_array(g, q)
        for k in range(g.ncomp):
            assert abs(nodal_integral(g, f * gq[:, k] + q * gf[:, k])) <= g.h**2


def test_dirichlet_energy_sine():
    g = build_grid("interval", m=513)
    f = np.sin(np.pi * g.coords()["x"])
    assert dirichlet_energy(g, f) == pytest.approx(math.pi**2 / 2, rel=1e-5)


def test_field_invariants():
    g = build_grid("interval", m=11)
    with pytest.raises(ValueError):
        Field(g, np.ones(10))
    with pytest.raises(ValueError):
        Field(g, np.array([np.nan] + [0.0] * 10))
    f = Field(g, np.zeros(11))
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(ValueError):
        VectorField(build_grid("rectangle", m=9), np.zeros((81, 1)))


kinds = st.sampled_from(["interval", "radial", "rectangle"])


@given(kind=kinds, N=st.integers(2, 10), k=st.integers(4, 40))
@settings(max_examples=60, deadline=None)
def test_grid_invariants(kind, N, k):
    m = 2 * k + 1
    g = build_grid(kind, N=N if kind == "radial" else None, m=m)
    assert np.all(g.weights >= 0)
    assert abs(g.weights.sum() - g.measure) <= 1e-10 * g.measure
    both = np.concatenate([g.interior, g.boundary])
    assert sorted(both.tolist()) == list(range(g.size))
    for h, ax in zip(g.spacing, g.axes):
        assert h > 0
        assert np.allclose(np.diff(ax), h, rtol=1e-12, atol=0)
    assert np.allclose(np.linalg.norm(g.normals, axis=1), 1.0)
