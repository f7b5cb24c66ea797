import csv
import io
import math

import numpy as np
import pytest

from advmems.grid import build_grid
from advmems.operators import assemble_advection_diffusion
from advmems.solver import (
    ROUNDOFF,
    ShootingOracle,
    continue_branch,
    forcing,
    newton_solve,
    residual,
    shooting_oracle,
)

# lambda(eta) for -u'' = lam/(1-u)^2 on (-R, R) by the first integral, a = 1 - eta:
#   lam = a/(2R^2) * (sqrt(1-a) + a*log((1 + sqrt(1-a))/sqrt(a)))^2
# maximized / inverted in 30-digit arithmetic for R = 1/2
LAM_STAR_1D = 1.4000164773709989628
ETA_STAR_1D = 0.38834671891278282511
ETA_AT_LAM1 = 0.16998336825610778344
SINGULAR_LAM_N8 = 40 / 9


def lam_closed_form(eta, R=0.5):
    a = 1 - eta
    return a / (2 * R**2) * (math.sqrt(1 - a) + a * math.log((1 + math.sqrt(1 - a)) / math.sqrt(a))) ** 2


def test_closed_form_constants_consistent():
    assert lam_closed_form(ETA_STAR_1D) == pytest.approx(LAM_STAR_1D, rel=1e-14)
    assert lam_closed_form(ETA_AT_LAM1) == pytest.approx(1.0, rel=1e-14)


def test_zero_lambda_one_iteration():
    g = build_grid("interval", m=65)
    res = newton_solve(g, None, 0.0)
    assert res.converged and res.iterations <= 1
    assert np.all(res.u.values == 0)


def test_newton_matches_closed_form(interval513):
    res = newton_solve(interval513, None, 1.0)
    assert res.converged
    assert abs(res.u.values.max() - ETA_AT_LAM1) <= 1e-4


def test_newton_beyond_fold_is_data(interval513):
    res = newton_solve(interval513, None, 10.0)
    assert not res.converged
    assert res.u is None
    assert res.message


@pytest.mark.parametrize("kw", [dict(tol=0.0), dict(tol=1e-7), dict(lam=-1.0)])
def test_newton_preconditions(kw):
    g = build_grid("interval", m=17)
    args = dict(lam=0.5, tol=1e-10)
    args.update(kw)
    with pytest.raises(ValueError):
        newton_solve(g, None, args["lam"], tol=args["tol"])


@pytest.mark.parametrize("u0", [np.full(17, 1.0), np.full(17, -0.1)])
def test_newton_rejects_initial_guess(u0):
    with pytest.raises(ValueError):
        newton_solve(build_grid("interval", m=17), None, 0.5, u0)


def test_branch_interval(branch_interval):
    b = branch_interval
    assert b.width <= 1e-6 * b.lam_star
    assert abs(b.lam_star - LAM_STAR_1D) / LAM_STAR_1D <= 1e-3
    lam = b.lambdas
    assert lam[0] == 0 and np.all(np.diff(lam) > 0)
    assert b.bracket[0] == lam[-1] < b.bracket[1]


def test_branch_monotone(branch_interval, branch_shear, branch_ball8):
    for b in (branch_interval, branch_shear, branch_ball8):
        for p, q in zip(b.points, b.points[1:]):
            assert np.min(q.u.values - p.u.values) >= -1e-12
        for p in b.points:
            assert np.all(p.u.values < 1) and np.all(p.u.values >= 0)
            assert np.all(p.u.values[b.grid.boundary] == 0)
            assert p.sup_u == p.u.values.max()


def test_branch_residual_certificate(branch_interval, branch_shear, branch_ball8):
    """||F(u)||_inf <= tol, or the round-off floor 16 eps (||A|| max u + lam max f) above it."""
    for b in (branch_interval, branch_shear, branch_ball8):
        A = assemble_advection_diffusion(b.grid, b.c)
        for p in b.points:
            u = p.u.values
            floor = ROUNDOFF * (A.norm_inf() * u.max() + p.lam * forcing(u).max())
            assert np.max(np.abs(residual(A, u, p.lam))) <= max(b.tol, floor)


def test_coarse_branch_meets_tol_exactly():
    b = continue_branch(build_grid("interval", m=65))
    A = assemble_advection_diffusion(b.grid)
    for p in b.points:
        assert np.max(np.abs(residual(A, p.u.values, p.lam))) <= 1e-10


def test_minimality_proxy(branch_interval):
    b = branch_interval
    for p in b.points[1:-3:3]:
        res = newton_solve(b.grid, None, p.lam)
        assert res.converged
        assert np.max(np.abs(res.u.values - p.u.values)) <= 1e-8


def test_large_first_step_recovers():
    g = build_grid("interval", m=129)
    b = continue_branch(g, lam_step0=5.0)
    assert len(b.points) > 3
    assert abs(b.lam_star - LAM_STAR_1D) / LAM_STAR_1D <= 1e-3


def test_branch_preconditions():
    g = build_grid("interval", m=17)
    with pytest.raises(ValueError):
        continue_branch(g, lam_step0=0.0)
    with pytest.raises(ValueError):
        continue_branch(g, bracket_tol=-1.0)


def test_branch_csv(branch_interval):
    text = branch_interval.to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0][:5] == ["lambda", "sup_u", "K", "newton_iters", "residual"]
    assert any(h.startswith("lp_") for h in rows[0])
    assert len(rows) == len(branch_interval.points) + 1
    assert float(rows[-1][0]) == branch_interval.points[-1].lam


def test_lp_norms_at_zero(branch_ball8):
    p0 = branch_ball8.points[0]
    vol = branch_ball8.grid.measure
    for p, v in p0.lp_norms.items():
        assert v == pytest.approx(vol ** (1 / p), rel=1e-12)


# --------------------------------------------------------------------------
# shooting oracle


def test_oracle_interval_closed_form():
    res = shooting_oracle(1, radius=0.5)
    assert abs(res.lam_star - LAM_STAR_1D) / LAM_STAR_1D <= 1e-8
    assert abs(res.eta_star - ETA_STAR_1D) <= 1e-5
    k = int(np.argmax(res.lams))
    assert 0 < k < len(res.lams) - 1


def test_oracle_curve_against_closed_form():
    osc = ShootingOracle(1, radius=0.5)
    for eta in (0.05, 0.2, 0.5, 0.8):
        assert osc.lam(eta)[0] == pytest.approx(lam_closed_form(eta), rel=1e-9)
    assert osc.center_value(1.0) == pytest.approx(ETA_AT_LAM1, abs=1e-9)


def test_oracle_small_eta():
    osc = ShootingOracle(3)
    lams = osc.lam([1e-4, 1e-3, 1e-2])
    assert np.all(np.diff(lams) > 0) and lams[0] < 1e-2


def test_oracle_singular_dimension():
    res = shooting_oracle(8)
    assert abs(res.lam_star - SINGULAR_LAM_N8) / SINGULAR_LAM_N8 <= 1e-2


def test_oracle_preconditions():
    with pytest.raises(ValueError):
        shooting_oracle(3, eta_grid=50)
    with pytest.raises(ValueError):
        ShootingOracle(11)


def test_interval_two_methods(branch_interval):
    res = shooting_oracle(1, radius=0.5)
    assert abs(branch_interval.lam_star - res.lam_star) / res.lam_star <= 1e-3


@pytest.mark.parametrize("N", [2, 3, 7, 8])
def test_radial_two_methods(N):
    b = continue_branch(build_grid("radial", N=N, m=1025))
    res = shooting_oracle(N)
    assert abs(b.lam_star - res.lam_star) / res.lam_star <= 1e-3


def test_radial_drift_two_methods():
    """c = r (outward drift) in N = 3: continuation and shooting with the same drift."""
    g = build_grid("radial", N=3, m=1025)
    b = continue_branch(g, g.coords()["r"])
    res = shooting_oracle(3, "r")
    assert abs(b.lam_star - res.lam_star) / res.lam_star <= 1e-3
