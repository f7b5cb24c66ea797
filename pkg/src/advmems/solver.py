"""Minimal solutions of -Lap u + c . grad u = lam / (1 - u)^2, u = 0 on the boundary.

``newton_solve`` is a damped Newton iteration; started from a subsolution
below the minimal solution (u = 0, or the previous branch point) its iterates
increase monotonically, which is what ``continue_branch`` relies on to stay
on the minimal branch.  ``shooting_oracle`` is an independent radial check.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq, minimize_scalar

from .fieldexpr import Expr, evaluate, parse_expression
from .grid import Field, Grid, VectorField, lp_norm
from .operators import OperatorMatrix, _values, assemble_advection_diffusion

log = logging.getLogger(__name__)

P0 = 3.5 + math.sqrt(6.0)
ROUNDOFF = 16 * np.finfo(float).eps
MIN_DAMPING = 2.0**-30


class MonotonicityError(RuntimeError):
    pass


class BracketError(RuntimeError):
    pass


def forcing(u: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 - u) ** 2


def default_exponents(N: int) -> tuple[float, ...]:
    """p values tracked along a branch: 2, 3N/4 and the two sides of P0."""
    ps = [2.0, 3.0 * N / 4.0, 0.99 * P0, 1.01 * P0]
    out = []
    for p in ps:
        if p >= 1 and p not in out:
            out.append(p)
    return tuple(out)


def inverse_square_norms(g: Grid, u: np.ndarray, exponents) -> dict[float, float]:
    f = forcing(u)
    return {float(p): lp_norm(g, f, p) for p in exponents}


@dataclass
class NewtonResult:
    u: Field | None
    converged: bool
    iterations: int
    residual: float
    message: str = ""
    at_roundoff: bool = False


def residual(A: OperatorMatrix, u: np.ndarray, lam: float) -> np.ndarray:
    g = A.grid
    F = A @ u
    interior = g.interior
    F[interior] -= lam * forcing(u[interior])
    return F


def newton_solve(g: Grid, c=None, lam: float = 0.0, u0=None, tol: float = 1e-10,
                 max_iter: int = 100, A: OperatorMatrix | None = None) -> NewtonResult:
    """Damped Newton for the discrete problem; failure is returned, not raised.

    A step ``s * du`` (s halved from 1) is accepted when it keeps ``u < 1``
    and the simplified Newton correction ``J^{-1} F(u + s du)`` is shorter than
    ``du`` in the max norm, i.e. the residual decreases in the Jacobian-scaled
    norm; the raw max-norm residual is badly scaled by the r = 0 row on fine
    radial grids.

    Converged means ``||F(u)||_inf <= tol``, or, when that is below what
    double precision can resolve for this operator, ``||F(u)||_inf`` at the
    round-off floor ``16 eps (||A||_inf ||u||_inf + lam ||f(u)||_inf)``.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if not (0 < tol <= 1e-8):
        raise ValueError(f"tol must lie in (0, 1e-8], got {tol}")
    if A is None:
        A = assemble_advection_diffusion(g, c)
    u = np.zeros(g.size) if u0 is None else np.array(_values(u0, g), dtype=float)
    if np.any(u < -1e-12) or np.any(u >= 1):
        raise ValueError("initial guess must lie in [0, 1)")
    np.maximum(u, 0.0, out=u)
    u[g.boundary] = 0.0
    interior = g.interior
    Anorm = A.norm_inf()
    Amat = A.matrix.tocsc()

    F = residual(A, u, lam)
    rn = float(np.max(np.abs(F)))
    for it in range(max_iter + 1):
        floor = ROUNDOFF * (Anorm * float(np.max(u)) + lam * float(np.max(forcing(u))))
        if rn <= tol or rn <= floor:
            return NewtonResult(Field(g, u), True, it, rn, "converged", rn > tol)
        if it == max_iter:
            break
        d = np.zeros(g.size)
        d[interior] = 2.0 * lam / (1.0 - u[interior]) ** 3
        try:
            lu = spla.splu(Amat - sp.diags(d, format="csc"))
        except RuntimeError as exc:
            return NewtonResult(None, False, it, rn, f"singular Jacobian: {exc}")
        step = lu.solve(-F)
        # identity rows: the exact step is zero there, keep u_b = 0 free of LU round-off
        step[g.boundary] = 0.0
        if not np.all(np.isfinite(step)):
            return NewtonResult(None, False, it, rn, "singular Jacobian")
        snorm = float(np.max(np.abs(step)))
        s = 1.0
        while True:
            v = u + s * step
            if np.max(v) < 1.0:
                Fv = residual(A, v, lam)
                rv = float(np.max(np.abs(Fv)))
                # natural monotonicity: the next correction must be shorter
                if rv <= floor or float(np.max(np.abs(lu.solve(Fv)))) < snorm:
                    break
            s /= 2
            if s < MIN_DAMPING:
                return NewtonResult(None, False, it, rn, "damping underflow")
        u, F, rn = v, Fv, rv
    return NewtonResult(None, False, max_iter, rn, "iteration cap reached")


@dataclass
class BranchPoint:
    lam: float
    u: Field
    newton_iters: int
    residual: float = 0.0
    K: float = float("nan")
    lp_norms: dict = field(default_factory=dict)

    @property
    def sup_u(self) -> float:
        return float(np.max(self.u.values))


@dataclass
class Branch:
    grid: Grid
    c: VectorField
    points: list[BranchPoint]
    bracket: tuple[float, float]
    tol: float = 1e-10

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])

    @property
    def lam_star(self) -> float:
        return 0.5 * (self.bracket[0] + self.bracket[1])

    @property
    def width(self) -> float:
        return self.bracket[1] - self.bracket[0]

    @property
    def last(self) -> BranchPoint:
        return self.points[-1]

    def exponents(self) -> list[float]:
        return sorted(self.points[0].lp_norms)

    def to_csv(self) -> str:
        ps = self.exponents()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "sup_u", "K", "newton_iters", "residual"] + [f"lp_{fmt(p)}" for p in ps])
        for pt in self.points:
            w.writerow([fmt(pt.lam), fmt(pt.sup_u), fmt(pt.K), pt.newton_iters, fmt(pt.residual)]
                       + [fmt(pt.lp_norms[p]) for p in ps])
        return buf.getvalue()


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def continue_branch(g: Grid, c=None, lam_step0: float = 0.1, bracket_tol: float = 1e-6,
                    tol: float = 1e-10, max_steps: int = 1000, exponents=None,
                    max_iter: int = 100) -> Branch:
    """Follow the minimal branch from lam = 0 and bracket the fold.

    Steps grow by 1.3 after easy solves (<= 4 Newton iterations).  A failure
    fixes an upper bracket which is bisected until its width is at most
    ``bracket_tol * max(1, lam_lo)``; the bracket is accepted only if Newton
    also fails at its upper end when started from the last branch point.
    """
    if lam_step0 <= 0 or bracket_tol <= 0:
        raise ValueError("lam_step0 and bracket_tol must be positive")
    cv = _values(c, g, g.ncomp)
    A = assemble_advection_diffusion(g, cv)
    exps = default_exponents(g.dim) if exponents is None else tuple(exponents)
    u_lo = np.zeros(g.size)
    points = [BranchPoint(0.0, Field(g, u_lo), 0, 0.0, lp_norms=inverse_square_norms(g, u_lo, exps))]
    lam_lo, lam_hi, step = 0.0, None, lam_step0

    fail_step = step
    for _ in range(max_steps):
        if lam_hi is not None and lam_hi - lam_lo <= bracket_tol * max(1.0, lam_lo):
            # a failure reached from far away can be a slow Newton run rather than
            # the fold; only a failure from the adjacent branch point closes the bracket
            res = newton_solve(g, cv, lam_hi, u_lo, tol, max_iter=max_iter, A=A)
            if not res.converged:
                return Branch(g, VectorField(g, cv), points, (lam_lo, lam_hi), tol)
            log.debug("spurious failure at lam=%.17g, resuming", lam_hi)
            lam, lam_hi = lam_hi, None
            step = fail_step = fail_step / 4
        else:
            lam = lam_lo + step if lam_hi is None else 0.5 * (lam_lo + lam_hi)
            res = newton_solve(g, cv, lam, u_lo, tol, max_iter=max_iter, A=A)
            if not res.converged:
                log.debug("newton failed at lam=%.17g: %s", lam, res.message)
                if lam_hi is None:
                    fail_step = lam - lam_lo
                lam_hi = lam
                continue
        u = res.u.values
        drop = float(np.min(u - u_lo))
        if drop < -1e-12:
            raise MonotonicityError(
                f"minimal branch not monotone between lam={lam_lo!r} and lam={lam!r} (min increment {drop:.3e})"
            )
        points.append(BranchPoint(lam, res.u, res.iterations, res.residual,
                                  lp_norms=inverse_square_norms(g, u, exps)))
        lam_lo, u_lo = lam, u
        if lam_hi is None and res.iterations <= 4:
            step *= 1.3
    raise BracketError(f"no bracket of relative width {bracket_tol} within {max_steps} steps")


# --------------------------------------------------------------------------
# radial shooting


@numba.njit(cache=True)
def _rhs(r, u, v, lam, N, cr):
    f = lam / (1.0 - u) ** 2
    if r == 0.0:
        return -f / N
    return -(N - 1) / r * v + cr * v - f


@numba.njit(cache=True)
def _shoot(eta, lam, N, R, nsteps, chalf):
    """Integrate from the center; +1 if u(R) > 0, -1 if u reaches 0 (or blows up) first."""
    h = R / nsteps
    u = eta
    v = 0.0
    for k in range(nsteps):
        r = k * h
        c0 = chalf[2 * k]
        c1 = chalf[2 * k + 1]
        c2 = chalf[2 * k + 2]
        k1u = v
        k1v = _rhs(r, u, v, lam, N, c0)
        u2 = u + 0.5 * h * k1u
        v2 = v + 0.5 * h * k1v
        if u2 >= 1.0:
            return -1.0, u
        k2u = v2
        k2v = _rhs(r + 0.5 * h, u2, v2, lam, N, c1)
        u3 = u + 0.5 * h * k2u
        v3 = v + 0.5 * h * k2v
        if u3 >= 1.0:
            return -1.0, u
        k3u = v3
        k3v = _rhs(r + 0.5 * h, u3, v3, lam, N, c1)
        u4 = u + h * k3u
        v4 = v + h * k3v
        if u4 >= 1.0:
            return -1.0, u
        k4u = v4
        k4v = _rhs(r + h, u4, v4, lam, N, c2)
        u = u + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not (u > 0.0) or u >= 1.0:
            return -1.0, u
    return 1.0, u


@numba.njit(cache=True)
def _lambda_of_eta(eta, N, R, nsteps, chalf, lam_cap, iters):
    lo = 0.0
    hi = lam_cap
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        s, _u = _shoot(eta, mid, N, R, nsteps, chalf)
        if s > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@numba.njit(cache=True)
def _lambda_curve(etas, N, R, nsteps, chalf, lam_cap, iters):
    out = np.empty(etas.size)
    for i in range(etas.size):
        out[i] = _lambda_of_eta(etas[i], N, R, nsteps, chalf, lam_cap, iters)
    return out


@dataclass
class OracleResult:
    lam_star: float
    eta_star: float
    etas: np.ndarray
    lams: np.ndarray
    N: int
    radius: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eta", "lambda"])
        for e, l in zip(self.etas, self.lams):
            w.writerow([fmt(e), fmt(l)])
        return buf.getvalue()


class ShootingOracle:
    """Radial IVP u(0) = eta, u'(0) = 0, shot to r = radius, bisected on lam."""

    LAM_CAP = 100.0
    BISECT = 60

    def __init__(self, N: int, c_r: Expr | str | None = None, radius: float = 1.0,
                 max_step: float = 1e-4):
        if not (1 <= N <= 10):
            raise ValueError("N must lie in [1, 10]")
        self.N = int(N)
        self.radius = float(radius)
        self.nsteps = int(math.ceil(self.radius / max_step))
        r_half = np.linspace(0.0, self.radius, 2 * self.nsteps + 1)
        if c_r is None:
            self.chalf = np.zeros_like(r_half)
        else:
            e = parse_expression(c_r) if isinstance(c_r, str) else c_r
            self.chalf = np.broadcast_to(np.asarray(evaluate(e, {"r": r_half})), r_half.shape).copy()

    def lam(self, eta) -> np.ndarray:
        etas = np.atleast_1d(np.asarray(eta, dtype=float))
        return _lambda_curve(etas, float(self.N), self.radius, self.nsteps, self.chalf,
                             self.LAM_CAP, self.BISECT)

    def curve(self, eta_grid: int = 200) -> tuple[np.ndarray, np.ndarray]:
        etas = np.arange(1, eta_grid + 1) / (eta_grid + 1)
        return etas, self.lam(etas)

    def center_value(self, lam: float, eta_grid: int = 200) -> float:
        """Center value eta of the minimal (lower-branch) solution at ``lam``."""
        etas, lams = self.curve(eta_grid)
        above = np.flatnonzero(lams >= lam)
        if above.size == 0:
            raise ValueError(f"lam = {lam} exceeds the sampled maximum {lams.max():.6g}")
        k = above[0]
        lo = 0.0 if k == 0 else etas[k - 1]
        return brentq(lambda e: self.lam(e)[0] - lam, lo, etas[k], xtol=1e-14)


def shooting_oracle(N: int, c_r=None, eta_grid: int = 200, radius: float = 1.0,
                    max_step: float = 1e-4) -> OracleResult:
    """lam(eta) on a uniform grid of center values and its maximum lam*.

    An interior grid maximum is refined by bounded scalar maximization; a
    maximum at the last grid value (no fold, N >= 8) is reported as sampled.
    """
    if eta_grid < 100:
        raise ValueError("eta_grid must be at least 100")
    osc = ShootingOracle(N, c_r, radius, max_step)
    etas, lams = osc.curve(eta_grid)
    k = int(np.argmax(lams))
    lam_star, eta_star = float(lams[k]), float(etas[k])
    if 0 < k < eta_grid - 1:
        res = minimize_scalar(lambda e: -osc.lam(e)[0], bounds=(etas[k - 1], etas[k + 1]),
                              method="bounded", options={"xatol": 1e-10})
        if -res.fun > lam_star:
            lam_star, eta_star = float(-res.fun), float(res.x)
    return OracleResult(lam_star, eta_star, etas, lams, int(N), float(radius))
