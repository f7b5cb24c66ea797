"""Discrete checks of the Hardy-type inequalities and the L^p estimate.

Dirichlet energies ``int w |grad psi|^2`` use the staggered face quadrature
(:func:`advmems.grid.dirichlet_energy`), i.e. the quadratic form of the
assembled operators.  Terms carrying grad(E)/E are evaluated on the same
faces, where E is the face mean and stays positive next to the boundary, so
the 0/0 limit at Dirichlet nodes never has to be formed.  Faces (and, for
the pointwise Lambda, nodes) below ``FLOOR * max`` are skipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Field, Grid, dirichlet_energy, face_divergence, face_difference, face_mean, gradient_array, nodal_integral
from .operators import face_advection
from .hodge import Decomposition, flux_pairing
from .solver import P0, Branch, forcing
from .spectral import linearized_stability, stability_potential

FLOOR = 1e-8
N_MODES = 8


def t_max(beta: float) -> float:
    return beta + math.sqrt(beta * beta + beta)


def admissible_t_range(beta: float) -> tuple[float, float]:
    """Open interval of t for which beta - t^2/(2t+1) > 0.

    The closed range 1 <= beta <= 2 is accepted so the limiting values at the
    ends can be inspected; the estimate itself needs 1 < beta < 2.
    """
    if not (1.0 <= beta <= 2.0):
        raise ValueError(f"beta must lie in [1, 2], got {beta}")
    return 0.0, t_max(beta)


def estimate_coefficient(beta: float, t: float) -> float:
    return beta - t * t / (2 * t + 1)


def exponent_from_t(t: float) -> float:
    """L^p exponent of (1-u)^-2 controlled by the (2t+3) moment."""
    return (2 * t + 3) / 2


def critical_exponent() -> float:
    return exponent_from_t(t_max(2.0))


def random_test_functions(g: Grid, count: int, seed: int = 42) -> list[Field]:
    """Smooth test functions vanishing on the boundary.

    psi = sum_k c_k * mode_k with c_k ~ U[-1, 1]; modes are products of
    sin(k pi x) on tensor grids and cos((k - 1/2) pi r) on the ball.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), g.size, count]))
    X = g.coords()
    if g.kind == "rectangle":
        (x0, x1), (y0, y1) = [(a[0], a[-1]) for a in g.axes]
        sx = (X["x"] - x0) / (x1 - x0)
        sy = (X["y"] - y0) / (y1 - y0)
        pairs = sorted(((i, j) for i in range(1, N_MODES + 1) for j in range(1, N_MODES + 1)),
                       key=lambda p: (p[0] ** 2 + p[1] ** 2, p))[:N_MODES]
        modes = [np.sin(i * np.pi * sx) * np.sin(j * np.pi * sy) for i, j in pairs]
    elif g.kind == "interval":
        a, b = g.axes[0][0], g.axes[0][-1]
        s = (X["x"] - a) / (b - a)
        modes = [np.sin(k * np.pi * s) for k in range(1, N_MODES + 1)]
    else:
        modes = [np.cos((k - 0.5) * np.pi * X["r"]) for k in range(1, N_MODES + 1)]
    modes = np.array(modes)
    modes[:, g.boundary] = 0.0
    coeffs = rng.uniform(-1.0, 1.0, size=(count, N_MODES))
    return [Field(g, c @ modes) for c in coeffs]


@dataclass(frozen=True)
class SlackReport:
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def slack(self) -> np.ndarray:
        return self.lhs - self.rhs

    @property
    def min_slack(self) -> float:
        return float(self.slack.min())

    def scaled_min(self) -> float:
        """min over psi of slack / max(1, lhs)."""
        return float(np.min(self.slack / np.maximum(1.0, self.lhs)))

    def passed(self, rel: float = 1e-8) -> bool:
        return self.scaled_min() >= -rel


@dataclass(frozen=True)
class HardyProbe:
    weight: Field
    E: Field
    beta: float
    psis: list

    def __post_init__(self):
        if not (1.0 <= self.beta <= 2.0):
            raise ValueError(f"beta must lie in [1, 2], got {self.beta}")
        if np.any(self.E.values < 0) or np.max(self.E.values) <= 0:
            raise ValueError("E must be positive")
        if np.any(self.weight.values <= 0):
            raise ValueError("the weight must be positive")
        g = self.E.grid
        for psi in self.psis:
            if psi.grid != g:
                raise ValueError("test function on a different grid")
            tol = 1e-12 * max(1.0, float(np.max(np.abs(psi.values))))
            if np.any(np.abs(psi.values[g.boundary]) > tol):
                raise ValueError("test functions must vanish on the boundary")


def _support(E: np.ndarray) -> np.ndarray:
    return E >= FLOOR * np.max(E)


def _face_terms(g: Grid, E: np.ndarray, w: np.ndarray):
    """Face volume, weight, difference quotient and 1/E on faces above the floor."""
    F = g.faces
    Ef = face_mean(g, E)
    on = Ef >= FLOOR * np.max(E)
    inv = np.zeros(len(F))
    inv[on] = 1.0 / Ef[on]
    return F.volume * face_mean(g, w), face_difference(g, E), inv


def hardy_check(probe: HardyProbe) -> SlackReport:
    """int w|grad psi|^2 >= b(2-b)/4 int w|grad E|^2/E^2 psi^2 + b/2 int -div(w grad E)/E psi^2."""
    E = probe.E.values
    g = probe.E.grid
    w = probe.weight.values
    b = probe.beta
    if np.any(E[g.interior] <= 0):
        raise ValueError("E must be strictly positive at interior nodes")
    vw, dE, inv = _face_terms(g, E, w)
    face_pot = b * (2 - b) / 4 * vw * (dE * inv) ** 2
    on = _support(E)
    div = face_divergence(g, face_mean(g, w) * dE)
    pot = np.zeros(g.size)
    pot[on] = b / 2 * (-div[on]) / E[on]
    lhs = np.array([dirichlet_energy(g, p.values, w) for p in probe.psis])
    rhs = np.array([np.dot(face_pot, face_mean(g, p.values) ** 2) + np.dot(g.weights, pot * p.values**2)
                    for p in probe.psis])
    return SlackReport(lhs, rhs)


def energy_inequality_check(g: Grid, d: Decomposition, phi, rho, beta: float, psis) -> SlackReport:
    """Weighted energy inequality for the principal eigenfunction phi of -Lap + c.grad - rho."""
    if not (1.0 <= beta <= 2.0):
        raise ValueError(f"beta must lie in [1, 2], got {beta}")
    ph = np.asarray(phi.values if isinstance(phi, Field) else phi, dtype=float)
    rh = np.asarray(rho.values if isinstance(rho, Field) else rho, dtype=float)
    if np.any(ph[g.interior] <= 0):
        raise ValueError("phi must be positive at interior nodes")
    w = d.weight
    vw, dphi, inv = _face_terms(g, ph, w)
    q = dphi * inv
    a_f = face_advection(g, d.a.values)
    face_pot = vw * (beta * (2 - beta) / 4 * q**2 - beta / 2 * a_f * q)
    pot = beta / 2 * w * rh
    lhs = np.array([dirichlet_energy(g, p.values, w) for p in psis])
    rhs = np.array([np.dot(face_pot, face_mean(g, p.values) ** 2) + np.dot(g.weights, pot * p.values**2)
                    for p in psis])
    return SlackReport(lhs, rhs)


def primitive(u: np.ndarray, t: float) -> np.ndarray:
    """G(u) = int_0^u ((1-s)^-(2t+1) - 1) ds, so G(0) = 0."""
    return ((1.0 - u) ** (-2 * t) - 1.0) / (2 * t) - u


@dataclass(frozen=True)
class FluxCheck:
    value: float
    bound: float
    nodal_value: float

    @property
    def passed(self) -> bool:
        return abs(self.value) <= self.bound


def _pairing(d: Decomposition, u: np.ndarray, f: np.ndarray, t: float) -> FluxCheck:
    g = d.grid
    w = d.weight
    a = d.a.values
    gu = gradient_array(g, u)
    scale = np.dot(g.weights, w * np.linalg.norm(a, axis=1) * np.linalg.norm(gu, axis=1)
                   * (1.0 - u) ** (-(2 * t + 2)))
    nodal = float(np.dot(g.weights, w * np.sum(a * gradient_array(g, f), axis=1)))
    return FluxCheck(flux_pairing(d, f), float(1e-8 * scale + 1e-12), nodal)


def _check_u(u, t: float) -> np.ndarray:
    if t <= 0:
        raise ValueError("t must be positive")
    uv = np.asarray(u.values if isinstance(u, Field) else u, dtype=float)
    if np.any(uv >= 1):
        raise ValueError("u must stay below 1")
    return uv


def flux_orthogonality_check(d: Decomposition, u, t: float) -> FluxCheck:
    """int e^gamma a . grad((1-u)^-(2t+1) - 1), paired on the faces where e^gamma a is divergence free.

    ``nodal_value`` is the same integral with nodal a and centered gradients;
    it vanishes only to O(h^2) and is reported for comparison.
    """
    uv = _check_u(u, t)
    return _pairing(d, uv, (1.0 - uv) ** (-(2 * t + 1)) - 1.0, t)


def primitive_pairing(d: Decomposition, u, t: float) -> FluxCheck:
    """int e^gamma a . grad G(u) with G the primitive above; the H term of the estimate."""
    uv = _check_u(u, t)
    return _pairing(d, uv, primitive(uv, t), t)


@dataclass(frozen=True)
class EstimateReport:
    beta: float
    t: float
    lam: float
    lhs: float
    rhs_terms: tuple[float, float]
    coefficient: float
    lambda_sup: float
    lambda_cap: float
    H_value: float
    H_bound: float

    @property
    def rhs(self) -> float:
        return self.rhs_terms[0] + self.rhs_terms[1]

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def scale(self) -> float:
        return max(self.lhs, self.rhs)

    def passed(self, rel: float = 1e-10) -> bool:
        return (self.slack >= -rel * self.scale and self.coefficient > 0
                and self.lambda_sup <= self.lambda_cap + 1e-10 and abs(self.H_value) <= self.H_bound)


def main_estimate_check(g: Grid, d: Decomposition, u, lam: float, beta: float, t: float,
                        phi=None, tol: float = 1e-8) -> EstimateReport:
    """Evaluate both sides of the weighted L^p estimate at a branch point."""
    if not (1.0 < beta < 2.0):
        raise ValueError(f"beta must lie in (1, 2), got {beta}")
    tmax = t_max(beta)
    if not (0.0 < t < tmax):
        raise ValueError(f"t must lie in (0, {tmax}), got {t}")
    uv = np.asarray(u.values if isinstance(u, Field) else u, dtype=float)
    if phi is None:
        phi = linearized_stability(g, d.c, uv, lam, tol).phi
    ph = np.asarray(phi.values if isinstance(phi, Field) else phi, dtype=float)
    w = d.weight
    s = 1.0 - uv
    coef = estimate_coefficient(beta, t)
    a_sup2 = d.a_sup() ** 2
    lhs = lam * coef * np.dot(g.weights, w * s ** (-(2 * t + 3)))
    rhs1 = 2 * beta * lam * np.dot(g.weights, w * s ** (-(t + 3)))
    rhs2 = beta * a_sup2 / (4 * (2 - beta)) * np.dot(g.weights, w * s ** (-2 * t))
    on = _support(ph)
    q = gradient_array(g, ph)[on] / ph[on, None]
    Lam = np.sum(d.a.values[on] * q, axis=1) - (2 - beta) / 2 * np.sum(q**2, axis=1)
    H = primitive_pairing(d, uv, t)
    return EstimateReport(
        beta=beta, t=t, lam=lam, lhs=float(lhs), rhs_terms=(float(rhs1), float(rhs2)),
        coefficient=coef, lambda_sup=float(Lam.max()), lambda_cap=a_sup2 / (2 * (2 - beta)),
        H_value=H.value, H_bound=H.bound,
    )


# --------------------------------------------------------------------------
# regularity trend along a branch

BOUNDED_RATIO = 0.5
DIVERGING_RATIO = 1.0
DIVERGING_GROWTH = 10.0
CHECKPOINT_FACTOR = 100.0


@dataclass
class NormTrend:
    p: float
    norms: np.ndarray
    growth: float
    last_increment_ratio: float
    integral_ratio: float

    @property
    def status(self) -> str:
        if self.growth >= DIVERGING_GROWTH or self.last_increment_ratio > DIVERGING_RATIO:
            return "diverging"
        if self.last_increment_ratio < BOUNDED_RATIO:
            return "bounded"
        return "inconclusive"


@dataclass
class RegularityReport:
    N: int
    critical_p: float
    p0: float
    trends: list[NormTrend]
    verdict: str
    distances: list[float] = field(default_factory=list)

    def trend(self, p: float) -> NormTrend:
        return min(self.trends, key=lambda tr: abs(tr.p - p))

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "critical_p": self.critical_p,
            "p0": self.p0,
            "verdict": self.verdict,
            "checkpoint_distances": self.distances,
            "trends": [
                {"p": tr.p, "growth": tr.growth, "last_increment_ratio": tr.last_increment_ratio,
                 "integral_ratio": tr.integral_ratio, "status": tr.status,
                 "first": float(tr.norms[0]), "last": float(tr.norms[-1])}
                for tr in self.trends
            ],
        }


def _increment_ratio(logd: np.ndarray, vals: np.ndarray, at: np.ndarray) -> float:
    """(v(at2) - v(at1)) / (v(at1) - v(at0)) with v interpolated in log distance."""
    order = np.argsort(logd)
    v = np.interp(at, logd[order], vals[order])
    prev = v[1] - v[0]
    if prev <= 0:
        return float("inf") if v[2] > v[1] else 0.0
    return float((v[2] - v[1]) / prev)


def regularity_diagnostic(b: Branch, N: int | None = None) -> RegularityReport:
    """L^p trend of (1 - u_lam)^-2 toward lam*.

    The norms are read off at three distances to the upper bracket,
    d_last * 100^k for k = 2, 1, 0 (linear interpolation in log d), and the
    last-increment ratio compares the two increments.  A square-root type
    approach to a bounded limit gives about 0.1; a power-law blow-up gives
    more than 1.  ``integral_ratio`` is the same ratio for the integral
    int (1-u)^-2p itself, which tends to 1 for a logarithmic divergence.
    """
    if len(b.points) < 5:
        raise ValueError("branch too short for a trend (need at least 5 points)")
    N = b.grid.dim if N is None else int(N)
    crit = 3 * N / 4
    ps = [2.0, crit, 0.99 * P0, 1.01 * P0]
    ps = sorted(set(p for p in ps if p >= 1))
    dist = b.bracket[1] - b.lambdas
    logd = np.log(dist)
    at = logd[-1] + np.log(CHECKPOINT_FACTOR) * np.array([2.0, 1.0, 0.0])
    at = np.minimum(at, logd[0])
    trends = []
    for p in ps:
        ints = np.array([nodal_integral(b.grid, forcing(pt.u.values) ** p) for pt in b.points])
        norms = ints ** (1.0 / p)
        trends.append(NormTrend(p, norms, float(norms[-1] / norms[0]),
                                _increment_ratio(logd, norms, at), _increment_ratio(logd, ints, at)))
    crit_trend = min(trends, key=lambda tr: abs(tr.p - crit))
    if N < 3:
        verdict = "no verdict (N < 3)"
    elif crit_trend.status == "diverging":
        verdict = "singular trend"
    elif crit < P0 and crit_trend.status == "bounded":
        verdict = "regular regime"
    else:
        verdict = "inconclusive"
    return RegularityReport(N, crit, P0, trends, verdict, [float(x) for x in np.exp(at)])


def rho_of(u: np.ndarray, lam: float, g: Grid) -> np.ndarray:
    rho = np.zeros(g.size)
    rho[g.interior] = stability_potential(u[g.interior], lam)
    return rho


# --------------------------------------------------------------------------
# sweeps and export

SWEEP_COLUMNS = ("beta", "t", "lambda", "lhs", "rhs", "slack", "Lambda_sup", "Lambda_cap", "H")


def estimate_sweep(b: Branch, d: Decomposition, betas, fractions, tol: float = 1e-8) -> list[EstimateReport]:
    """main_estimate_check at every branch point and every (beta, t = f * t_max(beta))."""
    out = []
    for pt in b.points:
        phi = linearized_stability(b.grid, b.c, pt.u, pt.lam, tol).phi
        for beta in betas:
            for f in fractions:
                out.append(main_estimate_check(b.grid, d, pt.u, pt.lam, beta, f * t_max(beta), phi=phi))
    return out


def sweep_rows(reports: list[EstimateReport]) -> list[tuple]:
    return [(r.beta, r.t, r.lam, r.lhs, r.rhs, r.slack, r.lambda_sup, r.lambda_cap, r.H_value)
            for r in reports]


def to_csv(reports: list[EstimateReport]) -> str:
    lines = [",".join(SWEEP_COLUMNS)]
    lines += [",".join(format(float(x), ".17g") for x in row) for row in sweep_rows(reports)]
    return "\n".join(lines) + "\n"


def report_json(r: EstimateReport) -> dict:
    return {
        "beta": r.beta, "t": r.t, "lambda": r.lam, "lhs": r.lhs, "rhs_terms": list(r.rhs_terms),
        "slack": r.slack, "coefficient": r.coefficient, "Lambda_sup": r.lambda_sup,
        "Lambda_cap": r.lambda_cap, "H": r.H_value, "H_bound": r.H_bound, "passed": r.passed(),
    }
