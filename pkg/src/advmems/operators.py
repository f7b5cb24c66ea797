"""Sparse assembly of the elliptic operators.

All second-order parts use the same control-volume stencil

    (-div(w grad u))_i ~ (1 / V_i) * sum_faces area_f * w_f * (u_i - u_j) / h_f

with face weights ``w_f`` the arithmetic mean of nodal values.  On tensor
grids this is the usual (-1, 2, -1)/h^2 stencil; on radial grids it is the
shell-volume form of ``-u'' - (N-1)/r u'`` whose r = 0 row is the symmetric
limit ``-N u''(0)``.  First-order terms are centered differences guarded by a
mesh-Peclet bound.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Field, Grid, VectorField, face_mean

PECLET_MAX = 1.0


class PecletError(ValueError):
    pass


@dataclass(eq=False)
class OperatorMatrix:
    matrix: sp.csr_matrix
    bc: str
    grid: Grid
    _lu: object = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.bc not in ("dirichlet", "flux"):
            raise ValueError(f"unknown boundary tag {self.bc!r}")
        self.matrix = sp.csr_matrix(self.matrix)

    def __matmul__(self, v):
        return self.matrix @ np.asarray(v, dtype=float)

    def apply(self, f: Field) -> Field:
        return Field(self.grid, self.matrix @ f.values)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        with self._lock:
            if self._lu is None:
                self._lu = spla.splu(self.matrix.tocsc())
        return self._lu.solve(np.asarray(rhs, dtype=float))

    def norm_inf(self) -> float:
        return float(abs(self.matrix).sum(axis=1).max())

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def _values(x, g: Grid, ncomp: int | None = None) -> np.ndarray:
    if x is None:
        return np.zeros(g.size) if ncomp is None else np.zeros((g.size, ncomp))
    if isinstance(x, (Field, VectorField)):
        if x.grid != g:
            raise ValueError("coefficient lives on a different grid")
        return x.values
    arr = np.asarray(x, dtype=float)
    if ncomp is not None and arr.ndim == 1:
        arr = arr[:, None]
    return arr


def check_peclet(g: Grid, c: np.ndarray, name: str = "c") -> None:
    """Enforce h * max|c_axis| / 2 <= 1 along every axis."""
    for k, h in enumerate(g.spacing):
        pe = h * float(np.max(np.abs(c[:, k]))) / 2 if c.size else 0.0
        if pe > PECLET_MAX:
            raise PecletError(
                f"mesh-Peclet number {pe:.3g} exceeds {PECLET_MAX} for {name} along axis {k}; "
                f"refine m or reduce |{name}|"
            )


def _check_vector(g: Grid, c: np.ndarray, name: str) -> None:
    if c.shape != (g.size, g.ncomp):
        raise ValueError(f"{name} must have {g.ncomp} component(s) on a {g.kind} grid")


def _diffusion_triplets(g: Grid, w: np.ndarray | None):
    """COO triplets of -div(w grad .) on all nodes (rows later masked)."""
    F = g.faces
    wf = np.ones(len(F)) if w is None else face_mean(g, w)
    k = F.area * wf / F.h
    rows = np.concatenate([F.left, F.right, F.left, F.right])
    cols = np.concatenate([F.left, F.right, F.right, F.left])
    vals = np.concatenate([k, k, -k, -k]) / g.weights[rows]
    return rows, cols, vals


def _advection_triplets(g: Grid, c: np.ndarray, scale: np.ndarray | None = None):
    """Centered c . grad at interior nodes (radial symmetry node excluded)."""
    rows, cols, vals = [], [], []
    interior = g.interior
    strides = (g.shape[1], 1) if g.kind == "rectangle" else (1,)
    for k, h in enumerate(g.spacing):
        coef = c[interior, k] / (2 * h)
        if scale is not None:
            coef = coef * scale[interior]
        s = strides[k]
        rows += [interior, interior]
        cols += [interior + s, interior - s]
        vals += [coef, -coef]
    rows, cols, vals = (np.concatenate(a) for a in (rows, cols, vals))
    if g.symmetry is not None:
        keep = rows != g.symmetry
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    return rows, cols, vals


def _dirichlet(g: Grid, rows, cols, vals, diag) -> sp.csr_matrix:
    keep = ~g.is_boundary[rows]
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    interior = g.interior
    d = np.zeros(g.size)
    d[interior] = diag[interior]
    d[g.boundary] = 1.0
    n = g.size
    M = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)) + sp.diags(d)
    M = sp.csr_matrix(M)
    M.sum_duplicates()
    M.eliminate_zeros()
    return M


def assemble_advection_diffusion(g: Grid, c=None, rho=None) -> OperatorMatrix:
    """Discrete -Laplace + c . grad - rho with identity rows on the boundary."""
    cv = _values(c, g, g.ncomp)
    _check_vector(g, cv, "c")
    check_peclet(g, cv, "c")
    rv = _values(rho, g)
    r1, c1, v1 = _diffusion_triplets(g, None)
    r2, c2, v2 = _advection_triplets(g, cv)
    M = _dirichlet(g, np.concatenate([r1, r2]), np.concatenate([c1, c2]),
                   np.concatenate([v1, v2]), -rv)
    return OperatorMatrix(M, "dirichlet", g)


def assemble_weighted_form(g: Grid, gamma, a=None, rho=None) -> OperatorMatrix:
    """Discrete -div(e^gamma grad u) + e^gamma a . grad u - e^gamma rho u (Dirichlet rows)."""
    w = np.exp(_values(gamma, g))
    av = _values(a, g, g.ncomp)
    _check_vector(g, av, "a")
    check_peclet(g, av, "a")
    rv = _values(rho, g)
    r1, c1, v1 = _diffusion_triplets(g, w)
    r2, c2, v2 = _advection_triplets(g, av, scale=w)
    M = _dirichlet(g, np.concatenate([r1, r2]), np.concatenate([c1, c2]),
                   np.concatenate([v1, v2]), -w * rv)
    return OperatorMatrix(M, "dirichlet", g)


def face_advection(g: Grid, c: np.ndarray) -> np.ndarray:
    """Normal component of c on every face (face mean of the axis component)."""
    F = g.faces
    return 0.5 * (c[F.left, F.axis] + c[F.right, F.axis])


def assemble_kr_generator(g: Grid, c=None) -> OperatorMatrix:
    """Conservative discretization of alpha -> div(grad alpha + alpha c).

    The flux ``(alpha_j - alpha_i)/h + c_f (alpha_i + alpha_j)/2`` lives on
    interior faces; boundary faces carry no flux, which is the discrete form
    of ``(grad alpha + alpha c) . n = 0``.
    """
    cv = _values(c, g, g.ncomp)
    _check_vector(g, cv, "c")
    check_peclet(g, cv, "c")
    F = g.faces
    cf = face_advection(g, cv)
    # flux_f = kl * alpha_left + kr * alpha_right
    kl = F.area * (-1.0 / F.h + cf / 2)
    kr = F.area * (1.0 / F.h + cf / 2)
    # row left gains +flux, row right loses it
    rows = np.concatenate([F.left, F.left, F.right, F.right])
    cols = np.concatenate([F.left, F.right, F.left, F.right])
    vals = np.concatenate([kl, kr, -kl, -kr]) / g.weights[rows]
    n = g.size
    M = sp.csr_matrix(sp.coo_matrix((vals, (rows, cols)), shape=(n, n)))
    M.sum_duplicates()
    return OperatorMatrix(M, "flux", g)


def kr_face_flux(g: Grid, c: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Face flux of grad alpha + alpha c used by the generator."""
    F = g.faces
    cf = face_advection(g, c)
    return (alpha[F.right] - alpha[F.left]) / F.h + cf * 0.5 * (alpha[F.left] + alpha[F.right])
