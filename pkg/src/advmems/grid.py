"""Uniform grids, nodal quadrature and discrete differential primitives.

Three domain kinds are supported:

* ``interval``   -- [a, b] in one dimension,
* ``radial``     -- the unit ball in R^N described by r in [0, 1], with a
  symmetry node at r = 0 and the Dirichlet boundary at r = 1,
* ``rectangle``  -- [x0, x1] x [y0, y1].

Quadrature weights are control-volume measures: the trapezoid weights on
tensor grids and the exact shell volumes ``omega_{N-1} / N * (r_+^N - r_-^N)``
on radial grids.  Face data (``Faces``) describes the staggered dual mesh
used by the conservative flux stencils in :mod:`advmems.operators`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

KINDS = ("interval", "radial", "rectangle")
MAX_DIM = 10


def sphere_measure(N: int) -> float:
    """Surface measure of the unit sphere in R^N (``omega_0 = 2``)."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


@dataclass(frozen=True)
class Faces:
    """Staggered faces joining neighbouring nodes ``left -> right``.

    ``area`` is the face measure (so ``area * flux`` is the transported
    amount) and ``h`` the node distance; ``area * h`` is the dual-cell volume
    attached to the face.
    """

    left: np.ndarray
    right: np.ndarray
    axis: np.ndarray
    h: np.ndarray
    area: np.ndarray

    @property
    def volume(self) -> np.ndarray:
        return self.area * self.h

    def __len__(self) -> int:
        return len(self.left)


@dataclass(frozen=True, eq=False)
class Grid:
    kind: str
    dim: int
    axes: tuple[np.ndarray, ...]
    spacing: tuple[float, ...]
    weights: np.ndarray
    boundary: np.ndarray
    normals: np.ndarray
    symmetry: int | None = None
    faces: Faces = field(repr=False, default=None)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def ncomp(self) -> int:
        """Number of vector-field components on this grid."""
        return 2 if self.kind == "rectangle" else 1

    @property
    def h(self) -> float:
        return max(self.spacing)

    @property
    def interior(self) -> np.ndarray:
        mask = np.ones(self.size, dtype=bool)
        mask[self.boundary] = False
        return np.flatnonzero(mask)

    @property
    def is_boundary(self) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        mask[self.boundary] = True
        return mask

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def coords(self) -> dict[str, np.ndarray]:
        """Nodal coordinates keyed by the variable names legal on this grid."""
        if self.kind == "rectangle":
            X, Y = np.meshgrid(*self.axes, indexing="ij")
            return {"x": X.ravel(), "y": Y.ravel()}
        if self.kind == "interval":
            return {"x": self.axes[0].copy(), "r": self.axes[0].copy()}
        return {"r": self.axes[0].copy()}

    def key(self) -> tuple:
        return (self.kind, self.dim, self.shape,
                tuple((float(a[0]), float(a[-1])) for a in self.axes))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Grid) and (self is other or self.key() == other.key())

    def __hash__(self) -> int:
        return hash(self.key())

    # convenience constructors for grid functions
    def field(self, values) -> "Field":
        return Field(self, values)

    def vector_field(self, values) -> "VectorField":
        return VectorField(self, values)

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.size))

    def sample(self, fn: Callable[..., np.ndarray]) -> "Field":
        """Evaluate ``fn(**coords)`` at the nodes."""
        vals = np.broadcast_to(np.asarray(fn(**self.coords()), dtype=float), (self.size,))
        return Field(self, vals.copy())


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.grid.size:
            raise ValueError(f"field has {v.size} values, grid has {self.grid.size} nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        d = self.grid.ncomp
        v = np.array(self.values, dtype=float)
        if v.ndim == 1 and d == 1:
            v = v[:, None]
        if v.shape != (self.grid.size, d):
            raise ValueError(f"vector field must have shape {(self.grid.size, d)}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("vector field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def norm(self) -> np.ndarray:
        """Pointwise Euclidean length."""
        return np.sqrt(np.sum(self.values**2, axis=1))

    def sup(self) -> float:
        return float(self.norm().max())


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, (Field, VectorField)) else np.asarray(f, dtype=float)


def _axis_nodes(lo: float, hi: float, m: int) -> tuple[np.ndarray, float]:
    x = np.linspace(lo, hi, m)
    return x, (hi - lo) / (m - 1)


def _trapezoid(m: int, h: float) -> np.ndarray:
    w = np.full(m, h)
    w[0] = w[-1] = h / 2
    return w


def build_grid(kind: str, N: int | None = None, m: int = 65,
               bounds: Sequence | None = None) -> Grid:
    """Build a uniform grid of the requested kind.

    ``m`` is the number of nodes per axis.  ``bounds`` is ``(a, b)`` for an
    interval, ``((x0, x1), (y0, y1))`` for a rectangle, and must be omitted or
    ``(0, 1)`` for the radial ball.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown grid kind {kind!r}; expected one of {KINDS}")
    if N is None:
        N = {"interval": 1, "rectangle": 2}.get(kind)
        if N is None:
            raise ValueError("radial grids need the ambient dimension N")
    if not (isinstance(N, (int, np.integer)) and 1 <= N <= MAX_DIM):
        raise ValueError(f"ambient dimension N must be an integer in [1, {MAX_DIM}], got {N!r}")
    if kind == "interval" and N != 1:
        raise ValueError("interval grids have N = 1")
    if kind == "radial" and N == 1:
        raise ValueError("N = 1 is the interval kind; radial grids need N >= 2")
    if kind == "rectangle" and N != 2:
        raise ValueError("rectangle grids have N = 2")
    m = int(m)

    if kind == "rectangle":
        if m < 9 or m % 2 == 0:
            raise ValueError(f"rectangle grids need m >= 9 and odd, got m = {m}")
        if bounds is None:
            bounds = ((0.0, 1.0), (0.0, 1.0))
        (x0, x1), (y0, y1) = bounds
        _check_bounds(x0, x1)
        _check_bounds(y0, y1)
        x, hx = _axis_nodes(x0, x1, m)
        y, hy = _axis_nodes(y0, y1, m)
        w = np.outer(_trapezoid(m, hx), _trapezoid(m, hy)).ravel()
        I, J = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        I, J = I.ravel(), J.ravel()
        nx = np.where(I == 0, -1.0, np.where(I == m - 1, 1.0, 0.0))
        ny = np.where(J == 0, -1.0, np.where(J == m - 1, 1.0, 0.0))
        bnd = np.flatnonzero((nx != 0) | (ny != 0))
        nrm = np.stack([nx[bnd], ny[bnd]], axis=1)
        nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
        faces = _rect_faces(m, hx, hy)
        return Grid(kind, 2, (x, y), (hx, hy), w, bnd, nrm, None, faces)

    if m < 3:
        raise ValueError(f"{kind} grids need m >= 3, got m = {m}")
    if kind == "interval":
        a, b = (0.0, 1.0) if bounds is None else bounds
        _check_bounds(a, b)
        x, h = _axis_nodes(a, b, m)
        faces = Faces(np.arange(m - 1), np.arange(1, m), np.zeros(m - 1, dtype=int),
                      np.full(m - 1, h), np.ones(m - 1))
        return Grid(kind, 1, (x,), (h,), _trapezoid(m, h), np.array([0, m - 1]),
                    np.array([[-1.0], [1.0]]), None, faces)

    if bounds is not None and tuple(map(float, bounds)) != (0.0, 1.0):
        raise ValueError("radial grids describe the unit ball; bounds must be (0, 1)")
    r, h = _axis_nodes(0.0, 1.0, m)
    om = sphere_measure(N)
    lo = np.clip(r - h / 2, 0.0, 1.0)
    hi = np.clip(r + h / 2, 0.0, 1.0)
    w = om / N * (hi**N - lo**N)
    rf = (r[:-1] + r[1:]) / 2
    faces = Faces(np.arange(m - 1), np.arange(1, m), np.zeros(m - 1, dtype=int),
                  np.full(m - 1, h), om * rf ** (N - 1))
    return Grid(kind, N, (r,), (h,), w, np.array([m - 1]), np.array([[1.0]]), 0, faces)


def _check_bounds(lo, hi):
    if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
        raise ValueError(f"bounds must be increasing, got ({lo}, {hi})")


def _rect_faces(m: int, hx: float, hy: float) -> Faces:
    idx = np.arange(m * m).reshape(m, m)
    # x-faces: (i, j) -> (i+1, j); half area on the y = const boundary lines
    lx, rx = idx[:-1, :].ravel(), idx[1:, :].ravel()
    ax = np.full((m - 1, m), hy)
    ax[:, [0, -1]] = hy / 2
    ly, ry = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    ay = np.full((m, m - 1), hx)
    ay[[0, -1], :] = hx / 2
    n = (m - 1) * m
    return Faces(
        np.concatenate([lx, ly]),
        np.concatenate([rx, ry]),
        np.concatenate([np.zeros(n, dtype=int), np.ones(n, dtype=int)]),
        np.concatenate([np.full(n, hx), np.full(n, hy)]),
        np.concatenate([ax.ravel(), ay.ravel()]),
    )


def integrate(f, w=None) -> float:
    """Quadrature of ``f`` (optionally times the weight field ``w``)."""
    if not isinstance(f, Field):
        raise TypeError("integrate expects a Field")
    vals = f.values
    if w is not None:
        if not isinstance(w, Field):
            raise TypeError("weight must be a Field")
        if w.grid != f.grid:
            raise ValueError("integrand and weight live on different grids")
        vals = vals * w.values
    return float(np.dot(f.grid.weights, vals))


def nodal_integral(g: Grid, vals: np.ndarray) -> float:
    """Array-level quadrature used inside the numerical modules."""
    return float(np.dot(g.weights, vals))


def lp_norm(g: Grid, vals: np.ndarray, p: float) -> float:
    return nodal_integral(g, np.abs(vals) ** p) ** (1.0 / p)


def gradient_array(g: Grid, f: np.ndarray) -> np.ndarray:
    """Centered differences inside, second-order one-sided at the edges."""
    f = np.asarray(f, dtype=float)
    if g.kind == "rectangle":
        F = f.reshape(g.shape)
        gx = np.gradient(F, g.spacing[0], axis=0, edge_order=2)
        gy = np.gradient(F, g.spacing[1], axis=1, edge_order=2)
        return np.stack([gx.ravel(), gy.ravel()], axis=1)
    d = np.gradient(f, g.spacing[0], edge_order=2)
    if g.symmetry is not None:
        d[g.symmetry] = 0.0
    return d[:, None]


def discrete_gradient(f: Field) -> VectorField:
    return VectorField(f.grid, gradient_array(f.grid, f.values))


def face_difference(g: Grid, f: np.ndarray) -> np.ndarray:
    """Difference quotient ``(f_right - f_left) / h`` on every face."""
    F = g.faces
    return (f[F.right] - f[F.left]) / F.h


def face_mean(g: Grid, f: np.ndarray) -> np.ndarray:
    F = g.faces
    return 0.5 * (f[F.left] + f[F.right])


def face_divergence(g: Grid, flux: np.ndarray) -> np.ndarray:
    """Net outflow per control volume of a face flux (oriented left -> right)."""
    F = g.faces
    q = F.area * flux
    out = np.bincount(F.left, weights=q, minlength=g.size)
    out -= np.bincount(F.right, weights=q, minlength=g.size)
    return out / g.weights


def dirichlet_energy(g: Grid, f: np.ndarray, w: np.ndarray | None = None) -> float:
    """Staggered quadrature of ``int w |grad f|^2`` (face differences, face-mean weight)."""
    F = g.faces
    df = face_difference(g, f)
    wf = 1.0 if w is None else face_mean(g, w)
    return float(np.sum(F.volume * wf * df**2))
