"""Principal eigenpairs of Dirichlet operators by shifted inverse iteration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Field, Grid
from .operators import OperatorMatrix, _values, assemble_advection_diffusion, assemble_weighted_form

ROUNDOFF = 16 * np.finfo(float).eps
MAX_ITER = 500


class EigenError(RuntimeError):
    pass


@dataclass(frozen=True)
class EigenPair:
    phi: Field
    K: float
    residual: float
    iterations: int


def gershgorin_lower(A: sp.spmatrix) -> float:
    A = sp.csr_matrix(A)
    d = A.diagonal()
    off = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(d)
    return float(np.min(d - off))


def principal_eigenpair(M: OperatorMatrix, tol: float = 1e-8, max_iter: int = MAX_ITER) -> EigenPair:
    """Smallest-real-part eigenpair of a Dirichlet operator on the interior nodes.

    The shift starts one unit below the Gershgorin bound and is moved to just
    below the current eigenvalue estimate once the residual is small, so the
    iteration keeps targeting the principal eigenvalue.  The eigenvalue is the
    quadrature-weighted Rayleigh quotient; convergence is ``||L phi - K phi||_inf
    <= max(tol, 16 eps ||L||_inf)`` for ``max phi = 1``.
    """
    if M.bc != "dirichlet":
        raise ValueError("principal_eigenpair needs a Dirichlet-tagged operator")
    if not (0 < tol <= 1e-8):
        raise ValueError(f"tol must lie in (0, 1e-8], got {tol}")
    g = M.grid
    idx = g.interior
    L = sp.csc_matrix(M.matrix[idx][:, idx])
    w = g.weights[idx]
    n = L.shape[0]
    I = sp.identity(n, format="csc")
    norm = float(abs(L).sum(axis=1).max())
    target = max(tol, ROUNDOFF * norm)

    sigma = gershgorin_lower(L) - 1.0
    lu = spla.splu(L - sigma * I)
    v = np.ones(n)
    K = np.nan
    res = np.inf
    for it in range(1, max_iter + 1):
        v = lu.solve(v)
        v /= v[np.argmax(np.abs(v))]
        Lv = L @ v
        K = float(np.dot(Lv, w * v) / np.dot(v, w * v))
        res = float(np.max(np.abs(Lv - K * v)))
        if res <= target:
            break
        gap = K - sigma
        if res <= 1e-2 * abs(gap) and gap > 1e-6 * (1 + abs(K)):
            # move the shift closer but keep it below the estimate
            sigma = K - max(1e-3 * gap, 1e-6 * (1 + abs(K)))
            lu = spla.splu(L - sigma * I)
    else:
        raise EigenError(f"inverse iteration did not converge in {max_iter} steps (residual {res:.3e})")
    if not np.all(v > 0):
        raise EigenError(
            f"principal eigenvector is not positive (min {v.min():.3e}); eigenvalue not isolated at this resolution"
        )
    phi = np.zeros(g.size)
    phi[idx] = v
    return EigenPair(Field(g, phi), K, res, it)


def stability_potential(u: np.ndarray, lam: float) -> np.ndarray:
    return 2.0 * lam / (1.0 - u) ** 3


def linearized_stability(g: Grid, c, u, lam: float, tol: float = 1e-8) -> EigenPair:
    """Principal pair of -Lap + c . grad - 2 lam / (1 - u)^3; K >= 0 is semi-stability."""
    uv = _values(u, g)
    rho = np.zeros(g.size)
    rho[g.interior] = stability_potential(uv[g.interior], lam)
    return principal_eigenpair(assemble_advection_diffusion(g, c, rho), tol)


def is_semistable(K: float, K0: float) -> bool:
    return K >= -1e-8 * abs(K0)


def attach_stability(branch, tol: float = 1e-8) -> list[EigenPair]:
    """Fill ``K`` on every branch point; returns the eigenpairs in branch order."""
    pairs = []
    for pt in branch.points:
        ep = linearized_stability(branch.grid, branch.c, pt.u, pt.lam, tol)
        pt.K = ep.K
        pairs.append(ep)
    return pairs


def weighted_selfadjoint_eigenvalue(g: Grid, gamma, rho=None) -> float:
    """Smallest K with -div(e^gamma grad phi) - e^gamma rho phi = K e^gamma phi.

    Solved as a symmetric generalized problem (stiffness from face fluxes,
    lumped mass e^gamma V) with ARPACK, independently of the inverse iteration.
    """
    gv = _values(gamma, g)
    wgt = np.exp(gv)
    M = assemble_weighted_form(g, gv, None, rho)
    idx = g.interior
    # rows of M are divided by the control volume; multiply back for symmetry
    S = sp.diags(g.weights[idx]) @ M.matrix[idx][:, idx]
    S = 0.5 * (S + S.T)
    B = sp.diags(g.weights[idx] * wgt[idx])
    vals = spla.eigsh(sp.csc_matrix(S), k=1, M=sp.csc_matrix(B), sigma=gershgorin_lower(
        sp.diags(1 / (g.weights[idx] * wgt[idx])) @ S) - 1.0, which="LM", return_eigenvectors=False)
    return float(np.min(vals))
