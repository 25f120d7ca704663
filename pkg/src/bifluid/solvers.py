"""The three linear elliptic sub-solves behind the fixed-point map.

Each solve is matrix-free: a stencil kernel supplies the operator action and
its diagonal, and a Jacobi-preconditioned Krylov iteration (conjugate
gradients for symmetric positive operators, stabilized biconjugate gradients
otherwise) drives the residual below rel_tol * ||b||.  Solves are pure:
identical inputs (including the initial guess) give bitwise identical output.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DomainError, NonconvergenceError
from .grid import Field, Grid, VectorField, same_grid
from .model import ViscosityMatrices
from .operators import face_means

__all__ = [
    "LinearSolveSpec",
    "SolveStats",
    "solve_continuity",
    "solve_lame",
    "solve_robin",
]


@dataclass(frozen=True)
class LinearSolveSpec:
    """Targets for one linear solve."""

    rel_tol: float = 1e-10
    max_iters: int = 5000
    method: str = "auto"  # auto | symmetric-positive | general

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.method not in ("auto", "symmetric-positive", "general"):
            raise ValueError(f"unknown method hint {self.method!r}")


@dataclass
class SolveStats:
    method: str
    iterations: int
    rel_residual: float
    converged: bool
    condition_warning: bool = False


def _norm(v: np.ndarray) -> float:
    return math.sqrt(float(np.dot(v, v)))


def _cg(apply_a, b, diag, spec: LinearSolveSpec, x0=None):
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else x0.copy()
    bnorm = _norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveStats("cg", 0, 0.0, True)
    target = spec.rel_tol * bnorm
    inv_diag = 1.0 / diag
    iters = 0
    for _restart in range(2):
        r = b - apply_a(x) if (x0 is not None or _restart) else b.copy()
        if _norm(r) <= target:
            break
        z = r * inv_diag
        p = z.copy()
        rz = float(np.dot(r, z))
        while iters < spec.max_iters:
            ap = apply_a(p)
            alpha = rz / float(np.dot(p, ap))
            x = x + alpha * p
            r = r - alpha * ap
            iters += 1
            if _norm(r) <= target:
                break
            z = r * inv_diag
            rz_new = float(np.dot(r, z))
            p = z + (rz_new / rz) * p
            rz = rz_new
        # loop again only if the recursive residual drifted from the true one
        if _norm(b - apply_a(x)) <= target or iters >= spec.max_iters:
            break
    res = _norm(b - apply_a(x)) / bnorm
    return x, SolveStats("cg", iters, res, res <= spec.rel_tol)


def _bicgstab(apply_a, b, diag, spec: LinearSolveSpec, x0=None):
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else x0.copy()
    bnorm = _norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveStats("bicgstab", 0, 0.0, True)
    target = spec.rel_tol * bnorm
    inv_diag = 1.0 / diag
    iters = 0
    for _restart in range(3):
        r = b - apply_a(x) if (x0 is not None or _restart) else b.copy()
        if _norm(r) <= target:
            break
        r0 = r.copy()
        rho = alpha = omega = 1.0
        v = np.zeros(n)
        p = np.zeros(n)
        while iters < spec.max_iters and _norm(r) > target:
            rho_new = float(np.dot(r0, r))
            if rho_new == 0.0 or omega == 0.0:
                # breakdown: restart the recurrences from the current iterate
                r = b - apply_a(x)
                r0 = r.copy()
                rho = alpha = omega = 1.0
                v[:] = 0.0
                p[:] = 0.0
                rho_new = float(np.dot(r0, r))
                if rho_new == 0.0:
                    break
            beta = (rho_new / rho) * (alpha / omega)
            p = r + beta * (p - omega * v)
            ph = p * inv_diag
            v = apply_a(ph)
            alpha = rho_new / float(np.dot(r0, v))
            s = r - alpha * v
            iters += 1
            if _norm(s) <= target:
                x = x + alpha * ph
                r = s
                rho = rho_new
                break
            sh = s * inv_diag
            t = apply_a(sh)
            tt = float(np.dot(t, t))
            omega = float(np.dot(t, s)) / tt if tt > 0.0 else 0.0
            x = x + alpha * ph + omega * sh
            r = s - omega * t
            rho = rho_new
        # loop again only if the recursive residual drifted from the true one
        if _norm(b - apply_a(x)) <= target or iters >= spec.max_iters:
            break
    res = _norm(b - apply_a(x)) / bnorm
    return x, SolveStats("bicgstab", iters, res, res <= spec.rel_tol)


def _solve(apply_a, b, diag, spec, symmetric, x0):
    method = spec.method
    if method == "auto":
        method = "symmetric-positive" if symmetric else "general"
    if method == "symmetric-positive":
        return _cg(apply_a, b, diag, spec, x0)
    return _bicgstab(apply_a, b, diag, spec, x0)


def _geometry(grid: Grid):
    inv_h = tuple(1.0 / s for s in grid.h)
    inv_h2 = tuple(ih * ih for ih in inv_h)
    return inv_h, inv_h2


# -- regularized continuity ----------------------------------------------------


def solve_continuity(w: VectorField, eps: float, mass: float,
                     spec: LinearSolveSpec = LinearSolveSpec(),
                     source: Field | None = None,
                     guess: Field | None = None) -> tuple[Field, SolveStats]:
    """Density from one transport field under the elliptic regularization.

    Solves -eps*lap r + div_upwind(r w) + eps*r = eps*mass/|domain| with the
    zero-normal-derivative ghost policy.  The conservative upwind flux makes
    the discrete operator an M-matrix, so r >= 0, and the mass identity
    integral(r) = mass holds up to the linear-solve residual.  `source` adds
    a manufactured right-hand side for verification runs.
    """
    if eps <= 0:
        raise DomainError("regularization parameter must be positive")
    grid = w.grid
    inv_h, inv_h2 = _geometry(grid)
    wfaces = tuple(face_means(w.values[ax], ax, "zero") for ax in range(grid.dim))

    def apply_a(x):
        shaped = x.reshape(grid.cells)
        return _kernels.continuity_apply(shaped, wfaces, eps, inv_h, inv_h2).reshape(-1)

    b = np.full(grid.cells, eps * mass / grid.volume)
    if source is not None:
        same_grid(w, source)
        b = b + source.values
    diag = _kernels.continuity_diag(wfaces, eps, inv_h, inv_h2, grid.cells)
    x0 = None if guess is None else guess.values.reshape(-1)
    x, stats = _solve(apply_a, b.reshape(-1), diag.reshape(-1), spec,
                      symmetric=False, x0=x0)
    if not stats.converged:
        raise NonconvergenceError(
            f"continuity solve stopped at rel residual {stats.rel_residual:.3e} "
            f"after {stats.iterations} iterations", stats)
    return Field(grid, x.reshape(grid.cells)), stats


# -- coupled Lame system ---------------------------------------------------------


def solve_lame(g1: VectorField, g2: VectorField, visc: ViscosityMatrices,
               spec: LinearSolveSpec = LinearSolveSpec(),
               guess: tuple[VectorField, VectorField] | None = None,
               ) -> tuple[tuple[VectorField, VectorField], SolveStats]:
    """Velocity pair solving the coupled viscous block system.

    Assembled and solved as one block system with homogeneous Dirichlet
    values; the off-diagonal viscosities couple the two momentum rows.
    """
    if visc.c0 <= 0 or not visc.shear_positive_definite():
        raise DomainError("viscosity matrices are inadmissible (no coercivity)")
    grid = same_grid(g1, g2)
    inv_h, inv_h2 = _geometry(grid)
    lpm = np.ascontiguousarray(visc.lam + visc.mu)
    mu = np.ascontiguousarray(visc.mu)
    shape = (2, grid.dim) + grid.cells

    def apply_a(x):
        return _kernels.lame_apply(x.reshape(shape), lpm, mu, inv_h, inv_h2).reshape(-1)

    b = np.stack([g1.values, g2.values]).reshape(-1)
    diag = _kernels.lame_diag(lpm, mu, inv_h2, grid.cells).reshape(-1)
    x0 = None
    if guess is not None:
        x0 = np.stack([guess[0].values, guess[1].values]).reshape(-1)
    x, stats = _solve(apply_a, b, diag, spec, symmetric=visc.is_symmetric, x0=x0)
    if not stats.converged:
        raise NonconvergenceError(
            f"coupled viscous solve stopped at rel residual {stats.rel_residual:.3e} "
            f"after {stats.iterations} iterations", stats)
    out = x.reshape(shape)
    return (VectorField(grid, out[0]), VectorField(grid, out[1])), stats


# -- Robin-coefficient scalar solve ---------------------------------------------


def robin_closure(grid: Grid, b: Field, eps: float):
    """Face coefficient arrays for the flux boundary closure.

    Eliminating the ghost value from (b dz/dn + eps*z) = t at a boundary face
    gives an outward flux (t - eps*z_cell) / (1 + eps*h/(2 b_f)); this returns
    the operator coefficients bc = eps*cf/h and the data weights cf/h per
    patch, along with interior face averages of b (boundary entries zeroed).
    """
    inv_h, _ = _geometry(grid)
    bfaces = []
    bc_lo, bc_hi, w_lo, w_hi = [], [], [], []
    for ax in range(grid.dim):
        bf = face_means(b.values, ax, "edge")
        n = grid.cells[ax]
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[ax] = 0
        hi[ax] = n
        b_lo = bf[tuple(lo)]
        b_hi = bf[tuple(hi)]
        cf_lo = 1.0 / (1.0 + eps * grid.h[ax] / (2.0 * b_lo))
        cf_hi = 1.0 / (1.0 + eps * grid.h[ax] / (2.0 * b_hi))
        bc_lo.append(eps * cf_lo * inv_h[ax])
        bc_hi.append(eps * cf_hi * inv_h[ax])
        w_lo.append(cf_lo * inv_h[ax])
        w_hi.append(cf_hi * inv_h[ax])
        bf = bf.copy()
        bf[tuple(lo)] = 0.0
        bf[tuple(hi)] = 0.0
        bfaces.append(bf)
    return tuple(bfaces), bc_lo, bc_hi, w_lo, w_hi


def split_boundary(grid: Grid, face_values: np.ndarray):
    """Canonical flat boundary array -> per-patch arrays (tangential shape)."""
    out = []
    ofs = 0
    for patch in grid.boundary_faces():
        n = patch.n_faces
        out.append(np.ascontiguousarray(
            face_values[ofs:ofs + n].reshape(patch.tangential_cells)))
        ofs += n
    return out


def solve_robin(d: Field, b: Field, t: np.ndarray, eps: float,
                spec: LinearSolveSpec = LinearSolveSpec(),
                guess: Field | None = None) -> tuple[Field, SolveStats]:
    """Scalar z with -div(b grad z) = d and face flux closure b dz/dn + eps*z = t.

    t is a flat boundary array in canonical patch order.  The operator is
    symmetric positive definite for b > 0 and eps > 0.
    """
    if eps <= 0:
        raise DomainError("boundary regularization must be positive")
    bmin = float(b.values.min())
    if bmin <= 0:
        raise DomainError("diffusion coefficient must be strictly positive")
    grid = same_grid(d, b)
    inv_h, inv_h2 = _geometry(grid)
    bfaces, bc_lo, bc_hi, w_lo, w_hi = robin_closure(grid, b, eps)

    cond_warn = False
    bmax = float(b.values.max())
    if bmax / bmin > 1e12 or bmax > 1e150:
        warnings.warn(
            f"robin coefficient spread {bmax:.3e}/{bmin:.3e} may destroy "
            "conditioning", RuntimeWarning)
        cond_warn = True

    def apply_a(x):
        shaped = x.reshape(grid.cells)
        return _kernels.robin_apply(shaped, bfaces, bc_lo, bc_hi, inv_h2).reshape(-1)

    rhs = d.values.copy()
    patches = split_boundary(grid, t)
    idx = 0
    for ax in range(grid.dim):
        for side in (0, 1):
            tvals = patches[idx]
            sl = [slice(None)] * grid.dim
            sl[ax] = 0 if side == 0 else grid.cells[ax] - 1
            weight = w_lo[ax] if side == 0 else w_hi[ax]
            rhs[tuple(sl)] += weight * tvals
            idx += 1

    diag = _kernels.robin_diag(bfaces, bc_lo, bc_hi, inv_h2, grid.cells)
    x0 = None if guess is None else guess.values.reshape(-1)
    x, stats = _solve(apply_a, rhs.reshape(-1), diag.reshape(-1), spec,
                      symmetric=True, x0=x0)
    stats.condition_warning = cond_warn
    if not stats.converged:
        raise NonconvergenceError(
            f"robin solve stopped at rel residual {stats.rel_residual:.3e} "
            f"after {stats.iterations} iterations", stats)
    return Field(grid, x.reshape(grid.cells)), stats
