"""Finite-difference operators, quadrature, and norms on structured grids.

Second-order central stencils in the interior.  Boundary closure is chosen
per call through a ghost-cell policy:

  * ``dirichlet``   odd reflection (field value 0 on the face); use for
                    velocities and any zero-trace field,
  * ``neumann``     even reflection (zero normal derivative),
  * ``zero``        zero extension; first derivatives built with it form
                    exact negative-adjoint pairs under the midpoint inner
                    product, which the conservation checks rely on,
  * ``extrapolate`` linear extension for fields carrying no boundary data.

All reductions (integrals, norms) run through math.fsum, so they are exactly
associative: deterministic, backend-independent, and additive over disjoint
cell sets.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .errors import DomainError
from .grid import Field, Grid, TensorField, VectorField, same_grid
from .model import ViscosityMatrices

POLICIES = ("dirichlet", "neumann", "zero", "extrapolate")


def _pad(arr: np.ndarray, axis: int, policy: str) -> np.ndarray:
    lo = [slice(None)] * arr.ndim
    hi = [slice(None)] * arr.ndim
    nxt_lo = [slice(None)] * arr.ndim
    nxt_hi = [slice(None)] * arr.ndim
    n = arr.shape[axis]
    lo[axis] = slice(0, 1)
    hi[axis] = slice(n - 1, n)
    nxt_lo[axis] = slice(1, 2)
    nxt_hi[axis] = slice(n - 2, n - 1)
    first, last = arr[tuple(lo)], arr[tuple(hi)]
    if policy == "dirichlet":
        g_lo, g_hi = -first, -last
    elif policy == "neumann":
        g_lo, g_hi = first, last
    elif policy == "zero":
        g_lo, g_hi = np.zeros_like(first), np.zeros_like(last)
    elif policy == "extrapolate":
        g_lo = 2.0 * first - arr[tuple(nxt_lo)]
        g_hi = 2.0 * last - arr[tuple(nxt_hi)]
    else:
        raise ValueError(f"unknown ghost policy {policy!r}")
    return np.concatenate([g_lo, arr, g_hi], axis=axis)


def _mcp(padded, axis):
    nd = padded.ndim
    sm = [slice(None)] * nd
    sp = [slice(None)] * nd
    sm[axis] = slice(0, -2)
    sp[axis] = slice(2, None)
    return padded[tuple(sm)], padded[tuple(sp)]


def deriv(values: np.ndarray, axis: int, h: float, policy: str) -> np.ndarray:
    """Central difference of a cell array along one axis."""
    vm, vp = _mcp(_pad(values, axis, policy), axis)
    return (vp - vm) * (0.5 / h)


def second_deriv(values: np.ndarray, axis: int, h: float, policy: str) -> np.ndarray:
    vm, vp = _mcp(_pad(values, axis, policy), axis)
    return (vm - 2.0 * values + vp) / (h * h)


def gradient(field: Field, policy: str) -> VectorField:
    g = field.grid
    out = np.empty((g.dim,) + g.cells)
    for ax in range(g.dim):
        out[ax] = deriv(field.values, ax, g.h[ax], policy)
    return VectorField(g, out)


def divergence(vfield: VectorField, policy: str) -> Field:
    g = vfield.grid
    out = np.zeros(g.cells)
    for ax in range(g.dim):
        out += deriv(vfield.values[ax], ax, g.h[ax], policy)
    return Field(g, out)


def laplacian(field: Field, policy: str) -> Field:
    g = field.grid
    out = np.zeros(g.cells)
    for ax in range(g.dim):
        out += second_deriv(field.values, ax, g.h[ax], policy)
    return Field(g, out)


def grad_vector(vfield: VectorField, policy: str) -> TensorField:
    """Velocity gradient tensor G[k, l] = d u_l / d x_k."""
    g = vfield.grid
    out = np.empty((g.dim, g.dim) + g.cells)
    for k in range(g.dim):
        for l in range(g.dim):
            out[k, l] = deriv(vfield.values[l], k, g.h[k], policy)
    return TensorField(g, out)


def tensor_divergence(tfield: TensorField, policy: str) -> VectorField:
    """Row-wise divergence (div T)_k = sum_l d T[k, l] / d x_l."""
    g = tfield.grid
    out = np.zeros((g.dim,) + g.cells)
    for k in range(g.dim):
        for l in range(g.dim):
            out[k] += deriv(tfield.values[k, l], l, g.h[l], policy)
    return VectorField(g, out)


def diff(kind: str, field, policy: str):
    """Dispatch on the derivative kind; see the individual operators."""
    table = {
        "gradient": gradient,
        "divergence": divergence,
        "laplacian": laplacian,
        "tensor_divergence": tensor_divergence,
        "grad_vector": grad_vector,
    }
    if kind not in table:
        raise ValueError(f"unknown diff kind {kind!r}")
    return table[kind](field, policy)


def convect(w: VectorField, policy: str = "dirichlet") -> VectorField:
    """(w . grad) w with the given policy on the velocity."""
    g = w.grid
    gw = grad_vector(w, policy)
    out = np.zeros((g.dim,) + g.cells)
    for k in range(g.dim):
        for l in range(g.dim):
            out[k] += w.values[l] * gw.values[l, k]
    return VectorField(g, out)


# -- coupled viscous operator --------------------------------------------------


def _kernel_geometry(grid: Grid):
    inv_h = tuple(1.0 / s for s in grid.h)
    inv_h2 = tuple(ih * ih for ih in inv_h)
    return inv_h, inv_h2


def apply_lame_pair(u1: VectorField, u2: VectorField,
                    visc: ViscosityMatrices) -> tuple[VectorField, VectorField]:
    """Discrete coupled Lame action on both velocities at once.

    Built as gradT(lam+mu)div plus mu times the compact Dirichlet Laplacian;
    the divergence part is an exact Gram form, so with symmetric matrices the
    operator is symmetric positive definite and the coercivity bound holds
    with no mesh-dependent slack.
    """
    g = same_grid(u1, u2)
    inv_h, inv_h2 = _kernel_geometry(g)
    u = np.stack([u1.values, u2.values])
    out = _kernels.lame_apply(u, np.ascontiguousarray(visc.lam + visc.mu),
                              np.ascontiguousarray(visc.mu), inv_h, inv_h2)
    return VectorField(g, out[0]), VectorField(g, out[1])


def apply_lame(u1: VectorField, u2: VectorField, visc: ViscosityMatrices,
               i: int) -> VectorField:
    """Row i of the coupled viscous operator."""
    if i not in (1, 2):
        raise DomainError("component index must be 1 or 2")
    return apply_lame_pair(u1, u2, visc)[i - 1]


# -- quadrature and norms ------------------------------------------------------


def integrate(field: Field) -> float:
    return math.fsum(field.values.reshape(-1)) * field.grid.cell_volume


def integrate_values(grid: Grid, values: np.ndarray) -> float:
    return math.fsum(np.asarray(values, dtype=float).reshape(-1)) * grid.cell_volume


def lp_norm(field, p) -> float:
    """Midpoint-rule L_p norm; vector/tensor fields use pointwise magnitude."""
    if p < 1:
        raise DomainError("p must be at least 1")
    vals = field.values
    if isinstance(field, VectorField):
        mag_sq = np.sum(vals * vals, axis=0)
    elif isinstance(field, TensorField):
        mag_sq = np.sum(vals * vals, axis=(0, 1))
    else:
        mag_sq = vals * vals
    if math.isinf(p):
        return float(np.sqrt(mag_sq.max()))
    mag = np.sqrt(mag_sq)
    total = math.fsum((mag ** p).reshape(-1)) * field.grid.cell_volume
    return float(total ** (1.0 / p))


def h1_seminorm(vfield: VectorField, policy: str = "dirichlet") -> float:
    """L2 norm of the velocity gradient tensor."""
    gv = grad_vector(vfield, policy)
    total = math.fsum((gv.values ** 2).reshape(-1)) * vfield.grid.cell_volume
    return float(math.sqrt(total))


def w12_norm(vfield: VectorField, policy: str = "dirichlet") -> float:
    """Discrete H1 norm: sqrt of L2 squared plus seminorm squared."""
    a = lp_norm(vfield, 2)
    b = h1_seminorm(vfield, policy)
    return math.sqrt(a * a + b * b)


def scalar_w12_norm(field: Field, policy: str = "extrapolate") -> float:
    a = lp_norm(field, 2)
    b = lp_norm(gradient(field, policy), 2)
    return math.sqrt(a * a + b * b)


# -- boundary traces and integrals ---------------------------------------------


def boundary_trace(field: Field) -> np.ndarray:
    """Second-order extrapolated face values in canonical patch order."""
    g = field.grid
    pieces = []
    for patch in g.boundary_faces():
        sl1 = [slice(None)] * g.dim
        sl2 = [slice(None)] * g.dim
        n = g.cells[patch.axis]
        if patch.side == 0:
            sl1[patch.axis], sl2[patch.axis] = 0, 1
        else:
            sl1[patch.axis], sl2[patch.axis] = n - 1, n - 2
        vals = 0.5 * (3.0 * field.values[tuple(sl1)] - field.values[tuple(sl2)])
        pieces.append(vals.reshape(-1))
    return np.concatenate(pieces)


def boundary_integral(grid: Grid, face_values: np.ndarray) -> float:
    """Face-midpoint quadrature over the whole boundary (canonical order)."""
    face_values = np.asarray(face_values, dtype=float)
    if face_values.shape != (grid.n_boundary_faces,):
        raise ValueError("face value array does not match the boundary")
    total = 0.0
    ofs = 0
    for patch in grid.boundary_faces():
        n = patch.n_faces
        total += patch.face_area * math.fsum(face_values[ofs:ofs + n])
        ofs += n
    return total


def boundary_lp_norm(grid: Grid, face_values: np.ndarray, p: float) -> float:
    """L_p norm over the boundary with face-midpoint quadrature."""
    if math.isinf(p):
        return float(np.abs(face_values).max())
    total = boundary_integral(grid, np.abs(face_values) ** p)
    return float(total ** (1.0 / p))


def face_means(values: np.ndarray, axis: int, boundary: str) -> np.ndarray:
    """Arithmetic cell-to-face averages; boundary faces per flag.

    boundary='zero' stamps exact zeros on domain-boundary faces (impermeable
    wall); boundary='edge' copies the adjacent cell value.
    """
    nd = values.ndim
    a = [slice(None)] * nd
    b = [slice(None)] * nd
    a[axis] = slice(1, None)
    b[axis] = slice(0, -1)
    inner = 0.5 * (values[tuple(a)] + values[tuple(b)])
    lo = [slice(None)] * nd
    hi = [slice(None)] * nd
    lo[axis] = slice(0, 1)
    hi[axis] = slice(values.shape[axis] - 1, values.shape[axis])
    if boundary == "zero":
        first = np.zeros_like(values[tuple(lo)])
        last = np.zeros_like(values[tuple(hi)])
    elif boundary == "edge":
        first = values[tuple(lo)]
        last = values[tuple(hi)]
    else:
        raise ValueError(boundary)
    return np.concatenate([first, inner, last], axis=axis)


def interior_mask(grid: Grid, margin: int) -> np.ndarray:
    """Boolean mask of cells at least `margin` layers away from the boundary."""
    mask = np.ones(grid.cells, dtype=bool)
    for ax in range(grid.dim):
        idx = [slice(None)] * grid.dim
        idx[ax] = slice(0, margin)
        mask[tuple(idx)] = False
        idx[ax] = slice(grid.cells[ax] - margin, grid.cells[ax])
        mask[tuple(idx)] = False
    return mask
