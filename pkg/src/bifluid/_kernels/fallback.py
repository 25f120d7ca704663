"""Pure-numpy reference implementations of the hot stencil kernels.

The compiled extension mirrors these bit-for-bit: every output element is
produced by the same floating-point expression tree in the same order, and
the extension is built with FP contraction disabled, so the two backends are
interchangeable without perturbing any test at all.

Conventions shared by all kernels:
  * cell arrays are C-contiguous float64 with one axis per grid axis;
  * face arrays along axis ax have cells[ax] + 1 entries on that axis and
    carry exact zeros on domain-boundary faces where the caller says so;
  * inv_h / inv_h2 are precomputed 1/h and 1/h^2 per axis (passed in, never
    recomputed, so both backends use identical constants).
"""

from __future__ import annotations

import numpy as np


def _pad(arr, axis, mode):
    """Pad one ghost layer per side: 'even', 'odd' or 'zero' reflection."""
    lo = [slice(None)] * arr.ndim
    hi = [slice(None)] * arr.ndim
    lo[axis] = slice(0, 1)
    hi[axis] = slice(arr.shape[axis] - 1, arr.shape[axis])
    first = arr[tuple(lo)]
    last = arr[tuple(hi)]
    if mode == "even":
        g_lo, g_hi = first, last
    elif mode == "odd":
        g_lo, g_hi = -first, -last
    elif mode == "zero":
        g_lo, g_hi = np.zeros_like(first), np.zeros_like(last)
    else:
        raise ValueError(mode)
    return np.concatenate([g_lo, arr, g_hi], axis=axis)


def _mcp(padded, axis):
    """Minus/center/plus views of a padded array."""
    nd = padded.ndim
    sm = [slice(None)] * nd
    sc = [slice(None)] * nd
    sp = [slice(None)] * nd
    sm[axis] = slice(0, -2)
    sc[axis] = slice(1, -1)
    sp[axis] = slice(2, None)
    return padded[tuple(sm)], padded[tuple(sc)], padded[tuple(sp)]


def _faces(arr, axis):
    """(left-cell, right-cell) views for the cells[ax]+1 faces along axis."""
    zl = [slice(None)] * arr.ndim
    zl[axis] = slice(0, 1)
    zeros = np.zeros_like(arr[tuple(zl)])
    left = np.concatenate([zeros, arr], axis=axis)
    right = np.concatenate([arr, zeros], axis=axis)
    return left, right


def _lo_hi(shape, axis):
    lo = [slice(None)] * len(shape)
    hi = [slice(None)] * len(shape)
    lo[axis] = 0
    hi[axis] = shape[axis] - 1
    return tuple(lo), tuple(hi)


def _face_diff(f, axis):
    nd = f.ndim
    a = [slice(None)] * nd
    b = [slice(None)] * nd
    a[axis] = slice(1, None)
    b[axis] = slice(0, -1)
    return f[tuple(a)], f[tuple(b)]


# -- regularized continuity operator ------------------------------------------


def continuity_apply(r, wfaces, eps, inv_h, inv_h2):
    """-eps*lap_N(r) + upwind div(r w) + eps*r, Neumann ghost policy."""
    out = eps * r
    for ax in range(r.ndim):
        vm, vc, vp = _mcp(_pad(r, ax, "even"), ax)
        out = out + (-eps) * ((vm - 2.0 * vc + vp) * inv_h2[ax])
    for ax in range(r.ndim):
        wf = wfaces[ax]
        rl, rr = _faces(r, ax)
        f = np.maximum(wf, 0.0) * rl + np.minimum(wf, 0.0) * rr
        fp, fm = _face_diff(f, ax)
        out = out + (fp - fm) * inv_h[ax]
    return out


def continuity_diag(wfaces, eps, inv_h, inv_h2, shape):
    diag = np.full(shape, eps)
    for ax in range(len(shape)):
        coef = np.full(shape[ax], 2.0)
        coef[0] = 1.0
        coef[-1] = 1.0
        view = coef.reshape([-1 if a == ax else 1 for a in range(len(shape))])
        diag = diag + eps * (view * inv_h2[ax])
    for ax in range(len(shape)):
        wf = wfaces[ax]
        hi, lo = _face_diff(wf, ax)
        diag = diag + (np.maximum(hi, 0.0) - np.minimum(lo, 0.0)) * inv_h[ax]
    return diag


# -- coupled Lame block operator ----------------------------------------------


def _div_odd(u_vec, inv_h):
    """Central-difference divergence of one velocity, odd ghost policy."""
    dim = u_vec.shape[0]
    out = None
    for ax in range(dim):
        vm, _, vp = _mcp(_pad(u_vec[ax], ax, "odd"), ax)
        term = (vp - vm) * (0.5 * inv_h[ax])
        out = term if out is None else out + term
    return out


def _grad_transpose(q, axis, inv_h):
    """Exact transpose of the odd-ghost central difference along one axis."""
    qm, _, qp = _mcp(_pad(q, axis, "even"), axis)
    return (qm - qp) * (0.5 * inv_h[axis])


def _neg_lap_dirichlet(v, inv_h2):
    out = None
    for ax in range(v.ndim):
        vm, vc, vp = _mcp(_pad(v, ax, "odd"), ax)
        term = -((vm - 2.0 * vc + vp) * inv_h2[ax])
        out = term if out is None else out + term
    return out


def lame_apply(u, lam_plus_mu, mu, inv_h, inv_h2):
    """Block operator of the coupled viscous system on a velocity pair.

    u has shape (2, dim, *cells); entry (i, k) of the result is
    sum_j [(lam+mu)_ij * gradT_k(div u_j) + mu_ij * (-lap_D u_jk)].
    """
    dim = u.shape[1]
    divs = [_div_odd(u[0], inv_h), _div_odd(u[1], inv_h)]
    laps = [[_neg_lap_dirichlet(u[j, k], inv_h2) for k in range(dim)]
            for j in range(2)]
    out = np.empty_like(u)
    for i in range(2):
        for k in range(dim):
            t = lam_plus_mu[i, 0] * _grad_transpose(divs[0], k, inv_h)
            t = t + lam_plus_mu[i, 1] * _grad_transpose(divs[1], k, inv_h)
            t = t + mu[i, 0] * laps[0][k]
            t = t + mu[i, 1] * laps[1][k]
            out[i, k] = t
    return out


def lame_diag(lam_plus_mu, mu, inv_h2, shape):
    dim = len(shape)
    lap_diag = np.zeros(shape)
    for ax in range(dim):
        coef = np.full(shape[ax], 2.0)
        coef[0] = 3.0
        coef[-1] = 3.0
        view = coef.reshape([-1 if a == ax else 1 for a in range(dim)])
        lap_diag = lap_diag + view * inv_h2[ax]
    out = np.empty((2, dim) + shape)
    for i in range(2):
        for k in range(dim):
            out[i, k] = lam_plus_mu[i, i] * (0.5 * inv_h2[k]) + mu[i, i] * lap_diag
    return out


# -- Robin-coefficient diffusion operator -------------------------------------


def robin_apply(z, bfaces, bc_lo, bc_hi, inv_h2):
    """-div(b grad z) with the boundary-face closure folded into the operator.

    bfaces carry exact zeros on domain-boundary faces; bc_lo/bc_hi are the
    per-face closure coefficients multiplying the adjacent cell value.
    """
    out = np.zeros_like(z)
    for ax in range(z.ndim):
        zl, zr = _faces(z, ax)
        f = bfaces[ax] * (zr - zl)
        fp, fm = _face_diff(f, ax)
        out = out - (fp - fm) * inv_h2[ax]
    for ax in range(z.ndim):
        lo, hi = _lo_hi(z.shape, ax)
        out[lo] = out[lo] + bc_lo[ax] * z[lo]
        out[hi] = out[hi] + bc_hi[ax] * z[hi]
    return out


def robin_diag(bfaces, bc_lo, bc_hi, inv_h2, shape):
    diag = np.zeros(shape)
    for ax in range(len(shape)):
        hi_f, lo_f = _face_diff(bfaces[ax], ax)
        diag = diag + (lo_f + hi_f) * inv_h2[ax]
    for ax in range(len(shape)):
        lo, hi = _lo_hi(shape, ax)
        diag[lo] = diag[lo] + bc_lo[ax]
        diag[hi] = diag[hi] + bc_hi[ax]
    return diag
