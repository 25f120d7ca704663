"""Closed-form scalar fields with exact gradients and Hessians.

Small combinator algebra used to author manufactured solutions and test
function families: every object carries (value, gradient, hessian) closures
over point arrays of shape (N, dim), composed through exact product and
chain rules.  No symbolic engine is involved; the verification module
spot-checks every shipped source against high-order finite differences.
"""

from __future__ import annotations

import math

import numpy as np


class Analytic:
    """Scalar function of dim coordinates with exact first/second derivatives."""

    def __init__(self, dim, value_fn, grad_fn, hess_fn):
        self.dim = dim
        self._value = value_fn
        self._grad = grad_fn
        self._hess = hess_fn

    def value(self, pts: np.ndarray) -> np.ndarray:
        return self._value(np.asarray(pts, dtype=float))

    def gradient(self, pts: np.ndarray) -> np.ndarray:
        return self._grad(np.asarray(pts, dtype=float))

    def hessian(self, pts: np.ndarray) -> np.ndarray:
        return self._hess(np.asarray(pts, dtype=float))

    def laplacian(self, pts: np.ndarray) -> np.ndarray:
        return np.trace(self.hessian(pts), axis1=-2, axis2=-1)

    # -- algebra ---------------------------------------------------------

    def __add__(self, other):
        other = _as_analytic(other, self.dim)
        return Analytic(
            self.dim,
            lambda p: self.value(p) + other.value(p),
            lambda p: self.gradient(p) + other.gradient(p),
            lambda p: self.hessian(p) + other.hessian(p),
        )

    __radd__ = __add__

    def __neg__(self):
        return Analytic(self.dim, lambda p: -self.value(p),
                        lambda p: -self.gradient(p), lambda p: -self.hessian(p))

    def __sub__(self, other):
        return self + (-_as_analytic(other, self.dim))

    def __rsub__(self, other):
        return _as_analytic(other, self.dim) + (-self)

    def __mul__(self, other):
        if np.isscalar(other):
            c = float(other)
            return Analytic(self.dim, lambda p: c * self.value(p),
                            lambda p: c * self.gradient(p),
                            lambda p: c * self.hessian(p))
        other = _as_analytic(other, self.dim)

        def grad(p):
            return (self.gradient(p) * other.value(p)[:, None]
                    + self.value(p)[:, None] * other.gradient(p))

        def hess(p):
            ga, gb = self.gradient(p), other.gradient(p)
            cross = ga[:, :, None] * gb[:, None, :]
            return (self.hessian(p) * other.value(p)[:, None, None]
                    + cross + np.swapaxes(cross, 1, 2)
                    + self.value(p)[:, None, None] * other.hessian(p))

        return Analytic(self.dim, lambda p: self.value(p) * other.value(p),
                        grad, hess)

    __rmul__ = __mul__

    def compose(self, outer, d_outer, d2_outer):
        """Chain rule through a smooth 1D map applied to this field."""

        def grad(p):
            return d_outer(self.value(p))[:, None] * self.gradient(p)

        def hess(p):
            v = self.value(p)
            g = self.gradient(p)
            outer2 = d2_outer(v)[:, None, None] * (g[:, :, None] * g[:, None, :])
            return outer2 + d_outer(v)[:, None, None] * self.hessian(p)

        return Analytic(self.dim, lambda p: outer(self.value(p)), grad, hess)

    def exp(self):
        return self.compose(np.exp, np.exp, np.exp)

    def power(self, p):
        """self**p for a strictly positive base."""
        return self.compose(
            lambda v: v**p,
            lambda v: p * v ** (p - 1.0),
            lambda v: p * (p - 1.0) * v ** (p - 2.0),
        )


def _as_analytic(obj, dim):
    if isinstance(obj, Analytic):
        return obj
    return const(dim, float(obj))


def const(dim: int, c: float) -> Analytic:
    return Analytic(
        dim,
        lambda p: np.full(p.shape[0], c),
        lambda p: np.zeros((p.shape[0], dim)),
        lambda p: np.zeros((p.shape[0], dim, dim)),
    )


def axis_profile(dim: int, axis: int, f, df, d2f) -> Analytic:
    """Field depending on one coordinate through a smooth 1D profile."""

    def value(p):
        return f(p[:, axis])

    def grad(p):
        out = np.zeros((p.shape[0], dim))
        out[:, axis] = df(p[:, axis])
        return out

    def hess(p):
        out = np.zeros((p.shape[0], dim, dim))
        out[:, axis, axis] = d2f(p[:, axis])
        return out

    return Analytic(dim, value, grad, hess)


def coordinate(dim: int, axis: int) -> Analytic:
    return axis_profile(dim, axis, lambda t: t,
                        lambda t: np.ones_like(t), lambda t: np.zeros_like(t))


def sine(dim: int, axis: int, k: int, length: float = 1.0) -> Analytic:
    w = k * math.pi / length
    return axis_profile(dim, axis,
                        lambda t: np.sin(w * t),
                        lambda t: w * np.cos(w * t),
                        lambda t: -(w * w) * np.sin(w * t))


def cosine(dim: int, axis: int, k: int, length: float = 1.0) -> Analytic:
    w = k * math.pi / length
    return axis_profile(dim, axis,
                        lambda t: np.cos(w * t),
                        lambda t: -w * np.sin(w * t),
                        lambda t: -(w * w) * np.cos(w * t))


def monomial(dim: int, powers) -> Analytic:
    """Product of coordinate powers x_0^p0 * x_1^p1 * ..."""
    out = const(dim, 1.0)
    for axis, p in enumerate(powers):
        if p == 0:
            continue
        out = out * axis_profile(
            dim, axis,
            lambda t, p=p: t**p,
            lambda t, p=p: p * t ** (p - 1) if p >= 1 else np.zeros_like(t),
            lambda t, p=p: p * (p - 1) * t ** (p - 2) if p >= 2 else np.zeros_like(t),
        )
    return out


def zero_edge_poly(dim: int, axis: int, length: float = 1.0) -> Analytic:
    """t(L - t)/ (L/2)^2: vanishes at both ends, peaks at 1."""
    scale = 4.0 / (length * length)
    return axis_profile(dim, axis,
                        lambda t: scale * t * (length - t),
                        lambda t: scale * (length - 2.0 * t),
                        lambda t: np.full_like(t, -2.0 * scale))


def flat_edge_poly(dim: int, axis: int, length: float = 1.0) -> Analytic:
    """16 (t/L)^2 (1 - t/L)^2: zero value and slope at both ends, peaks at 1."""

    def val(t):
        s = t / length
        return 16.0 * s * s * (1.0 - s) ** 2

    def dval(t):
        s = t / length
        return 16.0 / length * (2.0 * s * (1.0 - s) ** 2 - 2.0 * s * s * (1.0 - s))

    def d2val(t):
        s = t / length
        return 16.0 / length**2 * (2.0 * (1.0 - s) ** 2 - 8.0 * s * (1.0 - s) + 2.0 * s * s)

    return axis_profile(dim, axis, val, dval, d2val)


def bump(dim: int, centers, widths) -> Analytic:
    """Tensor-product smooth bump, compactly supported in the open box.

    Each 1D factor is exp(1 - 1/(1 - s^2)) on |s| < 1 (s the scaled offset)
    and exactly zero outside, so every derivative vanishes at the support
    edge.
    """
    out = const(dim, 1.0)
    for axis, (c, w) in enumerate(zip(centers, widths)):
        out = out * axis_profile(
            dim, axis,
            lambda t, c=c, w=w: _bump_val((t - c) / w),
            lambda t, c=c, w=w: _bump_d1((t - c) / w) / w,
            lambda t, c=c, w=w: _bump_d2((t - c) / w) / (w * w),
        )
    return out


def _bump_parts(s):
    inside = np.abs(s) < 1.0 - 1e-12
    safe = np.where(inside, s, 0.0)
    q = 1.0 - safe * safe
    val = np.where(inside, np.exp(1.0 - 1.0 / q), 0.0)
    return inside, safe, q, val


def _bump_val(s):
    return _bump_parts(s)[3]


def _bump_d1(s):
    inside, safe, q, val = _bump_parts(s)
    return np.where(inside, val * (-2.0 * safe) / (q * q), 0.0)


def _bump_d2(s):
    inside, safe, q, val = _bump_parts(s)
    phi1 = -2.0 * safe / (q * q)
    phi2 = -2.0 / (q * q) - 8.0 * safe * safe / (q * q * q)
    return np.where(inside, val * (phi2 + phi1 * phi1), 0.0)


# -- vector-field helpers ------------------------------------------------------


class AnalyticVector:
    """Tuple of Analytic components with common derived quantities."""

    def __init__(self, components):
        self.components = list(components)
        self.dim = self.components[0].dim

    def value(self, pts) -> np.ndarray:
        return np.stack([c.value(pts) for c in self.components], axis=-1)

    def jacobian(self, pts) -> np.ndarray:
        """J[n, k, l] = d v_l / d x_k (matches the grad_vector convention)."""
        return np.stack([c.gradient(pts) for c in self.components], axis=-1)

    def divergence(self, pts) -> np.ndarray:
        out = self.components[0].gradient(pts)[:, 0]
        for ax in range(1, self.dim):
            out = out + self.components[ax].gradient(pts)[:, ax]
        return out

    def grad_divergence(self, pts) -> np.ndarray:
        """Gradient of the divergence, shape (N, dim)."""
        out = self.components[0].hessian(pts)[:, :, 0]
        for ax in range(1, self.dim):
            out = out + self.components[ax].hessian(pts)[:, :, ax]
        return out

    def laplacian(self, pts) -> np.ndarray:
        """Componentwise Laplacian, shape (N, dim)."""
        return np.stack([c.laplacian(pts) for c in self.components], axis=-1)

    def convection(self, pts) -> np.ndarray:
        """(v . grad) v, shape (N, dim)."""
        v = self.value(pts)
        jac = self.jacobian(pts)
        return np.einsum("nk,nkl->nl", v, jac)
