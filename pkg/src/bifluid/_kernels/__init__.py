"""Stencil kernel backend selection.

The hot kernels (the three elliptic operator applications driven inside every
Krylov iteration) exist twice: a compiled Cython extension and a pure-numpy
fallback with identical bit-level semantics.  The compiled core is preferred
when importable; set BIFLUID_KERNELS=python or =compiled to force a choice.
Cold helpers (operator diagonals) are shared numpy code.
"""

from __future__ import annotations

import os

import numpy as np

from . import fallback
from .fallback import (  # noqa: F401  (shared cold-path helpers)
    continuity_diag,
    lame_diag,
    robin_diag,
)

_choice = os.environ.get("BIFLUID_KERNELS", "auto")
_compiled = None
if _choice in ("auto", "compiled"):
    try:
        import importlib

        _compiled = importlib.import_module("._compiled", __name__)
    except ImportError:
        if _choice == "compiled":
            raise ImportError(
                "BIFLUID_KERNELS=compiled but the extension is not built; "
                "run pip install -e . --no-build-isolation"
            )
        _compiled = None


def backend_name() -> str:
    return "compiled" if _compiled is not None else "python"


def _as_c(arr):
    return np.ascontiguousarray(arr, dtype=float)


if _compiled is None:
    continuity_apply = fallback.continuity_apply
    lame_apply = fallback.lame_apply
    robin_apply = fallback.robin_apply
else:

    def continuity_apply(r, wfaces, eps, inv_h, inv_h2):
        out = np.empty_like(r)
        if r.ndim == 2:
            _compiled.continuity_apply_2d(
                _as_c(r), _as_c(wfaces[0]), _as_c(wfaces[1]), eps,
                inv_h[0], inv_h[1], inv_h2[0], inv_h2[1], out)
        else:
            _compiled.continuity_apply_3d(
                _as_c(r), _as_c(wfaces[0]), _as_c(wfaces[1]), _as_c(wfaces[2]),
                eps, inv_h[0], inv_h[1], inv_h[2],
                inv_h2[0], inv_h2[1], inv_h2[2], out)
        return out

    def lame_apply(u, lam_plus_mu, mu, inv_h, inv_h2):
        out = np.empty_like(u)
        lpm = _as_c(lam_plus_mu)
        m = _as_c(mu)
        if u.shape[1] == 2:
            _compiled.lame_apply_2d(_as_c(u), lpm, m, inv_h[0], inv_h[1],
                                    inv_h2[0], inv_h2[1], out)
        else:
            _compiled.lame_apply_3d(_as_c(u), lpm, m,
                                    inv_h[0], inv_h[1], inv_h[2],
                                    inv_h2[0], inv_h2[1], inv_h2[2], out)
        return out

    def robin_apply(z, bfaces, bc_lo, bc_hi, inv_h2):
        out = np.empty_like(z)
        if z.ndim == 2:
            _compiled.robin_apply_2d(
                _as_c(z), _as_c(bfaces[0]), _as_c(bfaces[1]),
                _as_c(bc_lo[0]), _as_c(bc_hi[0]),
                _as_c(bc_lo[1]), _as_c(bc_hi[1]),
                inv_h2[0], inv_h2[1], out)
        else:
            _compiled.robin_apply_3d(
                _as_c(z), _as_c(bfaces[0]), _as_c(bfaces[1]), _as_c(bfaces[2]),
                _as_c(bc_lo[0]), _as_c(bc_hi[0]),
                _as_c(bc_lo[1]), _as_c(bc_hi[1]),
                _as_c(bc_lo[2]), _as_c(bc_hi[2]),
                inv_h2[0], inv_h2[1], inv_h2[2], out)
        return out
