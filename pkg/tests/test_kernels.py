"""Backend parity: the compiled kernels must reproduce the numpy fallback
bit for bit, and the shared diagonals must match the materialized operators."""

import numpy as np
import pytest

from bifluid import _kernels
from bifluid._kernels import fallback

compiled_available = _kernels.backend_name() == "compiled"
needs_compiled = pytest.mark.skipif(
    not compiled_available, reason="compiled extension not built")


def _geometry(cells, extents):
    h = tuple(e / n for e, n in zip(extents, cells))
    inv_h = tuple(1.0 / s for s in h)
    inv_h2 = tuple(ih * ih for ih in inv_h)
    return inv_h, inv_h2


def _random_faces(rng, cells, zero_boundary=True, positive=False):
    out = []
    for ax in range(len(cells)):
        shape = list(cells)
        shape[ax] += 1
        arr = rng.normal(size=shape)
        if positive:
            arr = np.abs(arr) + 0.5
        if zero_boundary:
            sl = [slice(None)] * len(cells)
            sl[ax] = 0
            arr[tuple(sl)] = 0.0
            sl[ax] = -1
            arr[tuple(sl)] = 0.0
        out.append(arr)
    return tuple(out)


def _bc_arrays(rng, cells):
    lo, hi = [], []
    for ax in range(len(cells)):
        tshape = tuple(c for a, c in enumerate(cells) if a != ax)
        lo.append(np.abs(rng.normal(size=tshape)))
        hi.append(np.abs(rng.normal(size=tshape)))
    return lo, hi


@needs_compiled
@pytest.mark.parametrize("cells,extents", [((6, 7), (1.0, 1.3)),
                                           ((5, 6, 7), (1.0, 0.8, 1.2))])
def test_continuity_apply_parity(cells, extents):
    rng = np.random.default_rng(0)
    inv_h, inv_h2 = _geometry(cells, extents)
    r = rng.normal(size=cells)
    wf = _random_faces(rng, cells)
    a = _kernels.continuity_apply(r, wf, 0.37, inv_h, inv_h2)
    b = fallback.continuity_apply(r, wf, 0.37, inv_h, inv_h2)
    assert np.array_equal(a, b)


@needs_compiled
@pytest.mark.parametrize("cells,extents", [((6, 7), (1.0, 1.3)),
                                           ((5, 6, 7), (1.0, 0.8, 1.2))])
def test_lame_apply_parity(cells, extents):
    rng = np.random.default_rng(1)
    inv_h, inv_h2 = _geometry(cells, extents)
    dim = len(cells)
    u = rng.normal(size=(2, dim) + cells)
    lpm = rng.normal(size=(2, 2))
    mu = rng.normal(size=(2, 2))
    a = _kernels.lame_apply(u, lpm, mu, inv_h, inv_h2)
    b = fallback.lame_apply(u, lpm, mu, inv_h, inv_h2)
    assert np.array_equal(a, b)


@needs_compiled
@pytest.mark.parametrize("cells,extents", [((6, 7), (1.0, 1.3)),
                                           ((5, 6, 7), (1.0, 0.8, 1.2))])
def test_robin_apply_parity(cells, extents):
    rng = np.random.default_rng(2)
    inv_h, inv_h2 = _geometry(cells, extents)
    z = rng.normal(size=cells)
    bf = _random_faces(rng, cells, positive=True)
    bc_lo, bc_hi = _bc_arrays(rng, cells)
    a = _kernels.robin_apply(z, bf, bc_lo, bc_hi, inv_h2)
    b = fallback.robin_apply(z, bf, bc_lo, bc_hi, inv_h2)
    assert np.array_equal(a, b)


def _materialize(apply_fn, n):
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        cols.append(apply_fn(e))
    return np.stack(cols, axis=1)


def test_continuity_diag_matches_operator():
    rng = np.random.default_rng(3)
    cells, extents = (5, 4), (1.0, 0.7)
    inv_h, inv_h2 = _geometry(cells, extents)
    wf = _random_faces(rng, cells)
    n = int(np.prod(cells))
    mat = _materialize(
        lambda x: _kernels.continuity_apply(
            x.reshape(cells), wf, 0.4, inv_h, inv_h2).reshape(-1), n)
    diag = _kernels.continuity_diag(wf, 0.4, inv_h, inv_h2, cells).reshape(-1)
    assert np.allclose(np.diag(mat), diag, rtol=0, atol=1e-14)
    # upwinding yields an M-matrix pattern: nonpositive off-diagonals
    off = mat - np.diag(np.diag(mat))
    assert off.max() <= 1e-14
    # column sums are exactly eps (conservative telescoping)
    assert np.allclose(mat.sum(axis=0), 0.4, atol=1e-12)


def test_lame_diag_matches_operator():
    rng = np.random.default_rng(4)
    cells, extents = (4, 5), (1.0, 1.0)
    inv_h, inv_h2 = _geometry(cells, extents)
    lpm = np.abs(rng.normal(size=(2, 2))) + 0.5
    mu = np.abs(rng.normal(size=(2, 2))) + 0.5
    shape = (2, 2) + cells
    n = int(np.prod(shape))
    mat = _materialize(
        lambda x: _kernels.lame_apply(
            x.reshape(shape), lpm, mu, inv_h, inv_h2).reshape(-1), n)
    diag = _kernels.lame_diag(lpm, mu, inv_h2, cells).reshape(-1)
    assert np.allclose(np.diag(mat), diag, rtol=0, atol=1e-12)


def test_robin_diag_matches_operator():
    rng = np.random.default_rng(5)
    cells, extents = (5, 4), (1.2, 0.9)
    inv_h, inv_h2 = _geometry(cells, extents)
    bf = _random_faces(rng, cells, positive=True)
    bc_lo, bc_hi = _bc_arrays(rng, cells)
    n = int(np.prod(cells))
    mat = _materialize(
        lambda x: _kernels.robin_apply(
            x.reshape(cells), bf, bc_lo, bc_hi, inv_h2).reshape(-1), n)
    diag = _kernels.robin_diag(bf, bc_lo, bc_hi, inv_h2, cells).reshape(-1)
    assert np.allclose(np.diag(mat), diag, rtol=0, atol=1e-13)
    assert np.allclose(mat, mat.T, atol=1e-13)  # symmetric operator


def test_lame_symmetric_for_symmetric_matrices():
    cells, extents = (4, 4), (1.0, 1.0)
    inv_h, inv_h2 = _geometry(cells, extents)
    lpm = np.array([[3.0, -0.5], [-0.5, 2.0]])
    mu = np.array([[2.0, 0.5], [0.5, 1.0]])
    shape = (2, 2) + cells
    n = int(np.prod(shape))
    mat = _materialize(
        lambda x: _kernels.lame_apply(
            x.reshape(shape), lpm, mu, inv_h, inv_h2).reshape(-1), n)
    assert np.allclose(mat, mat.T, atol=1e-13)
    eigs = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    assert eigs.min() > 0
