"""Benchmark the compiled stencil kernels against the numpy fallback.

Times the three hot operator applications on representative grids and one
end-to-end continuation stage.  Run from the repository root:

    python benchmarks/kernel_bench.py
"""

import time

import numpy as np

from bifluid import _kernels
from bifluid._kernels import fallback
from bifluid.fixed_point import ContinuationConfig, run_continuation
from bifluid.grid import build_grid
from bifluid.model import MixtureParams, VISCOSITY_PRESETS


def _geometry(cells, extents=None):
    extents = extents or (1.0,) * len(cells)
    h = tuple(e / n for e, n in zip(extents, cells))
    inv_h = tuple(1.0 / s for s in h)
    inv_h2 = tuple(ih * ih for ih in inv_h)
    return inv_h, inv_h2


def _setup(cells, rng):
    dim = len(cells)
    inv_h, inv_h2 = _geometry(cells)
    r = rng.normal(size=cells)
    u = rng.normal(size=(2, dim) + cells)
    z = rng.normal(size=cells)
    wf, bf = [], []
    for ax in range(dim):
        shape = list(cells)
        shape[ax] += 1
        for target, positive in ((wf, False), (bf, True)):
            arr = rng.normal(size=shape)
            if positive:
                arr = np.abs(arr) + 0.5
            sl = [slice(None)] * dim
            sl[ax] = 0
            arr[tuple(sl)] = 0.0
            sl[ax] = -1
            arr[tuple(sl)] = 0.0
            target.append(arr)
    bc_lo = [np.abs(rng.normal(size=tuple(c for a, c in enumerate(cells) if a != ax)))
             for ax in range(dim)]
    bc_hi = [np.abs(rng.normal(size=tuple(c for a, c in enumerate(cells) if a != ax)))
             for ax in range(dim)]
    lpm = np.array([[3.0, -0.5], [-0.5, 2.0]])
    mu = np.array([[2.0, 0.5], [0.5, 1.0]])
    return {
        "continuity": lambda mod: mod.continuity_apply(r, tuple(wf), 0.5, inv_h, inv_h2),
        "lame": lambda mod: mod.lame_apply(u, lpm, mu, inv_h, inv_h2),
        "robin": lambda mod: mod.robin_apply(z, tuple(bf), bc_lo, bc_hi, inv_h2),
    }


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    have_compiled = _kernels.backend_name() == "compiled"
    print(f"active backend: {_kernels.backend_name()}")
    if not have_compiled:
        print("compiled extension missing; timing the fallback only\n")

    print(f"{'kernel':<12} {'grid':<14} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for cells in ((32, 32), (16, 16, 16), (32, 32, 32)):
        ops = _setup(cells, rng)
        for name, op in ops.items():
            t_py = _time(lambda: op(fallback), 5)
            if have_compiled:
                t_c = _time(lambda: op(_kernels), 5)
                print(f"{name:<12} {str(cells):<14} {t_py * 1e3:9.3f}ms "
                      f"{t_c * 1e3:9.3f}ms {t_py / t_c:7.1f}x")
            else:
                print(f"{name:<12} {str(cells):<14} {t_py * 1e3:9.3f}ms "
                      f"{'-':>10} {'-':>8}")

    # one warm continuation stage end to end on the active backend
    g = build_grid(3, (1, 1, 1), (12, 12, 12))

    def forcing(pts):
        out = np.zeros_like(pts)
        out[:, 0] = 0.1
        return out

    params = MixtureParams(forcing=(forcing, forcing))
    cfg = ContinuationConfig(eps_schedule=(1.0, 0.5), fp_max_iters=2000)
    t0 = time.perf_counter()
    result = run_continuation(cfg, params, VISCOSITY_PRESETS["light_coupling"], g)
    wall = time.perf_counter() - t0
    iters = sum(s.iterations for rep in result.reports for s in rep.stages)
    print(f"\ncontinuation 12^3, two stages ({iters} fixed-point iterations): "
          f"{wall:.2f} s on the {_kernels.backend_name()} backend")


if __name__ == "__main__":
    main()
