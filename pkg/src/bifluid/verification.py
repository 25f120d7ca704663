"""Manufactured-solution verification of the sub-solvers and coupled system.

Each shipped case carries closed-form fields (densities with zero normal
derivative, velocities with zero trace, an entropy profile) together with
exact source terms for the regularized equations, authored through the
analytic-field algebra and guarded by a high-order finite-difference spot
check.  Studies inject the sources, re-solve on a grid ladder, and report
observed convergence orders.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .analytic import Analytic, AnalyticVector
from .fixed_point import (
    ContinuationConfig,
    MixtureState,
    SourceTerms,
    solve_homotopy,
)
from .grid import Field, Grid, VectorField, build_grid
from .model import MixtureParams, ViscosityMatrices, VISCOSITY_PRESETS
from .operators import lp_norm
from .solvers import LinearSolveSpec, solve_continuity, solve_lame, solve_robin

SOLVER_TARGETS = ("continuity", "lame", "robin", "coupled")


@dataclass
class ManufacturedCase:
    """Closed-form fields plus exact sources for the regularized system."""

    name: str
    dim: int
    extents: tuple
    rho: tuple[Analytic, Analytic]
    u: tuple[AnalyticVector, AnalyticVector]
    s: Analytic
    masses: tuple[float, float]
    visc: ViscosityMatrices
    gamma: float = 4.0
    m: float = 2.0
    a: float = 0.5

    def params(self) -> MixtureParams:
        smax = self._entropy_bound()
        p = MixtureParams(gamma=self.gamma, m=self.m, a=self.a,
                          masses=self.masses, forcing=(None, None),
                          theta_hat=lambda pts: np.exp(self.s.value(pts)),
                          allow_unproven=True)
        p._theta_hat_bound = math.exp(smax)
        return p

    def _entropy_bound(self) -> float:
        probe = np.random.default_rng(7).uniform(0, 1, size=(512, self.dim))
        probe = probe * np.asarray(self.extents)
        return float(np.abs(self.s.value(probe)).max()) + 0.1

    # -- exact sources ---------------------------------------------------

    def continuity_source(self, i: int, eps: float, pts: np.ndarray) -> np.ndarray:
        rho, u = self.rho[i - 1], self.u[i - 1]
        vol = float(np.prod(self.extents))
        div_ru = (np.sum(rho.gradient(pts) * u.value(pts), axis=1)
                  + rho.value(pts) * u.divergence(pts))
        return (-eps * rho.laplacian(pts) + div_ru + eps * rho.value(pts)
                - eps * self.masses[i - 1] / vol)

    def lame_rhs(self, i: int, pts: np.ndarray) -> np.ndarray:
        """Exact coupled viscous operator applied to the case velocities."""
        lam, mu = self.visc.lam, self.visc.mu
        out = np.zeros((pts.shape[0], self.dim))
        for j in (1, 2):
            uj = self.u[j - 1]
            out += -(lam[i - 1, j - 1] + mu[i - 1, j - 1]) * uj.grad_divergence(pts)
            out += -mu[i - 1, j - 1] * uj.laplacian(pts)
        return out

    def momentum_source(self, i: int, eps: float, pts: np.ndarray) -> np.ndarray:
        rho, u = self.rho[i - 1], self.u[i - 1]
        vol = float(np.prod(self.extents))
        out = self.lame_rhs(i, pts)
        rv = rho.value(pts)[:, None]
        uv = u.value(pts)
        out += (eps / 2.0) * rv * uv
        out += (eps / 2.0) * (self.masses[i - 1] / vol) * uv
        out += 0.5 * rv * u.convection(pts)
        # div(rho u x u) = (grad rho . u) u + rho [(u . grad) u + u div u]
        gr_u = np.sum(rho.gradient(pts) * uv, axis=1)[:, None]
        out += 0.5 * (gr_u * uv + rv * (u.convection(pts)
                                        + uv * u.divergence(pts)[:, None]))
        out += self.gamma * rho.value(pts)[:, None] ** (self.gamma - 1.0) \
            * rho.gradient(pts)
        es = np.exp(self.s.value(pts))[:, None]
        out += es * rho.gradient(pts) + rv * es * self.s.gradient(pts)
        sign = (-1.0) ** i
        out -= sign * self.a * (self.u[0].value(pts) - self.u[1].value(pts))
        return out

    def _heat_production(self, eps: float, pts: np.ndarray) -> np.ndarray:
        """Full-strength source of the entropy equation at the case fields."""
        sv = self.s.value(pts)
        es = np.exp(sv)
        diff = self.u[0].value(pts) - self.u[1].value(pts)
        out = self.a * np.sum(diff * diff, axis=1)
        jacs = [v.jacobian(pts) for v in self.u]
        divs = [v.divergence(pts) for v in self.u]
        for i in (0, 1):
            rho = self.rho[i]
            rv = rho.value(pts)
            # div(rho e^s u) + rho e^s div u
            flux_div = es * (np.sum(rho.gradient(pts) * self.u[i].value(pts), axis=1)
                             + rv * divs[i]) \
                + rv * es * np.sum(self.s.gradient(pts) * self.u[i].value(pts), axis=1)
            out -= flux_div + rv * es * divs[i]
            gr = rho.gradient(pts)
            out += eps * self.gamma * rv ** (self.gamma - 2.0) * np.sum(gr * gr, axis=1)
        lam, mu = self.visc.lam, self.visc.mu
        for i in (0, 1):
            stress = np.zeros_like(jacs[i])
            for j in (0, 1):
                stress += lam[i, j] * divs[j][:, None, None] * np.eye(self.dim)
                stress += mu[i, j] * (jacs[j] + np.swapaxes(jacs[j], 1, 2))
            out += np.sum(stress * jacs[i], axis=(1, 2))
        return out

    def energy_source(self, eps: float, pts: np.ndarray) -> np.ndarray:
        sv = self.s.value(pts)
        es = np.exp(sv)
        esm = np.exp(self.m * sv)
        cond = (1.0 + esm) * (eps + es)
        dcond = self.m * esm * (eps + es) + (1.0 + esm) * es
        gs = self.s.gradient(pts)
        div_flux = dcond * np.sum(gs * gs, axis=1) + cond * self.s.laplacian(pts)
        return -2.0 * div_flux - self._heat_production(eps, pts)

    def boundary_source(self, eps: float, grid: Grid) -> np.ndarray:
        """Extra Robin data so the case entropy is the exact boundary balance."""
        pieces = []
        for patch in grid.boundary_faces():
            pts = patch.face_centers()
            sv = self.s.value(pts)
            gs = self.s.gradient(pts)
            normal_d = gs[:, patch.axis] * (-1.0 if patch.side == 0 else 1.0)
            cond = 2.0 * (1.0 + np.exp(self.m * sv)) * (eps + np.exp(sv))
            # exchange term vanishes: the case boundary temperature is e^s
            pieces.append(cond * normal_d + eps * sv)
        return np.concatenate(pieces)

    # -- grid sampling -----------------------------------------------------

    def sample(self, grid: Grid, eps: float, lam: float = 1.0) -> MixtureState:
        pts = grid.cell_centers()
        rho = tuple(Field(grid, self.rho[i].value(pts).reshape(grid.cells))
                    for i in (0, 1))
        u = tuple(VectorField(grid, self.u[i].value(pts).T.reshape(
            (grid.dim,) + grid.cells)) for i in (0, 1))
        s = Field(grid, self.s.value(pts).reshape(grid.cells))
        return MixtureState(grid, rho, u, s, eps, lam)

    def source_terms(self, grid: Grid, eps: float) -> SourceTerms:
        pts = grid.cell_centers()
        cont = tuple(Field(grid, self.continuity_source(i, eps, pts).reshape(grid.cells))
                     for i in (1, 2))
        mom = tuple(VectorField(grid, self.momentum_source(i, eps, pts).T.reshape(
            (grid.dim,) + grid.cells)) for i in (1, 2))
        energy = Field(grid, self.energy_source(eps, pts).reshape(grid.cells))
        boundary = self.boundary_source(eps, grid)
        return SourceTerms(continuity=cont, momentum=mom, energy=energy,
                           boundary=boundary,
                           theta_hat=lambda p: np.exp(self.s.value(p)))

    def grid_for(self, n: int) -> Grid:
        return build_grid(self.dim, self.extents, (n,) * self.dim)

    # -- independence guard -------------------------------------------------

    def spot_check(self, eps: float = 0.5, n_points: int = 20,
                   seed: int = 123) -> float:
        """Largest deviation between shipped sources and nested high-order
        finite differences of the raw value functions, at random points."""
        rng = np.random.default_rng(seed)
        lo = 0.15 * np.asarray(self.extents)
        hi = 0.85 * np.asarray(self.extents)
        pts = rng.uniform(lo, hi, size=(n_points, self.dim))
        step = 0.01 * min(self.extents)
        worst = 0.0

        rho_fns = [f.value for f in self.rho]
        u_fns = [[c.value for c in v.components] for v in self.u]
        s_fn = self.s.value

        for i in (1, 2):
            exact = self.continuity_source(i, eps, pts)
            fd = self._fd_continuity(i, eps, pts, step, rho_fns, u_fns)
            worst = max(worst, float(np.abs(exact - fd).max()))
            exact_m = self.momentum_source(i, eps, pts)
            fd_m = self._fd_momentum(i, eps, pts, step, rho_fns, u_fns, s_fn)
            worst = max(worst, float(np.abs(exact_m - fd_m).max()))
        exact_e = self.energy_source(eps, pts)
        fd_e = self._fd_energy(eps, pts, step, rho_fns, u_fns, s_fn)
        worst = max(worst, float(np.abs(exact_e - fd_e).max()))
        return worst

    def _fd_continuity(self, i, eps, pts, h, rho_fns, u_fns):
        rho, u = rho_fns[i - 1], u_fns[i - 1]
        vol = float(np.prod(self.extents))

        def rho_u(ax):
            return lambda p: rho(p) * u[ax](p)

        div_ru = sum(_fd_d1(rho_u(ax), pts, ax, h) for ax in range(self.dim))
        lap = sum(_fd_d2(rho, pts, ax, h) for ax in range(self.dim))
        return -eps * lap + div_ru + eps * rho(pts) - eps * self.masses[i - 1] / vol

    def _fd_momentum(self, i, eps, pts, h, rho_fns, u_fns, s_fn):
        rho, u = rho_fns[i - 1], u_fns[i - 1]
        vol = float(np.prod(self.extents))
        lam, mu = self.visc.lam, self.visc.mu
        out = np.zeros((pts.shape[0], self.dim))
        for j in (1, 2):
            uj = u_fns[j - 1]

            def div_uj(p, uj=uj):
                return sum(_fd_d1(uj[ax], p, ax, h) for ax in range(self.dim))

            for k in range(self.dim):
                graddiv_k = _fd_d1(div_uj, pts, k, h)
                lap_k = sum(_fd_d2(uj[k], pts, ax, h) for ax in range(self.dim))
                out[:, k] += -(lam[i - 1, j - 1] + mu[i - 1, j - 1]) * graddiv_k
                out[:, k] += -mu[i - 1, j - 1] * lap_k
        rv = rho(pts)
        uv = np.stack([u[k](pts) for k in range(self.dim)], axis=1)
        out += (eps / 2.0) * rv[:, None] * uv
        out += (eps / 2.0) * (self.masses[i - 1] / vol) * uv
        for k in range(self.dim):
            conv = sum(uv[:, l] * _fd_d1(u[k], pts, l, h) for l in range(self.dim))
            out[:, k] += 0.5 * rv * conv
            div_ruu = sum(
                _fd_d1(lambda p, k=k, l=l: rho(p) * u[k](p) * u[l](p), pts, l, h)
                for l in range(self.dim))
            out[:, k] += 0.5 * div_ruu
            out[:, k] += _fd_d1(lambda p: rho(p) ** self.gamma, pts, k, h)
            out[:, k] += _fd_d1(lambda p: rho(p) * np.exp(s_fn(p)), pts, k, h)
        sign = (-1.0) ** i
        u1 = np.stack([u_fns[0][k](pts) for k in range(self.dim)], axis=1)
        u2 = np.stack([u_fns[1][k](pts) for k in range(self.dim)], axis=1)
        out -= sign * self.a * (u1 - u2)
        return out

    def _fd_energy(self, eps, pts, h, rho_fns, u_fns, s_fn):
        def cond_flux(ax):
            def fn(p):
                sv = s_fn(p)
                cond = (1.0 + np.exp(self.m * sv)) * (eps + np.exp(sv))
                return cond * _fd_d1(s_fn, p, ax, h)
            return fn

        div_flux = sum(_fd_d1(cond_flux(ax), pts, ax, h) for ax in range(self.dim))

        # heat production from finite differences
        sv = s_fn(pts)
        es = np.exp(sv)
        uvals = [np.stack([u_fns[i][k](pts) for k in range(self.dim)], axis=1)
                 for i in (0, 1)]
        diff = uvals[0] - uvals[1]
        prod = self.a * np.sum(diff * diff, axis=1)
        jacs = []
        divs = []
        for i in (0, 1):
            jac = np.stack(
                [np.stack([_fd_d1(u_fns[i][l], pts, k, h) for l in range(self.dim)],
                          axis=1) for k in range(self.dim)], axis=1)
            jacs.append(jac)
            divs.append(np.trace(jac, axis1=1, axis2=2))
        for i in (0, 1):
            rho = rho_fns[i]
            rv = rho(pts)
            div_res = sum(
                _fd_d1(lambda p, k=k: rho_fns[i](p) * np.exp(s_fn(p)) * u_fns[i][k](p),
                       pts, k, h) for k in range(self.dim))
            prod -= div_res + rv * es * divs[i]
            gr = np.stack([_fd_d1(rho, pts, ax, h) for ax in range(self.dim)], axis=1)
            prod += eps * self.gamma * rv ** (self.gamma - 2.0) * np.sum(gr * gr, axis=1)
        lam, mu = self.visc.lam, self.visc.mu
        for i in (0, 1):
            stress = np.zeros_like(jacs[i])
            for j in (0, 1):
                stress += lam[i, j] * divs[j][:, None, None] * np.eye(self.dim)
                stress += mu[i, j] * (jacs[j] + np.swapaxes(jacs[j], 1, 2))
            prod += np.sum(stress * jacs[i], axis=(1, 2))
        return -2.0 * div_flux - prod


_D1_W = np.array([1.0 / 280, -4.0 / 105, 1.0 / 5, -4.0 / 5, 0.0,
                  4.0 / 5, -1.0 / 5, 4.0 / 105, -1.0 / 280])
_D2_W = np.array([-1.0 / 560, 8.0 / 315, -1.0 / 5, 8.0 / 5, -205.0 / 72,
                  8.0 / 5, -1.0 / 5, 8.0 / 315, -1.0 / 560])


def _fd_d1(fn, pts, axis, h):
    """Eighth-order central first derivative along one axis."""
    out = 0.0
    for k, w in enumerate(_D1_W):
        if w == 0.0:
            continue
        shifted = pts.copy()
        shifted[:, axis] += (k - 4) * h
        out = out + w * fn(shifted)
    return out / h


def _fd_d2(fn, pts, axis, h):
    """Eighth-order central second derivative along one axis."""
    out = 0.0
    for k, w in enumerate(_D2_W):
        shifted = pts.copy()
        shifted[:, axis] += (k - 4) * h
        out = out + w * fn(shifted)
    return out / (h * h)


# -- shipped cases ------------------------------------------------------------


def _trig_case_2d() -> ManufacturedCase:
    d = 2
    sin, cos = analytic.sine, analytic.cosine
    u1 = AnalyticVector([
        0.08 * (sin(d, 0, 1) * sin(d, 1, 1)),
        0.06 * (sin(d, 0, 1) * sin(d, 1, 2)),
    ])
    u2 = AnalyticVector([
        0.05 * (sin(d, 0, 2) * sin(d, 1, 1)),
        0.07 * (sin(d, 0, 1) * sin(d, 1, 1)),
    ])
    rho1 = analytic.const(d, 1.0) + 0.2 * (cos(d, 0, 1) * cos(d, 1, 1))
    rho2 = analytic.const(d, 0.8) + 0.16 * (cos(d, 0, 2) * cos(d, 1, 1))
    s = 0.1 * (cos(d, 0, 1) * cos(d, 1, 2))
    return ManufacturedCase(
        name="trig2d", dim=d, extents=(1.0, 1.0), rho=(rho1, rho2),
        u=(u1, u2), s=s, masses=(1.0, 0.8),
        visc=VISCOSITY_PRESETS["symmetric_coupling"])


def _trig_case_3d() -> ManufacturedCase:
    d = 3
    sin, cos = analytic.sine, analytic.cosine
    u1 = AnalyticVector([
        0.08 * (sin(d, 0, 1) * sin(d, 1, 1) * sin(d, 2, 1)),
        0.06 * (sin(d, 0, 1) * sin(d, 1, 2) * sin(d, 2, 1)),
        0.05 * (sin(d, 0, 1) * sin(d, 1, 1) * sin(d, 2, 2)),
    ])
    u2 = AnalyticVector([
        0.05 * (sin(d, 0, 2) * sin(d, 1, 1) * sin(d, 2, 1)),
        0.07 * (sin(d, 0, 1) * sin(d, 1, 1) * sin(d, 2, 1)),
        0.04 * (sin(d, 0, 1) * sin(d, 1, 1) * sin(d, 2, 1)),
    ])
    rho1 = analytic.const(d, 1.0) + 0.2 * (cos(d, 0, 1) * cos(d, 1, 1) * cos(d, 2, 1))
    rho2 = analytic.const(d, 0.8) + 0.12 * (cos(d, 0, 1) * cos(d, 1, 2) * cos(d, 2, 1))
    s = 0.08 * (cos(d, 0, 1) * cos(d, 1, 1) * cos(d, 2, 1))
    return ManufacturedCase(
        name="trig3d", dim=d, extents=(1.0, 1.0, 1.0), rho=(rho1, rho2),
        u=(u1, u2), s=s, masses=(1.0, 0.8),
        visc=VISCOSITY_PRESETS["symmetric_coupling"])


def _poly_case_3d() -> ManufacturedCase:
    d = 3
    zb, fb = analytic.zero_edge_poly, analytic.flat_edge_poly
    u1 = AnalyticVector([
        0.10 * (zb(d, 0) * zb(d, 1) * zb(d, 2)),
        0.07 * (zb(d, 0) * zb(d, 1) * zb(d, 2)),
        0.05 * (zb(d, 0) * zb(d, 1) * zb(d, 2)),
    ])
    u2 = AnalyticVector([
        0.06 * (zb(d, 0) * zb(d, 1) * zb(d, 2)),
        0.04 * (zb(d, 0) * zb(d, 1) * zb(d, 2)),
        0.08 * (zb(d, 0) * zb(d, 1) * zb(d, 2)),
    ])
    bump3 = fb(d, 0) * fb(d, 1) * fb(d, 2)
    rho1 = analytic.const(d, 1.0) + 0.25 * bump3
    rho2 = analytic.const(d, 0.7) + 0.2 * bump3
    s = 0.1 * bump3
    frac = (8.0 / 15.0) ** 3  # integral of each smoothed bump factor
    return ManufacturedCase(
        name="poly3d", dim=d, extents=(1.0, 1.0, 1.0), rho=(rho1, rho2),
        u=(u1, u2), s=s, masses=(1.0 + 0.25 * frac, 0.7 + 0.2 * frac),
        visc=VISCOSITY_PRESETS["symmetric_coupling"])


_CASES = {
    "trig2d": _trig_case_2d,
    "trig3d": _trig_case_3d,
    "poly3d": _poly_case_3d,
}


def manufactured_case(name: str) -> ManufacturedCase:
    """Return a shipped case by name ('trig2d', 'trig3d', 'poly3d')."""
    try:
        builder = _CASES[name]
    except KeyError:
        raise KeyError(f"unknown manufactured case {name!r}; "
                       f"shipped: {sorted(_CASES)}") from None
    return builder()


# -- convergence studies --------------------------------------------------------


@dataclass
class StudyReport:
    case: str
    target: str
    grids: list[int]
    errors: dict[str, list]
    orders: dict[str, list]

    def to_json_dict(self) -> dict:
        return {"case": self.case, "target": self.target, "grids": self.grids,
                "errors": self.errors, "orders": self.orders}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    def min_order(self, fields=None) -> float:
        vals = []
        for name, orders in self.orders.items():
            if fields is not None and name not in fields:
                continue
            numeric = [o for o in orders if isinstance(o, float)]
            if numeric:
                vals.append(numeric[-1])
        return min(vals) if vals else math.inf


def _orders_from_errors(errors, scale=1.0):
    out = []
    for a, b in zip(errors, errors[1:]):
        if a < 1e-11 * scale and b < 1e-11 * scale:
            out.append("exact")
        else:
            out.append(float(np.log2(a / b)) if b > 0 else "exact")
    return out


_SOURCES_CHECKED: set[str] = set()


def convergence_study(case: ManufacturedCase, solver_target: str, grids,
                      eps: float = 0.5,
                      spec: LinearSolveSpec | None = None) -> StudyReport:
    """Grid-refinement study of one solver target against the case fields.

    Grids are per-axis cell counts, each doubling the last.  The case's
    sources must pass the finite-difference spot check before any study
    runs (cached per case name).  Returns L2 errors and observed orders per
    recovered field.
    """
    if solver_target not in SOLVER_TARGETS:
        raise ValueError(f"unknown solver target {solver_target!r}")
    grids = list(grids)
    if len(grids) < 2:
        raise ValueError("need at least two grids")
    if case.name not in _SOURCES_CHECKED:
        dev = case.spot_check()
        if dev > 1e-8:
            raise ValueError(
                f"case {case.name!r} sources deviate {dev:.2e} from the "
                "finite-difference oracle")
        _SOURCES_CHECKED.add(case.name)
    spec = spec or LinearSolveSpec(rel_tol=1e-11, max_iters=20000)
    errors: dict[str, list] = {}

    for n in grids:
        grid = case.grid_for(n)
        pts = grid.cell_centers()
        if solver_target == "continuity":
            w = VectorField(grid, case.u[0].value(pts).T.reshape(
                (grid.dim,) + grid.cells))
            src = Field(grid, case.continuity_source(1, eps, pts).reshape(grid.cells))
            r, _ = solve_continuity(w, eps, case.masses[0], spec, source=src)
            exact = case.rho[0].value(pts).reshape(grid.cells)
            errors.setdefault("rho1", []).append(
                lp_norm(Field(grid, r.values - exact), 2))
        elif solver_target == "lame":
            g1 = VectorField(grid, case.lame_rhs(1, pts).T.reshape(
                (grid.dim,) + grid.cells))
            g2 = VectorField(grid, case.lame_rhs(2, pts).T.reshape(
                (grid.dim,) + grid.cells))
            (h1, h2), _ = solve_lame(g1, g2, case.visc, spec)
            for name, h_num, v in (("u1", h1, case.u[0]), ("u2", h2, case.u[1])):
                exact = v.value(pts).T.reshape((grid.dim,) + grid.cells)
                errors.setdefault(name, []).append(
                    lp_norm(VectorField(grid, h_num.values - exact), 2))
        elif solver_target == "robin":
            b_an = analytic.const(grid.dim, 1.0) + analytic.coordinate(grid.dim, 0) \
                * analytic.coordinate(grid.dim, 0)
            z_an = case.s
            d_vals = -(np.sum(b_an.gradient(pts) * z_an.gradient(pts), axis=1)
                       + b_an.value(pts) * z_an.laplacian(pts))
            t_parts = []
            for patch in grid.boundary_faces():
                fpts = patch.face_centers()
                sign = -1.0 if patch.side == 0 else 1.0
                t_parts.append(b_an.value(fpts)
                               * z_an.gradient(fpts)[:, patch.axis] * sign
                               + eps * z_an.value(fpts))
            z, _ = solve_robin(Field(grid, d_vals.reshape(grid.cells)),
                               Field(grid, b_an.value(pts).reshape(grid.cells)),
                               np.concatenate(t_parts), eps, spec)
            exact = z_an.value(pts).reshape(grid.cells)
            errors.setdefault("s", []).append(
                lp_norm(Field(grid, z.values - exact), 2))
        else:  # coupled
            state = _solve_coupled(case, grid, eps, spec)
            exact_state = case.sample(grid, eps)
            for name, num, ex in (
                    ("u1", state.u[0].values, exact_state.u[0].values),
                    ("u2", state.u[1].values, exact_state.u[1].values)):
                errors.setdefault(name, []).append(
                    lp_norm(VectorField(grid, num - ex), 2))
            errors.setdefault("s", []).append(
                lp_norm(Field(grid, state.s.values - exact_state.s.values), 2))
            for i in (0, 1):
                errors.setdefault(f"rho{i + 1}", []).append(
                    lp_norm(Field(grid, state.rho[i].values
                                  - exact_state.rho[i].values), 2))

    orders = {name: _orders_from_errors(errs) for name, errs in errors.items()}
    return StudyReport(case=case.name, target=solver_target, grids=grids,
                       errors=errors, orders=orders)


def _solve_coupled(case: ManufacturedCase, grid: Grid, eps: float,
                   spec: LinearSolveSpec) -> MixtureState:
    params = case.params()
    sources = case.source_terms(grid, eps)
    init = case.sample(grid, eps)
    cfg = ContinuationConfig(fp_tol=1e-10, fp_max_iters=3000, solve_spec=spec,
                             eps_schedule=(eps,) if eps < 1.0 else (1.0,))
    state, report = solve_homotopy(init, cfg, params, case.visc,
                                   sources=sources, lambda_schedule=(1.0,))
    if not report.converged:
        stage = report.stages[-1]
        raise RuntimeError(
            f"coupled verification iteration did not converge: {stage.failure}")
    return state
