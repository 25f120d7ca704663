"""Monitoring: norm bundle, weak-form residuals, integral balances, fluxes.

Everything here is a pure read-only pass over a state.  Residuals are
normalized by the sum of the magnitudes of the participating terms plus a
data-scale floor, so they are scale-free on O(1) states and go to zero on
near-trivial ones instead of degenerating into 0/0 ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .fixed_point import MixtureState, dissipation_density
from .grid import Field, Grid
from .model import MixtureParams, ViscosityMatrices, kirchhoff_potential
from .operators import (
    boundary_integral,
    boundary_lp_norm,
    boundary_trace,
    deriv,
    divergence,
    grad_vector,
    gradient,
    integrate_values,
    interior_mask,
    lp_norm,
    w12_norm,
)

_TINY = 1e-300

MONITOR_COLUMNS = (
    "eps", "lam",
    "rho1_l2gamma", "rho2_l2gamma", "u1_w12", "u2_w12",
    "eps_grad_rho1", "eps_grad_rho2", "theta_l3m", "grad_theta_l2",
    "boundary_exp_s", "grad_s_l2", "theta_boundary_l2m",
    "weak_mass", "weak_momentum", "weak_energy",
    "mech_balance", "entropy_balance", "kirchhoff_residual",
    "renorm_1", "renorm_2", "flux_diff_1", "flux_diff_2",
    "fp_iters", "converged",
)


@dataclass
class MonitorRow:
    """All monitored norms and residuals for one accepted (eps, lam) stage."""

    eps: float
    lam: float
    norms: dict
    residuals: dict
    renorm: tuple[float, float]
    flux_fields: tuple[np.ndarray, np.ndarray] = field(repr=False, default=(None, None))
    flux_diff: tuple[float, float] = (math.nan, math.nan)
    fp_iters: int = 0
    converged: bool = True

    def values_in_order(self):
        vals = [self.eps, self.lam]
        vals += [self.norms[k] for k in MONITOR_COLUMNS[2:13]]
        vals += [self.residuals[k] for k in MONITOR_COLUMNS[13:19]]
        vals += [self.renorm[0], self.renorm[1], self.flux_diff[0], self.flux_diff[1]]
        vals += [self.fp_iters, self.converged]
        return vals

    def to_csv_row(self) -> str:
        out = []
        for v in self.values_in_order():
            if isinstance(v, bool):
                out.append("1" if v else "0")
            elif isinstance(v, int):
                out.append(str(v))
            else:
                out.append(repr(float(v)))
        return ",".join(out)

    def to_json_dict(self) -> dict:
        keys = MONITOR_COLUMNS
        vals = self.values_in_order()
        return {k: (v if not isinstance(v, float) or math.isfinite(v) else None)
                for k, v in zip(keys, vals)}


# -- test function families ------------------------------------------------------


@dataclass(frozen=True)
class TestFunctionFamily:
    """Deterministic families of smooth test functions.

    kind 'smooth_bump_interior': tensor-product bumps (3 centers per axis,
    two widths) vanishing with all derivatives outside a support strictly
    inside the domain; kind 'polynomial_global': tensor monomials up to the
    given total degree, smooth up to the boundary.
    """

    __test__ = False  # not a pytest collection target

    kind: str
    centers: tuple = (0.3, 0.5, 0.7)
    widths: tuple = (0.12, 0.17)
    degree: int = 3

    def build(self, grid: Grid) -> list[analytic.Analytic]:
        if self.kind == "smooth_bump_interior":
            return self._bumps(grid)
        if self.kind == "polynomial_global":
            return self._polynomials(grid)
        raise ValueError(f"unknown family kind {self.kind!r}")

    def _bumps(self, grid: Grid) -> list[analytic.Analytic]:
        out = []
        import itertools
        for rel_centers in itertools.product(self.centers, repeat=grid.dim):
            for rel_w in self.widths:
                centers, widths, ok = [], [], True
                for ax in range(grid.dim):
                    L = grid.extents[ax]
                    margin = L / grid.cells[ax]
                    c = rel_centers[ax] * L
                    w = min(rel_w * L, c - margin, (L - c) - margin)
                    if w <= 0.02 * L:
                        ok = False
                        break
                    centers.append(c)
                    widths.append(w)
                if ok:
                    out.append(analytic.bump(grid.dim, centers, widths))
        return out

    def _polynomials(self, grid: Grid) -> list[analytic.Analytic]:
        import itertools
        out = []
        scale = [1.0 / e for e in grid.extents]
        for powers in itertools.product(range(self.degree + 1), repeat=grid.dim):
            if sum(powers) > self.degree:
                continue
            mono = analytic.monomial(grid.dim, powers)
            # rescale coordinates into the unit box for conditioning
            factor = 1.0
            for p, s in zip(powers, scale):
                factor *= s**p
            out.append(mono * factor)
        return out


def default_families() -> tuple[TestFunctionFamily, TestFunctionFamily]:
    return (TestFunctionFamily(kind="smooth_bump_interior"),
            TestFunctionFamily(kind="polynomial_global"))


# -- weak-form residuals -----------------------------------------------------------


def _integral(grid: Grid, values: np.ndarray) -> float:
    return integrate_values(grid, values)


def _data_scales(grid: Grid, params: MixtureParams):
    vol = grid.volume
    rho_bar = [M / vol for M in params.masses]
    th = params.theta_hat_max()
    pressure_scale = sum(rb**params.gamma + rb * th for rb in rho_bar)
    f_inf = 0.0
    centers = grid.cell_centers()
    for i in (1, 2):
        f = params.force_values(i, centers)
        if f.size:
            f_inf = max(f_inf, float(np.abs(f).max()))
    mass_scale = sum(params.masses)
    ell = 1.0 + th ** (params.m - 1.0)
    return {
        "mass": mass_scale,
        "momentum": vol * pressure_scale + mass_scale * (1.0 + f_inf),
        "energy": vol * (1.0 + pressure_scale) * (1.0 + th)
        + grid.boundary_area * ell * th + mass_scale * (1.0 + f_inf),
    }


def weak_residuals(state: MixtureState, params: MixtureParams,
                   visc: ViscosityMatrices, families=None) -> tuple[float, float, float]:
    """Normalized residuals of the three weak identities of the limit problem.

    Mass and energy identities are tested against global polynomials with
    analytic gradients; the momentum identity uses compactly supported bumps
    whose derivatives are evaluated with the conservative zero-extension
    stencils, so constant-pressure states balance to rounding.
    """
    grid = state.grid
    if families is None:
        families = default_families()
    bumps, polys = families
    scales = _data_scales(grid, params)
    pts = grid.cell_centers()

    theta = state.theta().values
    rho = [r.values for r in state.rho]
    u = [v.values for v in state.u]
    grads = [grad_vector(state.u[i], "dirichlet") for i in (0, 1)]
    div_u = [divergence(state.u[i], "dirichlet").values for i in (0, 1)]
    force = [params.force_values(i, pts).T.reshape((grid.dim,) + grid.cells)
             for i in (1, 2)]
    stress = [_stress_tensor(grads, visc, i) for i in (0, 1)]

    # mass identity against global polynomials
    res_mass = 0.0
    poly_fns = polys.build(grid)
    for psi in poly_fns:
        gpsi = psi.gradient(pts).T.reshape((grid.dim,) + grid.cells)
        for i in (0, 1):
            val = _integral(grid, np.sum(rho[i] * u[i] * gpsi, axis=0))
            denom = _integral(grid, np.abs(rho[i] * np.sum(u[i] * gpsi, axis=0))) \
                + scales["mass"]
            res_mass = max(res_mass, abs(val) / (denom + _TINY))

    # momentum identity against interior bumps, conservative stencils
    res_mom = 0.0
    lam_mu = visc.lam + visc.mu
    for psi in bumps.build(grid):
        psi_vals = psi.value(pts).reshape(grid.cells)
        dpsi = np.stack([deriv(psi_vals, ax, grid.h[ax], "zero")
                         for ax in range(grid.dim)])
        for k in range(grid.dim):
            for i in (0, 1):
                terms = []
                visc_term = 0.0
                for j in (0, 1):
                    grad_ujk = grads[j].values[:, k]
                    visc_term += visc.mu[i, j] * _integral(
                        grid, np.sum(grad_ujk * dpsi, axis=0))
                    visc_term += lam_mu[i, j] * _integral(grid, div_u[j] * dpsi[k])
                terms.append(visc_term)
                conv = -_integral(
                    grid, rho[i] * np.sum(u[i] * dpsi, axis=0) * u[i][k])
                terms.append(conv)
                terms.append(-_integral(grid, rho[i] ** params.gamma * dpsi[k]))
                terms.append(-_integral(grid, rho[i] * theta * dpsi[k]))
                sign = (-1.0) ** (i + 1)
                drag = sign * params.a * (u[0][k] - u[1][k])
                terms.append(-_integral(
                    grid, (rho[i] * force[i][k] + drag) * psi_vals))
                res = abs(math.fsum(terms))
                denom = math.fsum(abs(t) for t in terms) + scales["momentum"]
                res_mom = max(res_mom, res / (denom + _TINY))

    # energy identity against global polynomials
    res_en = 0.0
    s_trace = boundary_trace(state.s)
    theta_trace = np.exp(s_trace)
    face_pts = grid.boundary_face_centers()
    that = params.theta_hat_values(face_pts)
    ell_tr = 1.0 + theta_trace ** (params.m - 1.0)
    k_cond = 1.0 + theta**params.m
    grad_theta = gradient(Field(grid, theta), "extrapolate").values
    for eta in poly_fns:
        geta = eta.gradient(pts).T.reshape((grid.dim,) + grid.cells)
        eta_vals = eta.value(pts).reshape(grid.cells)
        eta_trace = eta.value(face_pts)
        terms = []
        for i in (0, 1):
            energy = 0.5 * np.sum(u[i] * u[i], axis=0) \
                + rho[i] ** (params.gamma - 1.0) / (params.gamma - 1.0) + theta
            p_i = rho[i] ** params.gamma + rho[i] * theta
            terms.append(-_integral(
                grid, rho[i] * energy * np.sum(u[i] * geta, axis=0)))
            terms.append(-_integral(grid, p_i * np.sum(u[i] * geta, axis=0)))
            terms.append(_integral(
                grid, np.einsum("ab...,a...,b...->...", stress[i], u[i], geta)))
            terms.append(-_integral(
                grid, rho[i] * np.sum(force[i] * u[i], axis=0) * eta_vals))
        terms.append(_integral(
            grid, 2.0 * k_cond * np.sum(grad_theta * geta, axis=0)))
        terms.append(boundary_integral(
            grid, ell_tr * (theta_trace - that) * eta_trace))
        res = abs(math.fsum(terms))
        denom = math.fsum(abs(t) for t in terms) + scales["energy"]
        res_en = max(res_en, res / (denom + _TINY))

    return res_mass, res_mom, res_en


def _stress_tensor(grads, visc, i):
    grid = grads[0].grid
    out = np.zeros((grid.dim, grid.dim) + grid.cells)
    eye = np.eye(grid.dim).reshape((grid.dim, grid.dim) + (1,) * grid.dim)
    for j in (0, 1):
        g = grads[j].values
        div = np.trace(g, axis1=0, axis2=1)
        out += visc.lam[i, j] * div * eye
        out += visc.mu[i, j] * (g + np.swapaxes(g, 0, 1))
    return out


# -- integral balances of the regularized problem ----------------------------------


def identity_residuals(state: MixtureState, params: MixtureParams,
                       visc: ViscosityMatrices) -> tuple[float, float, float]:
    """Global mechanical balance, entropy balance, and the potential-form
    residual of the heat equation, all normalized termwise."""
    grid = state.grid
    eps = state.eps
    gamma = params.gamma
    theta = state.theta().values
    rho = [r.values for r in state.rho]
    u = [v.values for v in state.u]
    grads = [grad_vector(state.u[i], "dirichlet") for i in (0, 1)]
    div_u = [divergence(state.u[i], "dirichlet").values for i in (0, 1)]
    grad_rho = [gradient(state.rho[i], "neumann").values for i in (0, 1)]
    grad_s = gradient(state.s, "extrapolate").values
    pts = grid.cell_centers()
    force = [params.force_values(i, pts).T.reshape((grid.dim,) + grid.cells)
             for i in (1, 2)]
    vol = grid.volume
    dissip = dissipation_density(grads[0], grads[1], visc)
    diff_u = u[0] - u[1]
    diff_sq = np.sum(diff_u * diff_u, axis=0)

    # mechanical balance
    lhs = [
        _integral(grid, dissip),
        (eps / 2.0) * math.fsum(
            _integral(grid, rho[i] * np.sum(u[i] * u[i], axis=0)) for i in (0, 1)),
        (eps / (2.0 * vol)) * math.fsum(
            params.masses[i] * _integral(grid, np.sum(u[i] * u[i], axis=0))
            for i in (0, 1)),
        eps * gamma / (gamma - 1.0) * math.fsum(
            _integral(grid, rho[i] ** gamma) for i in (0, 1)),
        eps * gamma * math.fsum(
            _integral(grid, rho[i] ** (gamma - 2.0)
                      * np.sum(grad_rho[i] * grad_rho[i], axis=0))
            for i in (0, 1)),
        params.a * _integral(grid, diff_sq),
    ]
    rhs = [
        eps / vol * gamma / (gamma - 1.0) * math.fsum(
            params.masses[i] * _integral(grid, rho[i] ** (gamma - 1.0))
            for i in (0, 1)),
        math.fsum(_integral(grid, rho[i] * theta * div_u[i]) for i in (0, 1)),
        math.fsum(_integral(grid, rho[i] * np.sum(force[i] * u[i], axis=0))
                  for i in (0, 1)),
    ]
    num = abs(math.fsum(lhs) - math.fsum(rhs))
    den = math.fsum(abs(t) for t in lhs + rhs) + _TINY
    mech = num / den

    # entropy balance, with positive/negative part split on the boundary
    s_trace = boundary_trace(state.s)
    theta_trace = np.exp(s_trace)
    that = params.theta_hat_values(grid.boundary_face_centers())
    ell_tr = 1.0 + theta_trace ** (params.m - 1.0)
    s_plus = np.maximum(s_trace, 0.0)
    s_minus = np.maximum(-s_trace, 0.0)
    k_cond = 1.0 + theta**params.m
    grad_s_sq = np.sum(grad_s * grad_s, axis=0)
    lhs = [
        _integral(grid, dissip / theta),
        2.0 * _integral(grid, k_cond * (eps + theta) / theta * grad_s_sq),
        boundary_integral(grid, ell_tr * that / theta_trace),
        boundary_integral(grid, ell_tr * theta_trace),
        params.a * _integral(grid, diff_sq / theta),
        (eps / 2.0) * math.fsum(
            _integral(grid, rho[i] * np.sum(u[i] * u[i], axis=0)) for i in (0, 1)),
        (eps / (2.0 * vol)) * math.fsum(
            params.masses[i] * _integral(grid, np.sum(u[i] * u[i], axis=0))
            for i in (0, 1)),
        eps * gamma / (gamma - 1.0) * math.fsum(
            _integral(grid, rho[i] ** gamma) for i in (0, 1)),
        eps * gamma * math.fsum(
            _integral(grid, rho[i] ** (gamma - 2.0) / theta
                      * np.sum(grad_rho[i] * grad_rho[i], axis=0))
            for i in (0, 1)),
        eps * boundary_integral(grid, s_minus * np.exp(s_minus) + s_plus),
    ]
    rhs = [
        math.fsum(_integral(grid, rho[i] * np.sum(u[i] * grad_s, axis=0)
                            - np.sum(u[i] * grad_rho[i], axis=0))
                  for i in (0, 1)),
        boundary_integral(grid, ell_tr * (1.0 + that)),
        eps / vol * gamma / (gamma - 1.0) * math.fsum(
            params.masses[i] * _integral(grid, rho[i] ** (gamma - 1.0))
            for i in (0, 1)),
        math.fsum(_integral(grid, rho[i] * np.sum(force[i] * u[i], axis=0))
                  for i in (0, 1)),
        eps * boundary_integral(grid, s_plus * np.exp(-s_plus) + s_minus),
    ]
    num = abs(math.fsum(lhs) - math.fsum(rhs))
    den = math.fsum(abs(t) for t in lhs + rhs) + _TINY
    entropy = num / den

    kirchhoff = _kirchhoff_residual(state, params, visc)
    return mech, entropy, kirchhoff


def _kirchhoff_residual(state: MixtureState, params: MixtureParams,
                        visc: ViscosityMatrices) -> float:
    """Residual of the potential form of the heat problem in flux form.

    The potential of the entropy variable satisfies a Poisson problem whose
    source is the heat production and whose boundary flux is the exchange
    data; interior faces use compact differences and boundary faces take the
    flux straight from the boundary balance.
    """
    from .fixed_point import assemble_heat_source

    grid = state.grid
    eps = state.eps
    lam = state.lam if state.lam > 0 else 1.0
    phi = kirchhoff_potential(state.s.values, eps, params.m)
    s_trace_all = boundary_trace(state.s)
    that = params.theta_hat_values(grid.boundary_face_centers())
    theta_trace = np.exp(s_trace_all)
    ell_tr = 1.0 + theta_trace ** (params.m - 1.0)
    pi_hat = -eps * s_trace_all - lam * ell_tr * (theta_trace - that)

    lhs = np.zeros(grid.cells)
    patches = grid.boundary_faces()
    offsets = np.cumsum([0] + [p.n_faces for p in patches])
    for ax in range(grid.dim):
        ih = 1.0 / grid.h[ax]
        dphi = np.diff(phi, axis=ax) * ih  # interior face fluxes
        lo_patch = 2 * ax
        hi_patch = 2 * ax + 1
        lo_flux = -0.5 * pi_hat[offsets[lo_patch]:offsets[lo_patch + 1]].reshape(
            patches[lo_patch].tangential_cells)
        hi_flux = 0.5 * pi_hat[offsets[hi_patch]:offsets[hi_patch + 1]].reshape(
            patches[hi_patch].tangential_cells)
        flux = np.concatenate(
            [np.expand_dims(lo_flux, ax), dphi, np.expand_dims(hi_flux, ax)],
            axis=ax)
        lhs += -2.0 * np.diff(flux, axis=ax) * ih

    src = assemble_heat_source(state.u, state.s, state.rho, params, visc, eps)
    rhs = lam * src.values
    num = lp_norm(Field(grid, lhs - rhs), 2)
    th = params.theta_hat_max()
    curvature = math.fsum((2.0 * math.pi / L) ** 2 for L in grid.extents)
    floor = 2.0 * (1.0 + th**params.m) * (eps + th) * curvature
    den = lp_norm(Field(grid, lhs), 2) + lp_norm(Field(grid, rhs), 2) + floor
    return num / den


# -- effective fluxes and renormalized integrals -----------------------------------


def effective_viscous_flux(state: MixtureState, params: MixtureParams,
                           visc: ViscosityMatrices, i: int) -> Field:
    """Pressure minus total-viscosity-weighted velocity divergences.

    Terms with an exactly zero total-viscosity coefficient are skipped, so
    with the triangular assumption the first flux never reads the second
    velocity field.
    """
    grid = state.grid
    theta = state.theta().values
    rho = state.rho[i - 1].values
    vals = rho**params.gamma + rho * theta
    nu = visc.nu
    for j in (1, 2):
        coef = nu[i - 1, j - 1]
        if coef != 0.0:
            vals = vals - coef * divergence(state.u[j - 1], "dirichlet").values
    return Field(grid, vals)


def renormalized_integral(state: MixtureState, i: int) -> float:
    """Midpoint quadrature of rho_i times the divergence of its velocity."""
    div_u = divergence(state.u[i - 1], "dirichlet").values
    return integrate_values(state.grid, state.rho[i - 1].values * div_u)


# -- the monitor row ---------------------------------------------------------------


def estimate_monitor(state: MixtureState, params: MixtureParams,
                     visc: ViscosityMatrices, fp_iters: int = 0,
                     converged: bool = True,
                     prev_flux: tuple | None = None) -> MonitorRow:
    """Fill the full norm bundle and residuals for one accepted stage.

    Never raises on large values: divergence shows up as inf entries rather
    than an exception, so post-mortem rows can still be written.
    """
    grid = state.grid
    gamma = params.gamma
    with np.errstate(over="ignore", invalid="ignore"):
        theta_field = state.theta()
        norms = {}
        for i in (0, 1):
            norms[f"rho{i + 1}_l2gamma"] = lp_norm(state.rho[i], 2.0 * gamma)
            norms[f"u{i + 1}_w12"] = w12_norm(state.u[i])
            grad_rho = gradient(state.rho[i], "neumann")
            p_grad = 6.0 * gamma / (gamma + 3.0)
            norms[f"eps_grad_rho{i + 1}"] = state.eps * lp_norm(grad_rho, p_grad)
        norms["theta_l3m"] = lp_norm(theta_field, 3.0 * params.m)
        norms["grad_theta_l2"] = lp_norm(gradient(theta_field, "extrapolate"), 2)
        s_trace = boundary_trace(state.s)
        norms["boundary_exp_s"] = boundary_integral(
            grid, np.exp(s_trace) + np.exp(-s_trace))
        norms["grad_s_l2"] = lp_norm(gradient(state.s, "extrapolate"), 2)
        norms["theta_boundary_l2m"] = boundary_lp_norm(
            grid, np.exp(s_trace), 2.0 * params.m)

        try:
            wk = weak_residuals(state, params, visc)
            ident = identity_residuals(state, params, visc)
        except (ValueError, OverflowError, FloatingPointError):
            # divergent states produce inf/nan terms; keep the row writable
            wk = (math.inf,) * 3
            ident = (math.inf,) * 3
        residuals = {
            "weak_mass": wk[0], "weak_momentum": wk[1], "weak_energy": wk[2],
            "mech_balance": ident[0], "entropy_balance": ident[1],
            "kirchhoff_residual": ident[2],
        }
        renorm = (renormalized_integral(state, 1), renormalized_integral(state, 2))
        flux = tuple(effective_viscous_flux(state, params, visc, i).values
                     for i in (1, 2))
        flux_diff = [math.nan, math.nan]
        if prev_flux is not None and prev_flux[0] is not None:
            mask = interior_mask(grid, 2)
            cv = grid.cell_volume
            for i in (0, 1):
                d = (flux[i] - prev_flux[i])[mask]
                flux_diff[i] = math.sqrt(math.fsum((d * d).reshape(-1)) * cv)
    return MonitorRow(eps=state.eps, lam=state.lam, norms=norms,
                      residuals=residuals, renorm=renorm,
                      flux_fields=flux, flux_diff=tuple(flux_diff),
                      fp_iters=fp_iters, converged=converged)
