"""Damped fixed-point continuation for the regularized mixture problem.

One application of the map: solve the regularized continuity problem for
each density from the current velocities, assemble momentum right-hand
sides and solve the coupled viscous system, assemble the heat source /
coefficient / boundary data and solve the Robin problem for the entropy
variable (temperature is exp of it).  The homotopy multiplies the map
output by the continuation weight and under-relaxes; the regularization
parameter is then driven down a geometric schedule with warm starts.

The under-relaxation is capped per stage: the boundary data feed back into
the entropy solve with gain ~ kappa/eps (kappa the boundary-exchange slope),
so a stable plain iteration needs omega < 2*eps/(eps + lam*kappa).  The cap
keeps the configured damping whenever that is already stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, NonconvergenceError
from .grid import Field, Grid, TensorField, VectorField
from .model import MixtureParams, ViscosityMatrices, validate_parameters
from .operators import (
    boundary_trace,
    convect,
    divergence,
    grad_vector,
    gradient,
    tensor_divergence,
    w12_norm,
    scalar_w12_norm,
)
from .solvers import LinearSolveSpec, solve_continuity, solve_lame, solve_robin

_EXP_MAX = 700.0


@dataclass
class MixtureState:
    """Discrete solver state: densities, velocities, entropy variable, tags."""

    grid: Grid
    rho: tuple[Field, Field]
    u: tuple[VectorField, VectorField]
    s: Field
    eps: float
    lam: float

    def copy(self) -> "MixtureState":
        return MixtureState(self.grid, (self.rho[0].copy(), self.rho[1].copy()),
                            (self.u[0].copy(), self.u[1].copy()),
                            self.s.copy(), self.eps, self.lam)

    def theta(self) -> Field:
        with np.errstate(over="ignore"):
            return Field(self.grid, np.exp(self.s.values))

    def is_finite(self) -> bool:
        return (all(np.isfinite(r.values).all() for r in self.rho)
                and all(np.isfinite(v.values).all() for v in self.u)
                and bool(np.isfinite(self.s.values).all()))


def constant_entropy_level(params: MixtureParams, eps: float,
                           theta_ref: float) -> float:
    """Root of eps*s + L(e^s)(e^s - theta_ref) = 0 by Newton iteration.

    With zero forcing and constant boundary temperature the spatially
    constant state at this level is an exact fixed point; for theta_ref = 1
    the root is exactly 0.
    """
    if theta_ref == 1.0:
        return 0.0
    m = params.m
    s = math.log(theta_ref)
    for _ in range(80):
        th = math.exp(s)
        ell = 1.0 + th ** (m - 1.0)
        g = eps * s + ell * (th - theta_ref)
        dg = eps + (m - 1.0) * th ** (m - 1.0) * (th - theta_ref) + ell * th
        step = g / dg
        s -= step
        if abs(step) < 1e-15:
            break
    return s


def initial_state(grid: Grid, params: MixtureParams, eps: float) -> MixtureState:
    """Constant start state: zero velocity, uniform densities, scalar entropy.

    The entropy level solves the spatially constant boundary balance, which
    reduces to the constant equilibrium when the boundary temperature is 1.
    """
    centers = grid.boundary_face_centers()
    theta_ref = float(np.mean(params.theta_hat_values(centers)))
    s0 = constant_entropy_level(params, eps, theta_ref)
    rho = tuple(Field.constant(grid, M / grid.volume) for M in params.masses)
    u = (VectorField.zero(grid), VectorField.zero(grid))
    return MixtureState(grid, rho, u, Field.constant(grid, s0), eps, 0.0)


@dataclass
class ContinuationConfig:
    """Schedules and tolerances of the homotopy/continuation driver."""

    lambda_schedule: tuple = (0.1, 0.25, 0.5, 0.75, 1.0)
    warm_lambda_schedule: tuple = (1.0,)
    eps_schedule: tuple = (1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625)
    damping: float = 0.5
    damping_safety: float = 0.8
    fp_tol: float = 1e-6
    fp_max_iters: int = 500
    solve_spec: LinearSolveSpec = field(default_factory=LinearSolveSpec)
    halt_on_failure: bool = False

    def __post_init__(self):
        for sched in (self.lambda_schedule, self.warm_lambda_schedule):
            lam = tuple(float(x) for x in sched)
            if not lam or lam[-1] != 1.0 or any(b <= a for a, b in zip(lam, lam[1:])):
                raise ValueError("lambda schedules must increase and end at 1")
            if any(not 0.0 < x <= 1.0 for x in lam):
                raise ValueError("lambda values must lie in (0, 1]")
        eps = tuple(float(x) for x in self.eps_schedule)
        if not eps or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps schedule must decrease")
        if any(not 0.0 < x <= 1.0 for x in eps):
            raise ValueError("eps values must lie in (0, 1]")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


@dataclass
class SourceTerms:
    """Optional manufactured sources injected into the sub-problems."""

    continuity: tuple = (None, None)
    momentum: tuple = (None, None)
    energy: Field | None = None
    boundary: np.ndarray | None = None
    theta_hat: object = None


# -- right-hand-side assembly ---------------------------------------------------


def assemble_momentum_rhs(i: int, u: tuple, s: Field, r_i: Field, params: MixtureParams,
                          visc: ViscosityMatrices, eps: float) -> VectorField:
    """Right-hand side driving the coupled viscous solve for component i.

    Gathers the regularization drag, skew-symmetrized convection, pressure
    and entropy-pressure gradients, interphase friction, and forcing, all at
    full strength (the homotopy weight multiplies the solve output).
    """
    grid = r_i.grid
    w_i = u[i - 1]
    rv = r_i.values
    vals = np.zeros((grid.dim,) + grid.cells)

    mean_density = params.masses[i - 1] / grid.volume
    vals -= (eps / 2.0) * (rv + mean_density) * w_i.values
    vals -= 0.5 * rv * convect(w_i).values

    outer = np.einsum("k...,l...->kl...", w_i.values, w_i.values)
    vals -= 0.5 * tensor_divergence(TensorField(grid, rv * outer), "dirichlet").values

    grad_r = gradient(r_i, "neumann").values
    vals -= params.gamma * rv ** (params.gamma - 1.0) * grad_r

    if float(np.max(s.values)) > _EXP_MAX:
        raise OverflowError("entropy variable too large for the pressure term")
    es = np.exp(s.values)
    vals -= es * grad_r + rv * es * gradient(s, "extrapolate").values

    sign = (-1.0) ** i
    vals += sign * params.a * (u[0].values - u[1].values)

    f = params.force_values(i, grid.cell_centers())
    vals += rv * f.T.reshape((grid.dim,) + grid.cells)
    return VectorField(grid, vals)


def assemble_heat_source(u: tuple, s: Field, r: tuple, params: MixtureParams,
                         visc: ViscosityMatrices, eps: float) -> Field:
    """Full-strength heat-equation source for the entropy solve."""
    grid = s.grid
    es = np.exp(s.values)
    out = np.zeros(grid.cells)
    grads = []
    for i in (0, 1):
        rv = r[i].values
        flux = VectorField(grid, rv * es * u[i].values)
        out -= divergence(flux, "dirichlet").values
        out -= rv * es * divergence(u[i], "dirichlet").values
        grads.append(grad_vector(u[i], "dirichlet"))
    diff = u[0].values - u[1].values
    out += params.a * np.sum(diff * diff, axis=0)
    out += dissipation_density(grads[0], grads[1], visc)
    for i in (0, 1):
        gr = gradient(r[i], "neumann").values
        out += (eps * params.gamma) * r[i].values ** (params.gamma - 2.0) \
            * np.sum(gr * gr, axis=0)
    return Field(grid, out)


def dissipation_density(g1: TensorField, g2: TensorField,
                        visc: ViscosityMatrices) -> np.ndarray:
    """Cellwise viscous dissipation from two velocity gradient tensors."""
    grid = g1.grid
    out = np.zeros(grid.cells)
    tensors = (g1.values, g2.values)
    for i in (0, 1):
        stress = np.zeros_like(tensors[i])
        for j in (0, 1):
            g = tensors[j]
            div = np.trace(g, axis1=0, axis2=1)
            sym = 0.5 * (g + np.swapaxes(g, 0, 1))
            stress += visc.lam[i, j] * div * np.eye(grid.dim).reshape(
                (grid.dim, grid.dim) + (1,) * grid.dim)
            stress += 2.0 * visc.mu[i, j] * sym
        out += np.sum(stress * tensors[i], axis=(0, 1))
    return out


def assemble_heat_coefficient(s: Field, params: MixtureParams, eps: float) -> Field:
    """Diffusion coefficient 2(1 + theta^m)(eps + theta) in entropy variables."""
    top = float(np.max(s.values)) if s.values.size else 0.0
    if params.m * top > _EXP_MAX or top > _EXP_MAX:
        raise OverflowError("entropy variable too large for the heat coefficient")
    es = np.exp(s.values)
    esm = np.exp(params.m * s.values)
    return Field(s.grid, 2.0 * (1.0 + esm) * (eps + es))


def assemble_heat_boundary(s: Field, params: MixtureParams,
                           theta_hat_override=None) -> np.ndarray:
    """Boundary exchange data -(1 + theta^(m-1))(theta - theta_hat) at faces."""
    grid = s.grid
    trace = boundary_trace(s)
    top = float(np.max(trace)) if trace.size else 0.0
    if params.m * abs(top) > _EXP_MAX:
        raise OverflowError("entropy trace too large for the boundary data")
    th = np.exp(trace)
    centers = grid.boundary_face_centers()
    if theta_hat_override is None:
        that = params.theta_hat_values(centers)
    elif callable(theta_hat_override):
        that = np.asarray(theta_hat_override(centers), dtype=float)
    else:
        that = np.full(centers.shape[0], float(theta_hat_override))
    return -(1.0 + th ** (params.m - 1.0)) * (th - that)


@dataclass
class MapResult:
    u: tuple[VectorField, VectorField]
    s: Field
    rho: tuple[Field, Field]
    solver_iterations: int


def apply_fixed_point_map(state: MixtureState, params: MixtureParams,
                          visc: ViscosityMatrices,
                          spec: LinearSolveSpec = LinearSolveSpec(),
                          sources: SourceTerms | None = None,
                          guess: MapResult | None = None) -> MapResult:
    """One full application of the composed map at unit homotopy weight.

    Returns the new velocity pair and entropy field along with the densities
    produced on the way.  Deterministic for fixed inputs; initial guesses
    only warm-start the inner Krylov solves.
    """
    src = sources or SourceTerms()
    eps = state.eps
    top = float(np.max(state.s.values))
    if (params.m + 1.0) * top > _EXP_MAX or 2.0 * top > _EXP_MAX:
        raise OverflowError(
            "entropy variable too large: exp terms exceed floating range")
    iters = 0
    rho_new = []
    for i in (1, 2):
        r, st = solve_continuity(state.u[i - 1], eps, params.masses[i - 1], spec,
                                 source=src.continuity[i - 1],
                                 guess=None if guess is None else guess.rho[i - 1])
        rho_new.append(r)
        iters += st.iterations
    g = []
    for i in (1, 2):
        gi = assemble_momentum_rhs(i, state.u, state.s, rho_new[i - 1],
                                   params, visc, eps)
        if src.momentum[i - 1] is not None:
            gi = VectorField(state.grid, gi.values + src.momentum[i - 1].values)
        g.append(gi)
    u_new, st = solve_lame(g[0], g[1], visc, spec,
                           guess=None if guess is None else guess.u)
    iters += st.iterations

    d = assemble_heat_source(state.u, state.s, tuple(rho_new), params, visc, eps)
    if src.energy is not None:
        d = Field(state.grid, d.values + src.energy.values)
    b = assemble_heat_coefficient(state.s, params, eps)
    t = assemble_heat_boundary(state.s, params, theta_hat_override=src.theta_hat)
    if src.boundary is not None:
        t = t + src.boundary
    s_new, st = solve_robin(d, b, t, eps, spec,
                            guess=None if guess is None else guess.s)
    iters += st.iterations
    return MapResult(u=u_new, s=s_new, rho=(rho_new[0], rho_new[1]),
                     solver_iterations=iters)


# -- homotopy and continuation ---------------------------------------------------


@dataclass
class StageReport:
    eps: float
    lam: float
    iterations: int
    final_update: float
    omega: float
    converged: bool
    failure: str | None = None


@dataclass
class HomotopyReport:
    stages: list[StageReport]

    @property
    def converged(self) -> bool:
        return all(st.converged for st in self.stages)


def boundary_feedback_slope(params: MixtureParams) -> float:
    """Upper estimate of |dT/ds| near the boundary balance point."""
    th = max(params.theta_hat_max(), 1.0)
    return (1.0 + th ** (params.m - 1.0)) * th


def stable_damping(cfg: ContinuationConfig, params: MixtureParams,
                   eps: float, lam: float) -> float:
    kappa = boundary_feedback_slope(params)
    cap = cfg.damping_safety * 2.0 * eps / (eps + lam * kappa)
    return min(cfg.damping, cap)


def _update_norm(u_new, s_new, du, ds) -> tuple[float, float]:
    change = sum(w12_norm(d) for d in du) + scalar_w12_norm(ds)
    scale = sum(w12_norm(v) for v in u_new) + scalar_w12_norm(s_new)
    return change, scale


def solve_homotopy(init: MixtureState, cfg: ContinuationConfig,
                   params: MixtureParams, visc: ViscosityMatrices,
                   sources: SourceTerms | None = None,
                   lambda_schedule: tuple | None = None) -> tuple[MixtureState, HomotopyReport]:
    """Drive the damped iteration up the homotopy ladder at fixed eps.

    Each stage iterates x <- (1-omega) x + omega * lam * Psi(x) until the
    relative residual of the weighted map (discrete H1 norms of
    lam*Psi(x) - x over 1 + the state norm) drops below fp_tol, so converged
    states satisfy the fixed-point equation to fp_tol regardless of the
    damping; stages warm-start the next weight, and the final-weight state
    is returned with densities recomputed from the final velocities.
    """
    report = validate_parameters(params, visc)
    if not report.passed:
        raise DomainError("parameter validation failed:\n" + str(report))
    schedule = lambda_schedule if lambda_schedule is not None else cfg.lambda_schedule
    eps = init.eps
    state = init.copy()
    stages = []
    last_map = None
    for lam in schedule:
        omega0 = stable_damping(cfg, params, eps, lam)
        omega = omega0
        stage_start = state.copy()
        attempt = 0
        while True:
            state, stage, last_map = _iterate_stage(
                stage_start.copy(), lam, omega, cfg, params, visc, sources, last_map)
            if stage.converged or stage.failure != "diverging" or attempt >= 3:
                break
            attempt += 1
            omega = 0.5 * omega
            last_map = None
        stages.append(stage)
        if not stage.converged and cfg.halt_on_failure:
            break
    return state, HomotopyReport(stages)


def _iterate_stage(state, lam, omega, cfg, params, visc, sources, last_map):
    eps = state.eps
    best = math.inf
    update = math.inf
    failure = None
    iters = 0
    for iters in range(1, cfg.fp_max_iters + 1):
        try:
            res = apply_fixed_point_map(state, params, visc, cfg.solve_spec,
                                        sources, guess=last_map)
        except (OverflowError, NonconvergenceError) as exc:
            failure = f"{type(exc).__name__}: {exc}"
            break
        last_map = res
        # residual of the weighted map; the damped step is omega times it
        du = tuple(VectorField(state.grid,
                               lam * res.u[k].values - state.u[k].values)
                   for k in (0, 1))
        ds = Field(state.grid, lam * res.s.values - state.s.values)
        u_new = tuple(
            VectorField(state.grid, state.u[k].values + omega * du[k].values)
            for k in (0, 1))
        s_new = Field(state.grid, state.s.values + omega * ds.values)
        change, scale = _update_norm(u_new, s_new, du, ds)
        update = change / (1.0 + scale)
        state = MixtureState(state.grid, res.rho, u_new, s_new, eps, lam)
        if not state.is_finite() or not math.isfinite(update):
            failure = "diverging"
            break
        best = min(best, update)
        if update < cfg.fp_tol:
            break
        if update > 1e4 * max(best, cfg.fp_tol):
            failure = "diverging"
            break
    converged = failure is None and update < cfg.fp_tol
    if failure is None and not converged:
        failure = "fp_max_iters exceeded"
    # densities consistent with the final velocities
    if state.is_finite():
        try:
            rho = []
            for i in (1, 2):
                r, _ = solve_continuity(state.u[i - 1], eps, params.masses[i - 1],
                                        cfg.solve_spec,
                                        source=(sources.continuity[i - 1]
                                                if sources else None))
                rho.append(r)
            state = MixtureState(state.grid, (rho[0], rho[1]), state.u, state.s,
                                 eps, lam)
        except NonconvergenceError as exc:
            failure = failure or f"NonconvergenceError: {exc}"
            converged = False
    stage = StageReport(eps=eps, lam=lam, iterations=iters, final_update=update,
                        omega=omega, converged=converged, failure=failure)
    return state, stage, last_map


@dataclass
class ContinuationResult:
    states: list[MixtureState]
    reports: list[HomotopyReport]

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.reports)


def run_continuation(cfg: ContinuationConfig, params: MixtureParams,
                     visc: ViscosityMatrices, grid: Grid,
                     sources: SourceTerms | None = None,
                     stage_callback=None) -> ContinuationResult:
    """Drive the regularization parameter down its schedule with warm starts.

    The first stage starts from the constant state and climbs the full
    homotopy ladder; later stages restart from the previous solution and use
    the warm ladder (by default going straight to full weight).  Failures are
    recorded per stage; the run proceeds or halts per halt_on_failure.
    """
    states = []
    reports = []
    prev = None
    for idx, eps in enumerate(cfg.eps_schedule):
        if prev is None:
            init = initial_state(grid, params, eps)
            schedule = cfg.lambda_schedule
        else:
            init = replace(prev.copy(), eps=eps)
            schedule = cfg.warm_lambda_schedule
        state, report = solve_homotopy(init, cfg, params, visc, sources,
                                       lambda_schedule=schedule)
        states.append(state)
        reports.append(report)
        prev = state
        if stage_callback is not None:
            stage_callback(idx, state, report)
        if not report.converged and cfg.halt_on_failure:
            break
    return ContinuationResult(states=states, reports=reports)
