import math

import numpy as np
import pytest

from bifluid.errors import DomainError
from bifluid.fixed_point import (
    ContinuationConfig,
    SourceTerms,
    apply_fixed_point_map,
    assemble_heat_boundary,
    assemble_heat_coefficient,
    assemble_heat_source,
    assemble_momentum_rhs,
    dissipation_density,
    initial_state,
    run_continuation,
    solve_homotopy,
    stable_damping,
)
from bifluid.grid import Field, VectorField, build_grid
from bifluid.model import MixtureParams, VISCOSITY_PRESETS, ViscosityMatrices
from bifluid.operators import grad_vector, lp_norm, w12_norm
from bifluid.verification import manufactured_case

VISC = VISCOSITY_PRESETS["symmetric_coupling"]


def test_config_validation():
    with pytest.raises(ValueError):
        ContinuationConfig(lambda_schedule=(0.5, 0.25, 1.0))
    with pytest.raises(ValueError):
        ContinuationConfig(lambda_schedule=(0.5, 0.9))
    with pytest.raises(ValueError):
        ContinuationConfig(eps_schedule=(0.25, 0.5))
    with pytest.raises(ValueError):
        ContinuationConfig(damping=0.0)


def test_initial_state_matches_constant_equilibrium():
    g = build_grid(3, (1, 1, 1), (6, 6, 6))
    st = initial_state(g, MixtureParams(), eps=1.0)
    assert np.all(st.s.values == 0.0)
    assert np.all(st.rho[0].values == 1.0)
    # nontrivial boundary temperature: level solves the scalar balance
    params2 = MixtureParams(theta_hat=2.0)
    st2 = initial_state(g, params2, eps=0.5)
    s0 = float(st2.s.values.reshape(-1)[0])
    th = math.exp(s0)
    balance = 0.5 * s0 + (1.0 + th ** (params2.m - 1.0)) * (th - 2.0)
    assert abs(balance) < 1e-12
    assert 0.0 < s0 < math.log(2.0)


def test_equilibrium_is_exact_fixed_point():
    g = build_grid(3, (1, 1, 1), (8, 8, 8))
    params = MixtureParams()
    st = initial_state(g, params, eps=0.5)
    res = apply_fixed_point_map(st, params, VISC)
    assert w12_norm(res.u[0]) + w12_norm(res.u[1]) <= 1e-10
    assert lp_norm(res.s, 2) <= 1e-10
    assert np.abs(res.rho[0].values - 1.0).max() <= 1e-9


def test_assembled_pieces_at_equilibrium():
    g = build_grid(2, (1, 1), (8, 8))
    params = MixtureParams()
    eps = 0.3
    st = initial_state(g, params, eps=eps)
    r = Field.constant(g, 1.0)
    rhs = assemble_momentum_rhs(1, st.u, st.s, r, params, VISC, eps)
    assert np.abs(rhs.values).max() <= 1e-10
    d = assemble_heat_source(st.u, st.s, (r, r), params, VISC, eps)
    assert np.abs(d.values).max() <= 1e-12
    b = assemble_heat_coefficient(st.s, params, eps)
    assert np.abs(b.values - 4.0 * (eps + 1.0)).max() <= 1e-14
    t = assemble_heat_boundary(st.s, params)
    assert np.abs(t).max() <= 1e-14


def test_constant_forcing_drops_to_density_times_force():
    g = build_grid(2, (1, 1), (8, 8))

    def f(pts):
        out = np.zeros_like(pts)
        out[:, 0] = 0.7
        return out

    params = MixtureParams(forcing=(f, f))
    st = initial_state(g, params, eps=0.4)
    r = Field.constant(g, 1.3)
    rhs = assemble_momentum_rhs(1, st.u, st.s, r, params, VISC, 0.4)
    assert np.abs(rhs.values[0] - 1.3 * 0.7).max() <= 1e-12
    assert np.abs(rhs.values[1]).max() <= 1e-12


def test_friction_term_vanishes_for_equal_velocities():
    g = build_grid(2, (1, 1), (8, 8))
    rng = np.random.default_rng(0)
    u = VectorField(g, rng.normal(size=(2,) + g.cells))
    s = Field.constant(g, 0.0)
    r = Field.constant(g, 1.0)
    d_small = assemble_heat_source((u, u), s, (r, r),
                                   MixtureParams(a=1e-6), VISC, 0.5)
    d_large = assemble_heat_source((u, u), s, (r, r),
                                   MixtureParams(a=1e6), VISC, 0.5)
    assert np.array_equal(d_small.values, d_large.values)


def test_dissipation_cellwise_nonnegative():
    rng = np.random.default_rng(3)
    g = build_grid(2, (1, 1), (8, 8))
    for visc in VISCOSITY_PRESETS.values():
        u1 = VectorField(g, rng.normal(size=(2,) + g.cells))
        u2 = VectorField(g, rng.normal(size=(2,) + g.cells))
        val = dissipation_density(grad_vector(u1, "dirichlet"),
                                  grad_vector(u2, "dirichlet"), visc)
        assert val.min() >= -1e-12


def test_momentum_rhs_matches_analytic_oracle():
    """Assembled right-hand side vs the case's exact momentum residual.

    The assembled form equals minus the non-viscous part of the momentum
    residual; agreement must improve under refinement.
    """
    case = manufactured_case("trig2d")
    eps = 0.5
    errs = []
    for n in (12, 24):
        g = case.grid_for(n)
        pts = g.cell_centers()
        st = case.sample(g, eps)
        worst = 0.0
        for i in (1, 2):
            r = st.rho[i - 1]
            got = assemble_momentum_rhs(i, st.u, st.s, r, case.params(),
                                        case.visc, eps)
            exact = -(case.momentum_source(i, eps, pts) - case.lame_rhs(i, pts))
            exact = exact.T.reshape((g.dim,) + g.cells)
            diff = np.abs(got.values - exact)[:, 2:-2, 2:-2]
            worst = max(worst, float(diff.max()))
        errs.append(worst)
    assert errs[1] <= errs[0] / 2.8  # roughly second order in the interior


def test_heat_source_matches_analytic_oracle():
    case = manufactured_case("trig2d")
    eps = 0.5
    errs = []
    for n in (12, 24):
        g = case.grid_for(n)
        pts = g.cell_centers()
        st = case.sample(g, eps)
        got = assemble_heat_source(st.u, st.s, st.rho, case.params(),
                                   case.visc, eps)
        exact = case._heat_production(eps, pts).reshape(g.cells)
        diff = np.abs(got.values - exact)[2:-2, 2:-2]
        errs.append(float(diff.max()))
    assert errs[1] <= errs[0] / 2.8


def test_map_response_linear_in_small_forcing():
    g = build_grid(2, (1, 1), (10, 10))
    params = MixtureParams()
    st = initial_state(g, params, eps=1.0)
    norms = []
    for mag in (0.05, 0.1):
        def f(pts, mag=mag):
            out = np.zeros_like(pts)
            out[:, 0] = mag
            return out

        p = MixtureParams(forcing=(f, f))
        res = apply_fixed_point_map(st, p, VISC)
        norms.append(w12_norm(res.u[0]) + w12_norm(res.u[1]))
    assert norms[1] == pytest.approx(2.0 * norms[0], rel=0.05)


def test_homotopy_converges_from_noise():
    rng = np.random.default_rng(17)
    g = build_grid(3, (1, 1, 1), (8, 8, 8))
    params = MixtureParams()
    st = initial_state(g, params, eps=1.0)
    st.u[0].values += 0.1 * rng.normal(size=st.u[0].values.shape)
    st.u[1].values += 0.1 * rng.normal(size=st.u[1].values.shape)
    st.s.values += 0.1 * rng.normal(size=st.s.values.shape)
    cfg = ContinuationConfig()
    final, report = solve_homotopy(st, cfg, params, VISC)
    assert report.converged
    assert w12_norm(final.u[0]) <= 1e-5 and w12_norm(final.u[1]) <= 1e-5
    assert lp_norm(final.s, 2) <= 1e-5


def test_damping_choice_does_not_move_the_fixed_point():
    g = build_grid(2, (1, 1), (8, 8))

    def f(pts):
        out = np.zeros_like(pts)
        out[:, 0] = 0.05
        return out

    params = MixtureParams(forcing=(f, f))
    states = []
    for damping in (0.5, 1.0):
        cfg = ContinuationConfig(damping=damping, fp_tol=1e-8,
                                 fp_max_iters=2000, eps_schedule=(1.0,))
        st = initial_state(g, params, eps=1.0)
        final, report = solve_homotopy(st, cfg, params, VISC)
        assert report.converged
        states.append(final)
    diff = sum(w12_norm(VectorField(g, states[0].u[k].values
                                    - states[1].u[k].values)) for k in (0, 1))
    diff += lp_norm(Field(g, states[0].s.values - states[1].s.values), 2)
    assert diff <= 10 * 1e-8 * (1.0 + w12_norm(states[0].u[0]))


def test_damping_cap_respects_stability_bound():
    params = MixtureParams()  # theta_hat = 1 -> slope 2
    cfg = ContinuationConfig(damping=1.0, damping_safety=0.8)
    w = stable_damping(cfg, params, eps=1.0, lam=1.0)
    assert w == pytest.approx(0.8 * 2.0 / 3.0)
    w_small = stable_damping(cfg, params, eps=1.0 / 64.0, lam=1.0)
    assert w_small < 2.0 * (1.0 / 64.0) / (1.0 / 64.0 + 2.0)


def test_inadmissible_viscosity_rejected_before_iteration():
    g = build_grid(2, (1, 1), (8, 8))
    params = MixtureParams()
    st = initial_state(g, params, eps=1.0)
    bad = ViscosityMatrices(lam=np.zeros((2, 2)), mu=[[1.0, 1.5], [1.5, 1.0]])
    with pytest.raises(DomainError):
        solve_homotopy(st, ContinuationConfig(), params, bad)


def test_overflow_is_signaled_and_recorded():
    g = build_grid(2, (1, 1), (8, 8))
    params = MixtureParams()
    st = initial_state(g, params, eps=1.0)
    st.s.values[:] = 400.0  # m * s beyond exp range
    with pytest.raises(OverflowError):
        apply_fixed_point_map(st, params, VISC)
    final, report = solve_homotopy(st, ContinuationConfig(), params, VISC)
    assert not report.converged
    assert any("OverflowError" in (stage.failure or "")
               for stage in report.stages)
    assert final.is_finite()


def test_continuation_rerun_is_bit_identical():
    g = build_grid(2, (1, 1), (8, 8))

    def f(pts):
        out = np.zeros_like(pts)
        out[:, 0] = 0.1
        return out

    params = MixtureParams(forcing=(f, f))
    cfg = ContinuationConfig(eps_schedule=(1.0, 0.5), fp_max_iters=2000)
    r1 = run_continuation(cfg, params, VISC, g)
    r2 = run_continuation(cfg, params, VISC, g)
    for a, b in zip(r1.states, r2.states):
        assert np.array_equal(a.s.values, b.s.values)
        assert np.array_equal(a.u[0].values, b.u[0].values)
        assert np.array_equal(a.rho[1].values, b.rho[1].values)
    for st in r1.states:  # accepted stages keep densities nonnegative
        assert min(st.rho[0].values.min(), st.rho[1].values.min()) >= 0.0


def test_converged_state_satisfies_fixed_point_equation():
    g = build_grid(2, (1, 1), (10, 10))

    def f(pts):
        out = np.zeros_like(pts)
        out[:, 0] = 0.1
        return out

    params = MixtureParams(forcing=(f, f))
    cfg = ContinuationConfig(eps_schedule=(0.5,), fp_max_iters=2000)
    result = run_continuation(cfg, params, VISC, g)
    assert result.converged
    state = result.states[-1]
    res = apply_fixed_point_map(state, params, VISC, cfg.solve_spec)
    lam = state.lam
    num = sum(w12_norm(VectorField(g, lam * res.u[k].values - state.u[k].values))
              for k in (0, 1))
    num += lp_norm(Field(g, lam * res.s.values - state.s.values), 2)
    scale = 1.0 + sum(w12_norm(state.u[k]) for k in (0, 1)) + lp_norm(state.s, 2)
    assert num / scale < cfg.fp_tol


def test_sources_shift_the_fixed_point():
    g = build_grid(2, (1, 1), (8, 8))
    params = MixtureParams()
    st = initial_state(g, params, eps=0.5)
    src = SourceTerms(energy=Field.constant(g, 0.1))
    res = apply_fixed_point_map(st, params, VISC, sources=src)
    assert lp_norm(res.s, 2) > 1e-4  # the energy source heats the mixture
