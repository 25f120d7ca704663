import numpy as np
import pytest

from bifluid.analytic import bump, monomial, sine
from bifluid.verification import (
    StudyReport,
    convergence_study,
    manufactured_case,
)


def test_analytic_algebra_derivatives_match_fd():
    rng = np.random.default_rng(4)
    d = 2
    f = (1.5 * (sine(d, 0, 1) * sine(d, 1, 2)) + monomial(d, (2, 1))).exp()
    pts = rng.uniform(0.2, 0.8, size=(20, d))
    h = 1e-5
    for ax in range(d):
        shifted_p = pts.copy()
        shifted_m = pts.copy()
        shifted_p[:, ax] += h
        shifted_m[:, ax] -= h
        fd = (f.value(shifted_p) - f.value(shifted_m)) / (2 * h)
        assert np.abs(f.gradient(pts)[:, ax] - fd).max() <= 1e-5 * (
            1 + np.abs(fd).max())
        fd2 = (f.value(shifted_p) - 2 * f.value(pts) + f.value(shifted_m)) / h**2
        assert np.abs(f.hessian(pts)[:, ax, ax] - fd2).max() <= 1e-4 * (
            1 + np.abs(fd2).max())


def test_bump_has_compact_support_and_smooth_edges():
    d = 2
    b = bump(d, (0.5, 0.5), (0.2, 0.2))
    inside = np.array([[0.5, 0.5]])
    outside = np.array([[0.75, 0.5], [0.5, 0.95], [0.29, 0.29]])
    assert b.value(inside)[0] == pytest.approx(1.0)
    assert np.all(b.value(outside) == 0.0)
    assert np.all(b.gradient(outside) == 0.0)
    near_edge = np.array([[0.6999, 0.5]])
    assert b.value(near_edge)[0] >= 0.0


def test_case_registry():
    with pytest.raises(KeyError):
        manufactured_case("nope")
    for name in ("trig2d", "trig3d", "poly3d"):
        case = manufactured_case(name)
        assert case.name == name


def test_shipped_sources_pass_spot_check():
    for name in ("trig2d", "trig3d", "poly3d"):
        assert manufactured_case(name).spot_check() <= 1e-8, name


def test_poly_case_velocity_trace_exactly_zero():
    case = manufactured_case("poly3d")
    grid = case.grid_for(6)
    pts = grid.boundary_face_centers()
    for v in case.u:
        assert np.abs(v.value(pts)).max() == 0.0


def test_case_masses_match_integrals():
    for name in ("trig2d", "trig3d", "poly3d"):
        case = manufactured_case(name)
        grid = case.grid_for(24 if case.dim == 2 else 12)
        pts = grid.cell_centers()
        for i in (0, 1):
            approx = float(np.sum(case.rho[i].value(pts))) * grid.cell_volume
            assert approx == pytest.approx(case.masses[i], rel=1e-3)


def test_continuity_exact_for_zero_transport():
    case = manufactured_case("trig2d")
    # with w = 0 and no source, the solution is constant: errors at rounding
    from bifluid.grid import Field, VectorField
    from bifluid.operators import lp_norm
    from bifluid.solvers import solve_continuity

    errs = []
    for n in (8, 16, 32):
        g = case.grid_for(n)
        r, _ = solve_continuity(VectorField.zero(g), 0.5, 1.0)
        errs.append(lp_norm(Field(g, r.values - 1.0), 2))
    assert max(errs) <= 1e-11


def test_study_reports_and_order_stability():
    case = manufactured_case("trig2d")
    rep = convergence_study(case, "robin", (8, 16, 32))
    assert isinstance(rep, StudyReport)
    orders = rep.orders["s"]
    assert orders[-1] >= 1.9
    assert abs(orders[-1] - orders[-2]) <= 0.3  # stable estimates
    data = rep.to_json_dict()
    assert data["target"] == "robin" and data["grids"] == [8, 16, 32]
    with pytest.raises(ValueError):
        convergence_study(case, "spectral", (8, 16))
    with pytest.raises(ValueError):
        convergence_study(case, "robin", (8,))


def test_lame_study_order():
    case = manufactured_case("trig2d")
    rep = convergence_study(case, "lame", (8, 16, 32))
    assert min(rep.orders["u1"][-1], rep.orders["u2"][-1]) >= 1.9
    assert abs(rep.orders["u1"][-1] - rep.orders["u1"][-2]) <= 0.3


def test_continuity_study_order():
    case = manufactured_case("trig2d")
    rep = convergence_study(case, "continuity", (8, 16, 32))
    assert rep.orders["rho1"][-1] >= 0.9  # upwind transport caps the order


def test_poly_case_studies():
    case = manufactured_case("poly3d")
    rep = convergence_study(case, "lame", (8, 16))
    assert min(rep.orders["u1"][-1], rep.orders["u2"][-1]) >= 1.7
    rep = convergence_study(case, "continuity", (8, 16))
    assert rep.orders["rho1"][-1] >= 0.9


def test_constant_solution_study_reports_exact():
    from bifluid.analytic import AnalyticVector, const
    from bifluid.model import VISCOSITY_PRESETS
    from bifluid.verification import ManufacturedCase

    d = 2
    zero = const(d, 0.0)
    still = ManufacturedCase(
        name="still2d", dim=d, extents=(1.0, 1.0),
        rho=(const(d, 1.5), const(d, 0.5)),
        u=(AnalyticVector([zero, zero]), AnalyticVector([zero, zero])),
        s=const(d, 0.0), masses=(1.5, 0.5),
        visc=VISCOSITY_PRESETS["symmetric_coupling"])
    rep = convergence_study(still, "continuity", (8, 16, 32))
    assert all(o == "exact" for o in rep.orders["rho1"])
