import math

import numpy as np
import pytest

from bifluid.errors import DomainError
from bifluid.model import (
    MixtureParams,
    VISCOSITY_PRESETS,
    ViscosityMatrices,
    entropy_production_density,
    internal_energy,
    kirchhoff_potential,
    momentum_exchange,
    pressure,
    proven_heat_exponent_bound,
    strain_tensor,
    thermal_coefficients,
    total_energy,
    validate_parameters,
    viscous_stress,
)


def test_pressure_values():
    assert pressure(0.0, 5.0, 3.0) == 0.0
    assert pressure(1.0, 0.5, 4.0) == 1.5
    assert pressure(2.0, 1.5, 3.0) == 11.0
    with pytest.raises(DomainError):
        pressure(-1.0, 1.0, 3.0)


def test_energy_values():
    assert internal_energy(0.0, 1.0, 3.0) == 1.0
    assert total_energy(1.0, 0.0, 0.0, 3.0) == 0.5
    assert total_energy(2.0, 4.0, 1.0, 3.0) == 5.0
    with pytest.raises(DomainError):
        internal_energy(1.0, 1.0, 1.0)


def test_thermal_coefficients():
    assert thermal_coefficients(1.0, 2.0) == (2.0, 2.0)
    k, ell = thermal_coefficients(2.0, 3.0)
    assert k == 9.0 and ell == 5.0
    for m in (0.5, 1.0, 7.3):
        assert thermal_coefficients(1.0, m) == (2.0, 2.0)
    with pytest.raises(DomainError):
        thermal_coefficients(0.0, 2.0)


def test_momentum_exchange():
    u = np.array([1.0, 2.0, 3.0])
    assert np.all(momentum_exchange(u, u, 2.0, 1) == 0.0)
    j1 = momentum_exchange(np.array([1.0, 0, 0]), np.zeros(3), 2.0, 1)
    assert np.allclose(j1, [-2.0, 0, 0])
    rng = np.random.default_rng(3)
    for _ in range(100):
        u1, u2 = rng.normal(size=(2, 3))
        total = momentum_exchange(u1, u2, 1.7, 1) + momentum_exchange(u1, u2, 1.7, 2)
        assert np.all(total == 0.0)


def test_strain_tensor():
    sym = np.array([[1.0, 2.0], [2.0, 5.0]])
    assert np.array_equal(strain_tensor(sym), sym)
    anti = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert np.all(strain_tensor(anti) == 0.0)
    g = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert np.allclose(strain_tensor(g), [[0.0, 0.5], [0.5, 0.0]])


def test_viscous_stress():
    visc = ViscosityMatrices(lam=[[0.0, -2.0], [-2.0, 0.0]],
                             mu=[[1.0, 1.0], [1.0, 1.0]])
    zero = np.zeros((3, 3))
    assert np.all(viscous_stress(zero, zero, visc, 1) == 0.0)
    # no cross coupling with diagonal matrices
    diag = ViscosityMatrices(lam=np.diag([1.0, 2.0]), mu=np.diag([1.0, 2.0]))
    p2 = viscous_stress(np.random.default_rng(0).normal(size=(3, 3)), zero, diag, 2)
    assert np.all(p2 == 0.0)
    # grad_u2 = I with lam12 = -2, mu12 = 1: contribution (3*lam12 + 2*mu12) I
    p1 = viscous_stress(zero, np.eye(3), visc, 1)
    assert np.allclose(p1, -4.0 * np.eye(3))


def test_entropy_production_nonnegative_sampled():
    rng = np.random.default_rng(42)
    for name, visc in VISCOSITY_PRESETS.items():
        g1 = rng.normal(size=(10_000, 3, 3))
        g2 = rng.normal(size=(10_000, 3, 3))
        vals = entropy_production_density(g1, g2, visc)
        assert vals.min() >= -1e-12, f"preset {name} lost nonnegativity"


def test_entropy_production_pure_shear():
    visc = VISCOSITY_PRESETS["decoupled"]
    g = np.zeros((3, 3))
    g[0, 1] = 1.0
    val = entropy_production_density(g, np.zeros((3, 3)), visc)
    # single-fluid shear: 2 mu |D|^2 with |D|^2 = 1/2
    assert math.isclose(float(val), 1.0, rel_tol=1e-14)


def _simpson(fn, a, b, n=4000):
    xs = np.linspace(a, b, 2 * n + 1)
    w = np.ones_like(xs)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(np.sum(w * fn(xs)) * (b - a) / (6 * n))


def test_kirchhoff_potential_against_quadrature():
    eps, m = 1.0, 2.0
    oracle = _simpson(lambda y: (1 + np.exp(m * y)) * (eps + np.exp(y)), 0.0, 1.0)
    assert abs(kirchhoff_potential(1.0, eps, m) - oracle) < 1e-10
    assert kirchhoff_potential(0.0, eps, m) == 0.0
    assert kirchhoff_potential(-3.0, eps, m) < 0 < kirchhoff_potential(3.0, eps, m)


def test_kirchhoff_strictly_increasing_and_overflow():
    rng = np.random.default_rng(11)
    z = np.sort(rng.uniform(-5, 5, size=200))
    vals = kirchhoff_potential(z, 0.3, 1.7)
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(OverflowError):
        kirchhoff_potential(500.0, 1.0, 2.0)


def test_pressure_energy_monotone():
    rng = np.random.default_rng(5)
    rho = np.sort(rng.uniform(0, 3, size=100))
    theta = np.sort(rng.uniform(0.1, 3, size=100))
    assert np.all(np.diff(pressure(rho, 1.3, 2.5)) >= 0)
    assert np.all(np.diff(pressure(1.3, theta, 2.5)) >= 0)
    assert np.all(np.diff(internal_energy(rho, 1.0, 2.5)) >= 0)
    assert np.all(np.diff(internal_energy(1.0, theta, 2.5)) >= 0)


def test_presets_admissible():
    params = MixtureParams(gamma=4.0, m=4.0)
    for name, visc in VISCOSITY_PRESETS.items():
        report = validate_parameters(params, visc)
        assert report.passed, f"{name}: {report}"
        assert visc.c0 > 0
        assert visc.nu[0, 1] == 0.0


def test_validation_examples():
    # gamma=4, m=4, M=I, Lam=0: all pass, threshold value below 4
    report = validate_parameters(MixtureParams(gamma=4.0, m=4.0),
                                 VISCOSITY_PRESETS["decoupled"])
    assert report.passed and not report.waived
    bound = proven_heat_exponent_bound(4.0)
    assert math.isclose(bound, (2.0 / 3.0) * 71.0 / 13.0, rel_tol=1e-15)
    assert bound < 4.0

    # triangularity holds whenever lam12 = -2 mu12
    visc = ViscosityMatrices(lam=[[1.0, -2.0], [-2.0, 1.0]],
                             mu=[[2.0, 1.0], [1.0, 2.0]])
    assert visc.triangular()

    # gamma below threshold fails without the waiver, names the condition
    report = validate_parameters(MixtureParams(gamma=2.0, m=4.0),
                                 VISCOSITY_PRESETS["decoupled"])
    assert not report.passed
    assert any(name == "gamma threshold" and not ok
               for name, ok, _ in report.items)

    # the waiver applies to exponents only
    report = validate_parameters(
        MixtureParams(gamma=2.0, m=4.0, allow_unproven=True),
        VISCOSITY_PRESETS["decoupled"])
    assert report.passed and "gamma threshold" in report.waived

    bad = ViscosityMatrices(lam=np.zeros((2, 2)), mu=[[1.0, 1.5], [1.5, 1.0]])
    report = validate_parameters(
        MixtureParams(gamma=4.0, m=4.0, allow_unproven=True), bad)
    assert not report.passed  # matrix conditions are never waivable


def test_c0_closed_form():
    visc = VISCOSITY_PRESETS["near_minimal"]
    mu = visc.mu
    expect = 0.5 * ((mu[0, 0] + mu[1, 1])
                    - math.sqrt((mu[0, 0] - mu[1, 1]) ** 2
                                + (mu[0, 1] + mu[1, 0]) ** 2))
    assert visc.c0 == expect
    assert math.isclose(visc.c0, 0.1, rel_tol=1e-12)
