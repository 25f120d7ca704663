"""Constitutive laws, viscosity-matrix algebra, and parameter validation.

Everything here is pointwise math with no grid dependence; all functions
broadcast over numpy arrays and are safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "MixtureParams",
    "ViscosityMatrices",
    "ValidationReport",
    "VISCOSITY_PRESETS",
    "validate_parameters",
    "pressure",
    "internal_energy",
    "total_energy",
    "thermal_coefficients",
    "momentum_exchange",
    "strain_tensor",
    "viscous_stress",
    "entropy_production_density",
    "kirchhoff_potential",
]

# Largest exponent exp() accepts without overflowing a float64.
_EXP_MAX = 700.0


def proven_heat_exponent_bound(gamma: float) -> float:
    """Lower bound on the conductivity growth exponent for the proven regime."""
    return (2.0 / 3.0) * (6.0 * gamma**2 - 7.0 * gamma + 3.0) / (
        2.0 * gamma**2 - 5.0 * gamma + 1.0
    )


@dataclass
class MixtureParams:
    """Physical scalars and data of the mixture problem.

    forcing maps points (N, dim) -> (N, dim) per component (or is None for
    zero forcing); theta_hat maps boundary points (N, dim) -> (N,) positive
    values (or is a positive constant).
    """

    gamma: float = 4.0
    m: float = 4.0
    a: float = 1.0
    masses: tuple[float, float] = (1.0, 1.0)
    forcing: tuple = (None, None)
    theta_hat: object = 1.0
    allow_unproven: bool = False

    def __post_init__(self):
        if self.gamma <= 1:
            raise DomainError("adiabatic exponent must exceed 1")
        if self.m <= 0:
            raise DomainError("conductivity growth exponent must be positive")
        if self.a <= 0:
            raise DomainError("momentum-exchange coefficient must be positive")
        if any(M <= 0 for M in self.masses):
            raise DomainError("component masses must be positive")

    def force_values(self, i: int, points: np.ndarray) -> np.ndarray:
        fn = self.forcing[i - 1]
        if fn is None:
            return np.zeros_like(points)
        return np.asarray(fn(points), dtype=float)

    def theta_hat_values(self, points: np.ndarray) -> np.ndarray:
        if callable(self.theta_hat):
            vals = np.asarray(self.theta_hat(points), dtype=float)
        else:
            vals = np.full(points.shape[0], float(self.theta_hat))
        if np.any(vals <= 0):
            raise DomainError("boundary temperature must be positive")
        return vals

    def theta_hat_max(self) -> float:
        if callable(self.theta_hat):
            return float(self._theta_hat_bound)
        return float(self.theta_hat)

    # Callers constructing a callable theta_hat set this bound explicitly;
    # the CLI presets do.
    _theta_hat_bound: float = field(default=1.0, repr=False)


@dataclass
class ViscosityMatrices:
    """Bulk (2x2) and shear (2x2) viscosity matrices with derived quantities."""

    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float).reshape(2, 2)
        self.mu = np.asarray(self.mu, dtype=float).reshape(2, 2)

    @property
    def nu(self) -> np.ndarray:
        """Total viscosity matrix: bulk plus twice shear."""
        return self.lam + 2.0 * self.mu

    @property
    def c0(self) -> float:
        """Closed-form coercivity constant of the viscous bilinear form."""
        mu = self.mu
        tr = mu[0, 0] + mu[1, 1]
        gap = math.sqrt((mu[0, 0] - mu[1, 1]) ** 2 + (mu[0, 1] + mu[1, 0]) ** 2)
        return 0.5 * (tr - gap)

    @property
    def is_symmetric(self) -> bool:
        return bool(
            np.allclose(self.lam, self.lam.T, atol=0.0)
            and np.allclose(self.mu, self.mu.T, atol=0.0)
        )

    def shear_positive_definite(self) -> bool:
        return _sym_eigmin(self.mu) > 0

    def bulk_combination_semidefinite(self) -> bool:
        return _sym_eigmin(3.0 * self.lam + 2.0 * self.mu) >= -1e-14

    def triangular(self) -> bool:
        return self.nu[0, 1] == 0.0


def _sym_eigmin(mat: np.ndarray) -> float:
    sym = 0.5 * (mat + mat.T)
    return float(np.linalg.eigvalsh(sym).min())


# Admissible coefficient sets used by tests and shipped as CLI presets.
VISCOSITY_PRESETS: dict[str, ViscosityMatrices] = {
    "decoupled": ViscosityMatrices(lam=np.zeros((2, 2)), mu=np.eye(2)),
    "symmetric_coupling": ViscosityMatrices(
        lam=[[1.0, -1.0], [-1.0, 1.0]], mu=[[2.0, 0.5], [0.5, 1.0]]
    ),
    "asymmetric_shear": ViscosityMatrices(
        lam=[[0.5, -2.0], [0.1, 0.6]], mu=[[2.0, 1.0], [0.2, 1.5]]
    ),
    "stiff_bulk": ViscosityMatrices(
        lam=[[5.0, 0.0], [0.0, 4.0]], mu=[[1.0, 0.0], [0.0, 2.0]]
    ),
    "near_minimal": ViscosityMatrices(
        lam=[[1.0, -1.8], [-1.8, 1.0]], mu=[[1.0, 0.9], [0.9, 1.0]]
    ),
    "light_coupling": ViscosityMatrices(
        lam=[[0.2, -0.2], [-0.2, 0.2]], mu=[[0.4, 0.1], [0.1, 0.2]]
    ),
}


@dataclass
class ValidationReport:
    """Outcome of parameter/viscosity admissibility checks."""

    items: list[tuple[str, bool, str]]
    passed: bool
    waived: list[str]

    def failed_items(self):
        return [it for it in self.items if not it[1]]

    def __str__(self):
        lines = []
        for name, ok, detail in self.items:
            mark = "pass" if ok else ("waived" if name in self.waived else "FAIL")
            lines.append(f"  [{mark}] {name}: {detail}")
        head = "validation passed" if self.passed else "validation FAILED"
        return head + "\n" + "\n".join(lines)


def validate_parameters(params: MixtureParams, visc: ViscosityMatrices) -> ValidationReport:
    """Check the solvability hypotheses plus matrix admissibility.

    The exponent thresholds may be waived via params.allow_unproven (the
    numerics can still converge outside the proven regime); the matrix
    conditions are never waivable since they guarantee ellipticity.
    """
    items = []
    waived = []

    gamma_ok = params.gamma > 3.0
    items.append(("gamma threshold", gamma_ok,
                  f"gamma = {params.gamma} (needs > 3)"))

    if params.gamma > 3.0:
        m_bound = proven_heat_exponent_bound(params.gamma)
        m_ok = params.m > m_bound
        detail = f"m = {params.m} (needs > {m_bound:.6g})"
    else:
        m_bound = None
        m_ok = False
        detail = f"m = {params.m} (threshold undefined for gamma <= 3)"
    items.append(("m threshold", m_ok, detail))

    items.append(("masses positive", all(M > 0 for M in params.masses),
                  f"masses = {params.masses}"))

    shear_ok = visc.shear_positive_definite()
    items.append(("shear matrix positive definite", shear_ok,
                  f"min eig of sym part = {_sym_eigmin(visc.mu):.6g}"))

    bulk_ok = visc.bulk_combination_semidefinite()
    items.append(("3*bulk + 2*shear semidefinite", bulk_ok,
                  f"min eig of sym part = {_sym_eigmin(3 * visc.lam + 2 * visc.mu):.6g}"))

    tri_ok = visc.triangular()
    items.append(("total-viscosity triangularity", tri_ok,
                  f"nu12 = lam12 + 2*mu12 = {visc.nu[0, 1]:.6g} (must be 0)"))

    c0_ok = visc.c0 > 0
    items.append(("coercivity constant positive", c0_ok, f"c0 = {visc.c0:.6g}"))

    hard_ok = all(ok for name, ok, _ in items
                  if name not in ("gamma threshold", "m threshold"))
    soft_ok = gamma_ok and m_ok
    if params.allow_unproven and not soft_ok:
        for name, ok, _ in items:
            if name in ("gamma threshold", "m threshold") and not ok:
                waived.append(name)
    passed = hard_ok and (soft_ok or params.allow_unproven)
    return ValidationReport(items=items, passed=passed, waived=waived)


# -- pointwise constitutive laws ---------------------------------------------


def pressure(rho, theta, gamma):
    """Component pressure rho^gamma + rho*theta."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise DomainError("density must be nonnegative")
    return rho**gamma + rho * np.asarray(theta, dtype=float)


def internal_energy(rho, theta, gamma):
    """Specific internal energy rho^(gamma-1)/(gamma-1) + theta."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise DomainError("density must be nonnegative")
    if gamma <= 1:
        raise DomainError("adiabatic exponent must exceed 1")
    return rho ** (gamma - 1.0) / (gamma - 1.0) + np.asarray(theta, dtype=float)


def total_energy(rho, speed_sq, theta, gamma):
    """Specific total energy |u|^2/2 + internal energy."""
    return 0.5 * np.asarray(speed_sq, dtype=float) + internal_energy(rho, theta, gamma)


def thermal_coefficients(theta, m):
    """Heat conductivity 1 + theta^m and boundary exchange 1 + theta^(m-1)."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0):
        raise DomainError("temperature must be positive")
    return 1.0 + theta**m, 1.0 + theta ** (m - 1.0)


def momentum_exchange(u1, u2, a, i):
    """Interphase friction force on component i; antisymmetric in i."""
    if i not in (1, 2):
        raise DomainError("component index must be 1 or 2")
    diff = np.asarray(u1, dtype=float) - np.asarray(u2, dtype=float)
    return ((-1.0) ** i * a) * diff


def strain_tensor(grad_u):
    """Symmetric part of a velocity gradient; batched over leading axes."""
    grad_u = np.asarray(grad_u, dtype=float)
    return 0.5 * (grad_u + np.swapaxes(grad_u, -2, -1))


def _trace(t):
    return np.trace(t, axis1=-2, axis2=-1)


def viscous_stress(grad_u1, grad_u2, visc: ViscosityMatrices, i):
    """Viscous stress tensor of component i from both velocity gradients.

    grad_u* are (.., dim, dim) arrays; stress couples the components through
    the off-diagonal viscosity entries.
    """
    if i not in (1, 2):
        raise DomainError("component index must be 1 or 2")
    grads = (np.asarray(grad_u1, dtype=float), np.asarray(grad_u2, dtype=float))
    dim = grads[0].shape[-1]
    eye = np.eye(dim)
    out = np.zeros_like(grads[0])
    for j in (1, 2):
        g = grads[j - 1]
        div = _trace(g)
        out = out + visc.lam[i - 1, j - 1] * div[..., None, None] * eye
        out = out + 2.0 * visc.mu[i - 1, j - 1] * strain_tensor(g)
    return out


def entropy_production_density(grad_u1, grad_u2, visc: ViscosityMatrices):
    """Pointwise viscous dissipation; nonnegative for admissible matrices."""
    total = np.zeros(np.asarray(grad_u1, dtype=float).shape[:-2])
    grads = (grad_u1, grad_u2)
    for i in (1, 2):
        stress = viscous_stress(grad_u1, grad_u2, visc, i)
        total = total + np.sum(stress * np.asarray(grads[i - 1]), axis=(-2, -1))
    return total


def kirchhoff_potential(z, eps, m):
    """Antiderivative of the regularized conductivity factor, vanishing at 0.

    Integrates (1 + e^(m*y)) * (eps + e^y) from 0 to z in closed form; it is
    strictly increasing and shares the sign of z.
    """
    if m <= 0:
        raise DomainError("conductivity growth exponent must be positive")
    if eps < 0:
        raise DomainError("regularization parameter must be nonnegative")
    z = np.asarray(z, dtype=float)
    top = np.max(np.abs(z)) if z.size else 0.0
    if top * (m + 1.0) > _EXP_MAX:
        raise OverflowError("kirchhoff potential argument beyond floating range")
    return (
        eps * z
        + np.expm1(z)
        + (eps / m) * np.expm1(m * z)
        + np.expm1((m + 1.0) * z) / (m + 1.0)
    )
