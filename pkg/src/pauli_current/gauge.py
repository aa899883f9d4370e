"""Units, vector potentials and the kinetic momentum ``pi = p - (q/c) A``.

Gaussian units with explicit ``c``. Every operation exists on two paths:
the grid path acts on :class:`SpinorField` samples with central differences,
the analytic path acts on an :class:`AnalyticJet` with exact derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .grid import (
    LEVI_CIVITA,
    Lattice,
    VectorField3,
    _check_axis,
    central_difference,
    curl,
    l2_norm,
)
from .spinor import SpinorField, bilinear
from .states import AnalyticJet, AnalyticSpinorState


class Residual(float):
    """A nonnegative residual that remembers the magnitude of the terms it compares."""

    def __new__(cls, value, scale):
        obj = super().__new__(cls, value)
        obj.scale = float(scale)
        return obj

    @property
    def relative(self) -> float:
        return float(self) / self.scale if self.scale > 0 else float(self)

    def __repr__(self):
        return f"Residual({float(self):.3e}, scale={self.scale:.3e})"


@dataclass(frozen=True)
class UnitsConfig:
    hbar: float = 1.0
    mass: float = 1.0
    c: float = 1.0
    charge: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "mass", "c"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidArgumentError(f"{name} must be positive, got {value}")
        if not np.isfinite(self.charge):
            raise InvalidArgumentError(f"charge must be finite, got {self.charge}")

    @property
    def coupling(self) -> float:
        """``q / c``, the factor multiplying ``A`` in ``pi``."""
        return self.charge / self.c

    def with_charge(self, charge: float) -> UnitsConfig:
        return UnitsConfig(self.hbar, self.mass, self.c, charge)


def _bshape(points):
    return (1,) * (np.ndim(points) - 1)


class ZeroPotential:
    kind = "zero"

    def evaluate(self, points):
        shape = np.shape(points)[1:]
        return np.zeros((3, *shape)), np.zeros((3, 3, *shape))

    def magnetic_field(self, points):
        return np.zeros((3, *np.shape(points)[1:]))


@dataclass(frozen=True)
class UniformField:
    """Uniform ``B = b_z z_hat`` in symmetric gauge ``A = (-B y/2, B x/2, 0)``."""

    b_z: float
    kind = "uniform_b_symmetric"

    def evaluate(self, points):
        points = np.asarray(points, float)
        x, y = points[0], points[1]
        a = np.stack([-0.5 * self.b_z * y, 0.5 * self.b_z * x, np.zeros_like(x)])
        jac = np.zeros((3, 3))
        jac[0, 1] = -0.5 * self.b_z
        jac[1, 0] = 0.5 * self.b_z
        return a, np.broadcast_to(jac.reshape(3, 3, *_bshape(points)), (3, 3, *points.shape[1:]))

    def magnetic_field(self, points):
        shape = np.shape(points)[1:]
        b = np.zeros((3, *shape))
        b[2] = self.b_z
        return b


@dataclass(frozen=True)
class CustomPotential:
    """User supplied ``A(points) -> (3, ...)`` and Jacobian ``J[i, j] = d_j A_i``."""

    vector_potential: object
    jacobian: object
    kind = "custom"

    def evaluate(self, points):
        return np.asarray(self.vector_potential(points), float), np.asarray(self.jacobian(points), float)

    def magnetic_field(self, points):
        jac = self.evaluate(points)[1]
        return np.einsum("ijk,kj...->i...", LEVI_CIVITA, jac)


class GaugeConfig:
    """Units plus a static vector potential, with ``A`` cached on a lattice."""

    def __init__(self, lattice: Lattice, units: UnitsConfig | None = None, potential=None):
        self.lattice = lattice
        self.units = units or UnitsConfig()
        self.potential = potential or ZeroPotential()
        a, _ = self.potential.evaluate(lattice.coordinates())
        self.A = VectorField3(lattice, a).real_part()
        # (q/c) A as a real array, the form pi uses
        self.coupled_potential = self.units.coupling * self.A.data.real

    @property
    def kind(self) -> str:
        return self.potential.kind

    @property
    def is_periodic(self) -> bool:
        return self.kind == "zero"

    def with_charge(self, charge: float) -> GaugeConfig:
        return GaugeConfig(self.lattice, self.units.with_charge(charge), self.potential)

    def on(self, lattice: Lattice) -> GaugeConfig:
        return GaugeConfig(lattice, self.units, self.potential)

    def __repr__(self):
        return f"GaugeConfig({self.kind}, {self.units}, dims={self.lattice.dims})"


def _require_gauge_lattice(psi: SpinorField, gauge: GaugeConfig):
    if psi.lattice != gauge.lattice:
        raise InvalidArgumentError(f"spinor lattice {psi.lattice} does not match gauge lattice {gauge.lattice}")


# --- grid path --------------------------------------------------------------


def pi_array(psi: np.ndarray, axis: int, gauge: GaugeConfig) -> np.ndarray:
    """``(pi_i psi)`` on raw spinor arrays of shape ``(2, nx, ny, nz)``."""
    u = gauge.units
    out = central_difference(psi, axis, gauge.lattice.spacing[axis], -1j * u.hbar)
    if u.charge != 0:
        out -= gauge.coupled_potential[axis] * psi
    return out


def all_pi_array(psi: np.ndarray, gauge: GaugeConfig) -> np.ndarray:
    """Stack ``pi_j psi`` for j = 0, 1, 2 into shape ``(3, 2, nx, ny, nz)``."""
    return np.stack([pi_array(psi, j, gauge) for j in range(3)])


def kinetic_momentum(psi: SpinorField, axis: int, gauge: GaugeConfig) -> SpinorField:
    axis = _check_axis(axis)
    _require_gauge_lattice(psi, gauge)
    return SpinorField(psi.lattice, pi_array(psi.data, axis, gauge))


def magnetic_field(gauge: GaugeConfig) -> VectorField3:
    """Analytic B for zero and uniform potentials, discrete curl of cached A otherwise."""
    if gauge.kind in ("zero", "uniform_b_symmetric"):
        b = gauge.potential.magnetic_field(gauge.lattice.coordinates())
        return VectorField3(gauge.lattice, b)
    return curl(gauge.A)


# --- analytic path ----------------------------------------------------------


def analytic_pi(jet: AnalyticJet, gauge: GaugeConfig):
    """Exact ``pi_j psi`` and ``d_i (pi_j psi)`` at the jet's points.

    Returns ``pi`` shaped ``(3, 2, ...)`` and ``dpi`` shaped ``(3, 3, 2, ...)``
    with ``dpi[i, j] = d_i (pi_j psi)``, together with ``A`` at the points.
    """
    u = gauge.units
    a, jac = gauge.potential.evaluate(jet.points)
    qc = u.coupling
    pi = -1j * u.hbar * jet.grad - qc * a[:, None] * jet.psi[None]
    # d_i (A_j psi) = (d_i A_j) psi + A_j d_i psi;  jac[j, i] = d_i A_j
    d_a_psi = np.swapaxes(jac, 0, 1)[:, :, None] * jet.psi[None, None] + a[None, :, None] * jet.grad[:, None]
    dpi = -1j * u.hbar * jet.hess - qc * d_a_psi
    return pi, dpi, a


def analytic_pi_pi(jet: AnalyticJet, gauge: GaugeConfig) -> np.ndarray:
    """``pi_i pi_j psi`` shaped ``(3, 3, 2, ...)`` from exact derivatives."""
    u = gauge.units
    pi, dpi, a = analytic_pi(jet, gauge)
    return -1j * u.hbar * dpi - u.coupling * a[:, None, None] * pi[None]


# --- the product-rule identity ----------------------------------------------


def leibniz_terms_analytic(alpha: AnalyticSpinorState, beta: AnalyticSpinorState, axis, gauge, points):
    """Both sides of ``a^+(pi_i b) - (pi_i a)^+ b = (hbar/i) d_i(a^+ b)`` at ``points``.

    Also returns the largest single-term magnitude, used as the residual scale.
    """
    axis = _check_axis(axis)
    hbar = gauge.units.hbar
    ja, jb = AnalyticJet.of(alpha, points), AnalyticJet.of(beta, points)
    pa, _, _ = analytic_pi(ja, gauge)
    pb, _, _ = analytic_pi(jb, gauge)
    a_pb = bilinear(ja.psi, None, pb[axis])
    pa_b = bilinear(pa[axis], None, jb.psi)
    lhs = a_pb - pa_b
    da_b = bilinear(ja.grad[axis], None, jb.psi)
    a_db = bilinear(ja.psi, None, jb.grad[axis])
    rhs = hbar / 1j * (da_b + a_db)
    scale = max(np.max(np.abs(t)) for t in (a_pb, pa_b, hbar * da_b, hbar * a_db))
    return lhs, rhs, scale


def leibniz_identity_residual(alpha, beta, axis, gauge: GaugeConfig, probe_points) -> Residual:
    """Max over probe points of ``|LHS - RHS|`` using exact derivatives."""
    lhs, rhs, scale = leibniz_terms_analytic(alpha, beta, axis, gauge, probe_points)
    return Residual(np.max(np.abs(lhs - rhs)), scale)


def leibniz_grid_residual(alpha: SpinorField, beta: SpinorField, axis, gauge: GaugeConfig) -> Residual:
    """Discrete L2 norm of the identity's defect with central differences (O(h^2))."""
    axis = _check_axis(axis)
    _require_gauge_lattice(alpha, gauge)
    _require_gauge_lattice(beta, gauge)
    lat = gauge.lattice
    lhs = bilinear(alpha.data, None, pi_array(beta.data, axis, gauge)) - bilinear(
        pi_array(alpha.data, axis, gauge), None, beta.data
    )
    ab = bilinear(alpha.data, None, beta.data)
    rhs = gauge.units.hbar / 1j * central_difference(ab, axis, lat.spacing[axis])
    return Residual(l2_norm(lhs - rhs, lat), max(l2_norm(lhs, lat), l2_norm(rhs, lat)))
