"""Probability current of the Pauli equation and its decomposition.

``J = J0 + JM`` where ``J0`` is the convective current (real part of
``psi^+ pi psi / m``) and ``JM = (hbar/2m) curl(psi^+ sigma psi)`` the
magnetization current. The "direct" current evaluates the two-Pauli-matrix
expression ``J_i = (1/2m) sum_j [(pi_j psi)^+ s_j s_i psi + psi^+ s_i s_j (pi_j psi)]``
literally, so comparing it with ``J0 + JM`` tests the simplification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gauge import GaugeConfig, Residual, UnitsConfig, _require_gauge_lattice, all_pi_array, analytic_pi
from .grid import LEVI_CIVITA, ScalarField, VectorField3, curl_array, l2_norm
from .spinor import PAULI, PAULI_PRODUCTS, REALITY_RTOL, SpinorField, bilinear, probability_density, spin_density
from .states import AnalyticJet


def _units(units_or_gauge) -> UnitsConfig:
    if units_or_gauge is None:
        return UnitsConfig()
    return getattr(units_or_gauge, "units", units_or_gauge)


# --- pointwise algebra shared by both paths -------------------------------------
# psi: (2, ...), pi_psi: (3, 2, ...) with pi_psi[j] = pi_j psi.


def _convective(psi, pi_psi, m):
    return np.stack([bilinear(pi_psi[i], None, psi) + bilinear(psi, None, pi_psi[i]) for i in range(3)]) / (2 * m)


def _direct(psi, pi_psi, m):
    out = []
    for i in range(3):
        total = 0
        for j in range(3):
            total = total + bilinear(pi_psi[j], PAULI_PRODUCTS[j, i], psi)
            total = total + bilinear(psi, PAULI_PRODUCTS[i, j], pi_psi[j])
        out.append(total)
    return np.stack(out) / (2 * m)


def _antisymmetric_terms(pi_psi):
    """Summands of ``sum_ij [(pi_j psi)^+ s_j s_i (pi_i psi) - (pi_i psi)^+ s_i s_j (pi_j psi)]``."""
    total = 0
    magnitude = 0
    for i in range(3):
        for j in range(3):
            first = bilinear(pi_psi[j], PAULI_PRODUCTS[j, i], pi_psi[i])
            second = bilinear(pi_psi[i], PAULI_PRODUCTS[i, j], pi_psi[j])
            total = total + (first - second)
            magnitude = np.maximum(magnitude, np.abs(first))
    return total, magnitude


# --- grid path --------------------------------------------------------------------


def convective_current(psi: SpinorField, gauge: GaugeConfig) -> VectorField3:
    _require_gauge_lattice(psi, gauge)
    j0 = _convective(psi.data, all_pi_array(psi.data, gauge), gauge.units.mass)
    return VectorField3(psi.lattice, j0).real_part(REALITY_RTOL)


def magnetization_current(psi: SpinorField, units=None) -> VectorField3:
    """``(hbar/2m) curl(psi^+ sigma psi)``; depends on ``psi`` and ``hbar/m`` only.

    ``units`` may be a :class:`UnitsConfig` or a :class:`GaugeConfig`; the charge
    and vector potential are never read.
    """
    u = _units(units)
    s = spin_density(psi)
    return VectorField3(psi.lattice, u.hbar / (2 * u.mass) * curl_array(s.data, psi.lattice))


def direct_current(psi: SpinorField, gauge: GaugeConfig) -> VectorField3:
    _require_gauge_lattice(psi, gauge)
    j = _direct(psi.data, all_pi_array(psi.data, gauge), gauge.units.mass)
    return VectorField3(psi.lattice, j).real_part(REALITY_RTOL)


def magnetization_density(psi: SpinorField, gauge: GaugeConfig) -> VectorField3:
    """``M = (q hbar / 2 m c) psi^+ sigma psi``."""
    u = gauge.units
    return spin_density(psi) * (u.charge * u.hbar / (2 * u.mass * u.c))


def antisymmetric_remainder(psi: SpinorField, gauge: GaugeConfig) -> Residual:
    """Max over sites of the relabelling-antisymmetric double sum; vanishes identically."""
    _require_gauge_lattice(psi, gauge)
    total, magnitude = _antisymmetric_terms(all_pi_array(psi.data, gauge))
    return Residual(np.max(np.abs(total)), np.max(magnitude))


@dataclass(frozen=True)
class CurrentDecomposition:
    rho: ScalarField
    J0: VectorField3
    JM: VectorField3
    J_total: VectorField3
    M: VectorField3
    direct_residual: Residual

    def fields(self) -> dict:
        return {"rho": self.rho, "J0": self.J0, "JM": self.JM, "J_total": self.J_total, "M": self.M}


def decompose(psi: SpinorField, gauge: GaugeConfig) -> CurrentDecomposition:
    """All densities and currents of ``psi``, plus ``max |direct - (J0 + JM)|`` as a diagnostic."""
    _require_gauge_lattice(psi, gauge)
    pi_psi = all_pi_array(psi.data, gauge)
    m = gauge.units.mass
    j0 = VectorField3(psi.lattice, _convective(psi.data, pi_psi, m)).real_part(REALITY_RTOL)
    jm = magnetization_current(psi, gauge)
    total = j0 + jm
    direct = VectorField3(psi.lattice, _direct(psi.data, pi_psi, m)).real_part(REALITY_RTOL)
    scale = max(j0.max_abs(), jm.max_abs(), direct.max_abs())
    residual = Residual(np.max(np.abs(direct.data - total.data)), scale)
    return CurrentDecomposition(
        rho=probability_density(psi),
        J0=j0,
        JM=jm,
        J_total=total,
        M=magnetization_density(psi, gauge),
        direct_residual=residual,
    )


def current_equivalence_grid(psi: SpinorField, gauge: GaugeConfig) -> Residual:
    """Discrete L2 norm of ``direct - (J0 + JM)``; O(h^2) on the grid."""
    pi_psi = all_pi_array(psi.data, gauge)
    m = gauge.units.mass
    direct = _direct(psi.data, pi_psi, m)
    j0 = _convective(psi.data, pi_psi, m)
    jm = magnetization_current(psi, gauge).data
    lat = psi.lattice
    # J0 and JM may cancel (e.g. a spin-up packet in a field), so each sets the scale separately
    scale = max(l2_norm(direct, lat), l2_norm(j0, lat), l2_norm(jm, lat))
    return Residual(l2_norm(direct - (j0 + jm), lat), scale)


def curl_m_residual(psi: SpinorField, gauge: GaugeConfig) -> Residual:
    """Max-norm of ``c curl(M) - q JM`` with shared stencils."""
    u = gauge.units
    c_curl_m = u.c * curl_array(magnetization_density(psi, gauge).data, psi.lattice)
    q_jm = u.charge * magnetization_current(psi, gauge).data
    scale = max(np.max(np.abs(c_curl_m)), np.max(np.abs(q_jm)))
    return Residual(np.max(np.abs(c_curl_m - q_jm)), scale)


# --- analytic path ----------------------------------------------------------------


def analytic_currents(state, gauge: GaugeConfig, points) -> dict:
    """Currents at arbitrary points from exact derivatives.

    Returns real arrays ``rho (N,)`` and ``J0, JM, J_total, direct, M, S`` of shape ``(3, N)``.
    """
    u = gauge.units
    jet = AnalyticJet.of(state, points)
    pi_psi, _, _ = analytic_pi(jet, gauge)
    psi = jet.psi
    spin = np.stack([bilinear(psi, PAULI[k], psi) for k in range(3)])
    # d_j S_k = (d_j psi)^+ s_k psi + psi^+ s_k d_j psi
    d_spin = np.stack(
        [[bilinear(jet.grad[j], PAULI[k], psi) + bilinear(psi, PAULI[k], jet.grad[j]) for k in range(3)] for j in range(3)]
    )
    curl_s = np.einsum("ijk,jk...->i...", LEVI_CIVITA, d_spin)
    j0 = _convective(psi, pi_psi, u.mass)
    jm = u.hbar / (2 * u.mass) * curl_s
    direct = _direct(psi, pi_psi, u.mass)
    out = {
        "rho": bilinear(psi, None, psi),
        "J0": j0,
        "JM": jm,
        "J_total": j0 + jm,
        "direct": direct,
        "S": spin,
        "M": u.charge * u.hbar / (2 * u.mass * u.c) * spin,
    }
    # imaginary residues are judged against the size of the terms that build each quantity
    density_scale = float(np.max(np.abs(psi) ** 2, initial=0.0))
    current_scale = max(
        float(np.max(np.abs(psi), initial=0.0) * np.max(np.abs(pi_psi), initial=0.0)) / u.mass,
        u.hbar / (2 * u.mass) * float(np.max(np.abs(d_spin), initial=0.0)),
    )
    for key, value in out.items():
        scale = current_scale if key.startswith(("J", "direct")) else density_scale
        if np.max(np.abs(value.imag), initial=0.0) > REALITY_RTOL * max(scale, 1e-300):
            raise AssertionError(f"analytic {key} has non-negligible imaginary part")
        out[key] = value.real
    return out


def current_equivalence_analytic(state, gauge: GaugeConfig, points) -> Residual:
    """Max over points of ``|direct - (J0 + JM)|`` with exact derivatives."""
    cur = analytic_currents(state, gauge, points)
    scale = max(np.max(np.abs(cur[k])) for k in ("J0", "JM", "direct"))
    return Residual(np.max(np.abs(cur["direct"] - cur["J_total"])), scale)
