"""Lagrangian density of the Pauli field and the Noether current of its phase symmetry.

With ``A = 0``::

    L   = (i hbar/2)(psi^+ psi_t - psi_t^+ psi) - (hbar^2/2m) sum_ij d_i psi^+ s_i s_j d_j psi
    L0  = (i hbar/2)(psi^+ psi_t - psi_t^+ psi) - (hbar^2/2m) sum_i d_i psi^+ d_i psi
    LM  = -(i hbar^2/2m) sum_ijk eps_ijk d_i psi^+ s_k d_j psi
        = (i hbar^2/2m) div(psi^+ s x grad psi)

Under ``psi -> (1 - i da/hbar) psi`` the current
``J^mu da = dpsi^+ dL/d(d_mu psi^+) + dL/d(d_mu psi) dpsi`` uses the hand-derived momenta

* ``dL/d psi_t = (i hbar/2) psi^+`` and ``dL/d psi_t^+ = -(i hbar/2) psi``
* ``dL/d(d_a psi^+) = -(hbar^2/2m) d_a psi - (i hbar^2/2m) sum_jk eps_ajk s_k d_j psi``
* ``dL/d(d_a psi) = -(hbar^2/2m) d_a psi^+ - (i hbar^2/2m) sum_ik eps_iak d_i psi^+ s_k``

where the second term of each spatial momentum comes from ``LM``.

Both evaluation paths are offered: ``"grid"`` takes a :class:`SpinorField` and
uses central differences; ``"analytic"`` takes an analytic state plus probe
points and uses exact derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .gauge import GaugeConfig, Residual, UnitsConfig
from .grid import LEVI_CIVITA, ScalarField, VectorField3, central_difference, divergence_array, grid_sum
from .spinor import PAULI, PAULI_PRODUCTS, REALITY_RTOL, SpinorField, bilinear
from .states import AnalyticJet

SOURCES = ("grid", "analytic")


def _units(units) -> UnitsConfig:
    if units is None:
        return UnitsConfig()
    if isinstance(units, GaugeConfig):
        if units.kind != "zero":
            raise InvalidArgumentError("the Lagrangian and Noether checks take A = 0")
        return units.units
    return units


@dataclass(frozen=True)
class _Jet:
    psi: np.ndarray
    grad: np.ndarray
    hess: np.ndarray | None
    lattice: object


def _jet(psi, derivative_source, points) -> _Jet:
    if derivative_source == "grid":
        if not isinstance(psi, SpinorField):
            raise InvalidArgumentError("grid path needs a SpinorField")
        lat = psi.lattice
        grad = np.stack([central_difference(psi.data, i, lat.spacing[i]) for i in range(3)])
        return _Jet(psi.data, grad, None, lat)
    if derivative_source == "analytic":
        if points is None:
            raise InvalidArgumentError("analytic path needs probe points")
        jet = AnalyticJet.of(psi, points)
        return _Jet(jet.psi, jet.grad, jet.hess, None)
    raise InvalidArgumentError(f"derivative_source must be one of {SOURCES}, got {derivative_source!r}")


def _as_array(x):
    return x.data if isinstance(x, SpinorField) else np.asarray(x, dtype=complex)


def _real(value, scale, name):
    """Drop an imaginary residue after checking it is rounding-sized relative to ``scale``."""
    if np.max(np.abs(value.imag), initial=0.0) > REALITY_RTOL * max(scale, np.finfo(float).tiny):
        raise AssertionError(f"{name} has a non-negligible imaginary part")
    return value.real


def _wrap(values, jet, cls=ScalarField):
    return values if jet.lattice is None else cls(jet.lattice, values)


def on_shell_time_derivative(psi, units=None, derivative_source="grid", points=None) -> np.ndarray:
    """``psi_t = -(i/hbar) H psi`` at ``A = 0`` and ``V = 0``."""
    u = _units(units)
    if derivative_source == "grid":
        from .dynamics import hamiltonian_array

        h_psi = hamiltonian_array(psi.data, GaugeConfig(psi.lattice, u))
    else:
        jet = _jet(psi, derivative_source, points)
        h_psi = -(u.hbar**2) / (2 * u.mass) * np.einsum("ijab,ijb...->a...", PAULI_PRODUCTS, jet.hess)
    return -1j / u.hbar * h_psi


# --- Lagrangian -----------------------------------------------------------------


@dataclass(frozen=True)
class LagrangianSample:
    """``L0``, ``LM`` and their sum; ``split_residual`` compares the sum with the unsplit form.

    Fields are :class:`ScalarField` on the grid path and arrays over the probe
    points on the analytic path.
    """

    L0: object
    LM: object
    total: object
    unsplit: object
    split_residual: Residual


def _time_term(psi, psi_t, hbar):
    a, b = bilinear(psi, None, psi_t), bilinear(psi_t, None, psi)
    return 0.5j * hbar * (a - b), hbar * max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0))


def _lm_raw(grad, hbar, m):
    terms = 0
    for i, j, k in zip(*np.nonzero(LEVI_CIVITA)):
        terms = terms + LEVI_CIVITA[i, j, k] * bilinear(grad[i], PAULI[k], grad[j])
    return -1j * hbar**2 / (2 * m) * terms


def lagrangian_density(psi, dpsi_dt, derivative_source="grid", points=None, units=None) -> LagrangianSample:
    """Evaluate the split Lagrangian for a supplied time derivative (on- or off-shell)."""
    u = _units(units)
    jet = _jet(psi, derivative_source, points)
    psi_t = _as_array(dpsi_dt)
    if psi_t.shape != jet.psi.shape:
        raise InvalidArgumentError(f"time derivative shape {psi_t.shape} does not match psi {jet.psi.shape}")
    hbar, m = u.hbar, u.mass
    time, time_scale = _time_term(jet.psi, psi_t, hbar)
    grad_sq = sum(bilinear(jet.grad[i], None, jet.grad[i]) for i in range(3))
    kin_scale = hbar**2 / (2 * m) * np.max(np.abs(grad_sq), initial=0.0)
    l0 = time - hbar**2 / (2 * m) * grad_sq
    lm = _lm_raw(jet.grad, hbar, m)
    kinetic = sum(
        bilinear(jet.grad[i], PAULI_PRODUCTS[i, j], jet.grad[j]) for i in range(3) for j in range(3)
    )
    unsplit = time - hbar**2 / (2 * m) * kinetic
    scale = max(time_scale, kin_scale)
    l0, lm, unsplit = (_real(v, scale, name) for v, name in ((l0, "L0"), (lm, "LM"), (unsplit, "L")))
    total = l0 + lm
    residual = Residual(np.max(np.abs(unsplit - total), initial=0.0), scale)
    return LagrangianSample(_wrap(l0, jet), _wrap(lm, jet), _wrap(total, jet), _wrap(unsplit, jet), residual)


def on_shell_lagrangian(psi, derivative_source="grid", points=None, units=None) -> LagrangianSample:
    """:func:`lagrangian_density` with ``psi_t = -(i/hbar) H psi``."""
    psi_t = on_shell_time_derivative(psi, units, derivative_source, points)
    return lagrangian_density(psi, psi_t, derivative_source, points, units)


@dataclass(frozen=True)
class LMDivergenceCheck:
    """(a) pointwise ``LM`` vs its divergence form; (b) ``|grid_sum(LM)|`` (grid path only)."""

    pointwise: Residual
    integral: Residual | None


def lm_divergence_form(jet: _Jet, u: UnitsConfig) -> np.ndarray:
    """``(i hbar^2/2m) div(psi^+ s x grad psi)`` with the same derivative source as ``jet``."""
    # W_i = sum_jk eps_ijk psi^+ s_j d_k psi
    w = np.stack(
        [
            sum(LEVI_CIVITA[i, j, k] * bilinear(jet.psi, PAULI[j], jet.grad[k]) for j in range(3) for k in range(3))
            for i in range(3)
        ]
    )
    if jet.lattice is not None:
        div = divergence_array(w, jet.lattice)
    else:
        # d_i W_i = eps_ijk [d_i psi^+ s_j d_k psi + psi^+ s_j d_i d_k psi]
        div = 0
        for i, j, k in zip(*np.nonzero(LEVI_CIVITA)):
            e = LEVI_CIVITA[i, j, k]
            div = div + e * (bilinear(jet.grad[i], PAULI[j], jet.grad[k]) + bilinear(jet.psi, PAULI[j], jet.hess[i, k]))
    return 1j * u.hbar**2 / (2 * u.mass) * div


def lm_total_divergence_residual(psi, derivative_source="grid", points=None, units=None) -> LMDivergenceCheck:
    """Check that ``LM`` is a total divergence.

    The pointwise residual is exact on the analytic path and O(h^2) on the grid.
    The grid sum of ``LM`` vanishes to rounding on any periodic lattice because
    summation by parts moves the derivatives onto one factor, where commuting
    central differences are contracted with ``eps_ijk``.
    """
    u = _units(units)
    jet = _jet(psi, derivative_source, points)
    lm = _lm_raw(jet.grad, u.hbar, u.mass)
    div_form = lm_divergence_form(jet, u)
    grad_sq = sum(bilinear(jet.grad[i], None, jet.grad[i]).real for i in range(3))
    scale = u.hbar**2 / (2 * u.mass) * float(np.max(grad_sq, initial=0.0))
    pointwise = Residual(np.max(np.abs(lm - div_form), initial=0.0), scale)
    integral = None
    if jet.lattice is not None:
        total = grid_sum(ScalarField(jet.lattice, lm))
        magnitude = float(np.sum(np.abs(lm)) * jet.lattice.cell_volume)
        integral = Residual(abs(total), magnitude)
    return LMDivergenceCheck(pointwise, integral)


# --- Noether current --------------------------------------------------------------


@dataclass(frozen=True)
class NoetherCurrentSample:
    """Time component (density) and spatial components of the phase-symmetry current."""

    J0_component: object
    J_vector: object


def conjugate_momenta(jet: _Jet, u: UnitsConfig, include_lm: bool = True):
    """Spatial momenta ``dL/d(d_a psi^+)`` (column spinors) and ``dL/d(d_a psi)`` (row spinors).

    Both have shape ``(3, 2, ...)``; the row momentum is stored as the conjugate-free
    row so that ``row[a] . psi`` is the contraction in the current formula.
    """
    c = u.hbar**2 / (2 * u.mass)
    col = -c * jet.grad.astype(complex)
    row = -c * np.conj(jet.grad)
    if include_lm:
        for a, j, k in zip(*np.nonzero(LEVI_CIVITA)):
            e = LEVI_CIVITA[a, j, k]
            # d_a psi^+ slot: eps_ajk s_k d_j psi
            col[a] = col[a] - 1j * c * e * np.einsum("xy,y...->x...", PAULI[k], jet.grad[j])
            # d_j psi slot (row): eps_ajk d_a psi^+ s_k
            row[j] = row[j] - 1j * c * e * np.einsum("x...,xy->y...", np.conj(jet.grad[a]), PAULI[k])
    return col, row


def noether_current(psi, dpsi_dt=None, derivative_source="grid", points=None, units=None, include_lm=True):
    """Noether current of ``psi -> exp(-i a/hbar) psi`` with ``dpsi = -(i/hbar) psi da``.

    ``dpsi_dt`` is accepted for symmetry with :func:`lagrangian_density`; the
    momenta conjugate to ``psi_t`` do not depend on it, so it is only shape-checked.
    ``include_lm=False`` drops the momenta contributed by ``LM``.
    """
    u = _units(units)
    jet = _jet(psi, derivative_source, points)
    if dpsi_dt is not None and _as_array(dpsi_dt).shape != jet.psi.shape:
        raise InvalidArgumentError("time derivative shape does not match psi")
    hbar = u.hbar
    p = jet.psi
    d_psi = -1j / hbar * p          # per unit da
    d_psi_dag = 1j / hbar * np.conj(p)
    # time component: dpsi^+ (-(i hbar/2) psi) + ((i hbar/2) psi^+) dpsi
    j_time = np.sum(d_psi_dag * (-0.5j * hbar * p), axis=0) + np.sum(0.5j * hbar * np.conj(p) * d_psi, axis=0)
    col, row = conjugate_momenta(jet, u, include_lm)
    j_space = np.stack([np.sum(d_psi_dag * col[a], axis=0) + np.sum(row[a] * d_psi, axis=0) for a in range(3)])
    rho_scale = float(np.max(np.abs(p) ** 2, initial=0.0))
    j_scale = float(np.max(np.abs(col), initial=0.0) * np.max(np.abs(p), initial=0.0)) / hbar
    j_time = _real(j_time, rho_scale, "J^0")
    j_space = _real(j_space, j_scale, "J")
    if jet.lattice is None:
        return NoetherCurrentSample(j_time, j_space)
    return NoetherCurrentSample(ScalarField(jet.lattice, j_time), VectorField3(jet.lattice, j_space))


def lm_ablation_difference(psi, derivative_source="grid", points=None, units=None):
    """Noether spatial current with ``LM`` momenta minus the one without them."""
    full = noether_current(psi, None, derivative_source, points, units, include_lm=True).J_vector
    bare = noether_current(psi, None, derivative_source, points, units, include_lm=False).J_vector
    return full - bare
