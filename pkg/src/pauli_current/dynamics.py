"""Pauli Hamiltonian ``H = (sigma.pi)^2 / 2m + V``, time stepping and the continuity monitor."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .currents import _convective, magnetization_current
from .errors import BoundaryDensityError, InvalidArgumentError, SolverConvergenceError
from .gauge import (
    GaugeConfig,
    Residual,
    _require_gauge_lattice,
    all_pi_array,
    analytic_pi_pi,
    magnetic_field,
    pi_array,
)
from .grid import ScalarField, divergence_array, l2_norm
from .spinor import PAULI, PAULI_PRODUCTS, SpinorField, probability_density
from .states import AnalyticJet

INTEGRATORS = ("implicit_midpoint", "rk4")
BOUNDARY_DENSITY_LIMIT = 1e-10


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float
    steps: int = 1
    integrator: str = "implicit_midpoint"
    linear_solve_tolerance: float = 1e-12
    linear_solve_max_iterations: int = 500
    scalar_potential: ScalarField | None = None

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        if self.steps < 0:
            raise InvalidArgumentError(f"steps must be nonnegative, got {self.steps}")
        if self.integrator not in INTEGRATORS:
            raise InvalidArgumentError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if not self.linear_solve_tolerance > 0:
            raise InvalidArgumentError("linear_solve_tolerance must be positive")
        if self.linear_solve_max_iterations < 1:
            raise InvalidArgumentError("linear_solve_max_iterations must be positive")
        if self.scalar_potential is not None and not self.scalar_potential.is_real(0.0):
            raise InvalidArgumentError("scalar potential must be real")


def _potential_data(V):
    if V is None:
        return None
    if isinstance(V, ScalarField):
        return V.data.real
    return np.asarray(V, dtype=float)


# --- Hamiltonian --------------------------------------------------------------


def hamiltonian_array(psi: np.ndarray, gauge: GaugeConfig, V=None) -> np.ndarray:
    """``(1/2m) sum_ij s_i s_j pi_i (pi_j psi) + V psi`` on raw ``(2, nx, ny, nz)`` arrays.

    The matrices ``s_i s_j`` are constant, so each is applied to ``pi_j psi`` before
    the outer ``pi_i``; every ``(i, j)`` pair keeps its own unsimplified product.
    """
    pi_psi = [pi_array(psi, j, gauge) for j in range(3)]
    out = np.zeros_like(psi)
    inner = np.empty_like(psi)
    for i in range(3):
        inner[...] = 0
        for j in range(3):
            _accumulate_2x2(inner, PAULI_PRODUCTS[i, j], pi_psi[j])
        out += pi_array(inner, i, gauge)
    out /= 2 * gauge.units.mass
    v = _potential_data(V)
    if v is not None:
        out += v * psi
    return out


def _accumulate_2x2(out, mat, psi):
    """``out += mat @ psi`` componentwise, skipping zero entries (Pauli products are sparse)."""
    for a in range(2):
        for b in range(2):
            c = mat[a, b]
            if c == 1:
                out[a] += psi[b]
            elif c == -1:
                out[a] -= psi[b]
            elif c != 0:
                out[a] += c * psi[b]


def apply_hamiltonian(psi: SpinorField, gauge: GaugeConfig, V=None) -> SpinorField:
    _require_gauge_lattice(psi, gauge)
    if isinstance(V, ScalarField) and V.lattice != psi.lattice:
        raise InvalidArgumentError("scalar potential lattice does not match the spinor lattice")
    return SpinorField(psi.lattice, hamiltonian_array(psi.data, gauge, V))


def apply_hamiltonian_analytic(state, gauge: GaugeConfig, points, V=None) -> np.ndarray:
    """``H psi`` at ``points`` from exact derivatives; ``V`` is a callable of the points or None."""
    pipi = analytic_pi_pi(AnalyticJet.of(state, points), gauge)
    psi = state.value(points)
    out = np.einsum("ijab,ijb...->a...", PAULI_PRODUCTS, pipi) / (2 * gauge.units.mass)
    if V is not None:
        out = out + V(points) * psi
    return out


def _zeeman_forms(pipi, psi, b, gauge):
    """``(s.pi)^2 psi / 2m`` and ``[pi^2 / 2m - (q hbar / 2mc) s.B] psi`` from ``pi_i pi_j psi``."""
    u = gauge.units
    m = u.mass
    full = np.einsum("ijab,ijb...->a...", PAULI_PRODUCTS, pipi) / (2 * m)
    pi_sq = (pipi[0, 0] + pipi[1, 1] + pipi[2, 2]) / (2 * m)
    s_dot_b = np.einsum("kab,k...,b...->a...", PAULI, b, psi)
    zeeman = -u.charge * u.hbar / (2 * m * u.c) * s_dot_b
    return full, pi_sq + zeeman, (full, pi_sq, zeeman)


def zeeman_residual(psi: SpinorField, gauge: GaugeConfig) -> Residual:
    """Discrete L2 norm of ``(s.pi)^2/2m psi - [pi^2/2m - (q hbar/2mc) s.B] psi`` (O(h^2))."""
    _require_gauge_lattice(psi, gauge)
    pi_psi = all_pi_array(psi.data, gauge)
    pipi = np.stack([[pi_array(pi_psi[j], i, gauge) for j in range(3)] for i in range(3)])
    b = magnetic_field(gauge).data.real
    lhs, rhs, terms = _zeeman_forms(pipi, psi.data, b, gauge)
    lat = psi.lattice
    return Residual(l2_norm(lhs - rhs, lat), max(l2_norm(t, lat) for t in terms))


def zeeman_residual_analytic(state, gauge: GaugeConfig, points) -> Residual:
    """Max over points of the same difference evaluated with exact derivatives."""
    jet = AnalyticJet.of(state, points)
    pipi = analytic_pi_pi(jet, gauge)
    b = gauge.potential.magnetic_field(jet.points)
    lhs, rhs, terms = _zeeman_forms(pipi, jet.psi, b, gauge)
    scale = max(np.max(np.abs(t)) for t in terms)
    return Residual(np.max(np.abs(lhs - rhs)), scale)


def zeeman_splitting_ratio(envelope_state, gauge: GaugeConfig, b_values, points) -> float:
    """Fitted spin splitting per unit field, divided by ``hbar q / m c``.

    For each ``B_z`` the energies of ``phi (1,0)`` and ``phi (0,1)`` are computed as
    ``sum psi^+ H psi / sum psi^+ psi`` over ``points`` with exact derivatives; the
    slope of ``E_down - E_up`` against ``B_z`` is fitted by least squares. A value of
    one means the Zeeman coefficient is ``-q hbar / 2mc`` (g = 2).
    """
    from dataclasses import replace

    from .gauge import UniformField

    u = gauge.units
    if u.charge == 0:
        raise InvalidArgumentError("spin splitting needs a nonzero charge")
    splits = []
    for b_z in b_values:
        g = GaugeConfig(gauge.lattice, u, UniformField(b_z))
        energies = []
        for spinor in ((1.0, 0.0), (0.0, 1.0)):
            state = replace(envelope_state, spinor=spinor)
            psi = state.value(points)
            h_psi = apply_hamiltonian_analytic(state, g, points)
            energies.append((np.sum(np.conj(psi) * h_psi) / np.sum(np.conj(psi) * psi)).real)
        splits.append(energies[1] - energies[0])
    slope = np.polyfit(np.asarray(b_values, float), np.asarray(splits), 1)[0]
    return float(slope / (u.hbar * u.charge / (u.mass * u.c)))


# --- time stepping ------------------------------------------------------------


def check_boundary_density(psi: SpinorField, gauge: GaugeConfig, limit: float = BOUNDARY_DENSITY_LIMIT):
    """Fail loudly when a non-periodic potential sees density on the lattice faces."""
    if gauge.is_periodic:
        return
    rho = probability_density(psi).data.real
    peak = rho.max()
    edge = rho[psi.lattice.boundary_mask()].max()
    if peak > 0 and edge >= limit * peak:
        raise BoundaryDensityError(
            f"boundary density {edge:.3e} is {edge / peak:.3e} of the peak (limit {limit:.0e}); "
            f"the {gauge.kind} vector potential is not periodic"
        )


def _cayley_solve(psi, gauge, cfg, V):
    shape = psi.shape
    alpha = 0.5j * cfg.dt / gauge.units.hbar

    def lhs(x):
        x = x.reshape(shape)
        return (x + alpha * hamiltonian_array(x, gauge, V)).ravel()

    b = (psi - alpha * hamiltonian_array(psi, gauge, V)).ravel()
    op = LinearOperator((b.size, b.size), matvec=lhs, dtype=complex)
    count = [0]

    def tick(_):
        count[0] += 1

    restart = min(30, cfg.linear_solve_max_iterations)
    outer = -(-cfg.linear_solve_max_iterations // restart)
    x, info = gmres(
        op,
        b,
        x0=psi.ravel(),
        rtol=cfg.linear_solve_tolerance,
        atol=0.0,
        restart=restart,
        maxiter=outer,
        callback=tick,
        callback_type="pr_norm",
    )
    bnorm = np.linalg.norm(b)
    rel = np.linalg.norm(lhs(x) - b) / bnorm if bnorm > 0 else 0.0
    if info != 0:
        raise SolverConvergenceError(count[0], rel, cfg.linear_solve_tolerance)
    return x.reshape(shape), count[0], rel


def _rk4(psi, gauge, cfg, V):
    f = lambda y: (-1j / gauge.units.hbar) * hamiltonian_array(y, gauge, V)  # noqa: E731
    dt = cfg.dt
    k1 = f(psi)
    k2 = f(psi + 0.5 * dt * k1)
    k3 = f(psi + 0.5 * dt * k2)
    k4 = f(psi + dt * k3)
    return psi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def step(psi: SpinorField, gauge: GaugeConfig, cfg: EvolutionConfig) -> SpinorField:
    """Advance ``i hbar d psi/dt = H psi`` by one ``cfg.dt``."""
    _require_gauge_lattice(psi, gauge)
    V = cfg.scalar_potential
    if cfg.integrator == "rk4":
        return SpinorField(psi.lattice, _rk4(psi.data, gauge, cfg, V))
    new, _, _ = _cayley_solve(psi.data, gauge, cfg, V)
    return SpinorField(psi.lattice, new)


# --- continuity ---------------------------------------------------------------


def continuity_defect(psi_n: SpinorField, psi_next: SpinorField, gauge: GaugeConfig, dt: float, include_jm=True):
    """Pointwise ``(rho_{n+1} - rho_n)/dt + div J(psi_mid)``, with ``psi_mid`` the step average."""
    lat = psi_n.lattice
    rho_dot = (probability_density(psi_next).data - probability_density(psi_n).data).real / dt
    mid = SpinorField(lat, 0.5 * (psi_n.data + psi_next.data))
    current = _convective(mid.data, all_pi_array(mid.data, gauge), gauge.units.mass).real
    if include_jm:
        current = current + magnetization_current(mid, gauge).data.real
    div = divergence_array(current, lat)
    return rho_dot + div, rho_dot, div


def _rms(a) -> float:
    return float(np.sqrt(np.mean(a**2)))


def continuity_residual(psi_n, psi_next, gauge: GaugeConfig, cfg: EvolutionConfig, include_jm: bool = True) -> Residual:
    """RMS over sites of the discrete continuity defect."""
    defect, rho_dot, div = continuity_defect(psi_n, psi_next, gauge, cfg.dt, include_jm)
    return Residual(_rms(defect), max(_rms(rho_dot), _rms(div)))


def _continuity_pair(psi_n, psi_next, gauge, dt):
    """Residuals with and without ``JM`` sharing one evaluation of ``J0``."""
    lat = psi_n.lattice
    rho_dot = (probability_density(psi_next).data - probability_density(psi_n).data).real / dt
    mid = SpinorField(lat, 0.5 * (psi_n.data + psi_next.data))
    j0 = _convective(mid.data, all_pi_array(mid.data, gauge), gauge.units.mass).real
    div0 = divergence_array(j0, lat)
    div = divergence_array(j0 + magnetization_current(mid, gauge).data.real, lat)
    with_jm = Residual(_rms(rho_dot + div), max(_rms(rho_dot), _rms(div)))
    without = Residual(_rms(rho_dot + div0), max(_rms(rho_dot), _rms(div0)))
    return with_jm, without


@dataclass
class ContinuityReport:
    residuals: list = field(default_factory=list)
    residuals_without_jm: list = field(default_factory=list)
    norm_drift: list = field(default_factory=list)
    solver_iterations: list = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)

    @property
    def rms_residual(self) -> float:
        return float(np.sqrt(np.mean(np.square(self.residuals)))) if self.residuals else 0.0

    @property
    def max_norm_drift(self) -> float:
        return max(self.norm_drift, default=0.0)

    @property
    def max_flag_difference(self) -> float:
        """Largest ``|r(with JM) - r(without JM)|`` over the run."""
        return max((abs(a - b) for a, b in zip(self.residuals, self.residuals_without_jm)), default=0.0)

    def as_dict(self) -> dict:
        return {
            "steps": len(self.residuals),
            "residual_max": self.max_residual,
            "residual_rms": self.rms_residual,
            "norm_drift_max": self.max_norm_drift,
            "flag_difference_max": self.max_flag_difference,
            "residuals": [float(r) for r in self.residuals],
            "residuals_without_jm": [float(r) for r in self.residuals_without_jm],
            "norm_drift": list(self.norm_drift),
            "solver_iterations": list(self.solver_iterations),
        }


def evolve(psi: SpinorField, gauge: GaugeConfig, cfg: EvolutionConfig, observer=None):
    """Run ``cfg.steps`` steps, monitoring continuity and norm.

    ``observer(n, psi)`` is called for the initial state (n = 0) and after every step.
    Returns the final state and a :class:`ContinuityReport`; norm drift is measured
    against the initial norm.
    """
    _require_gauge_lattice(psi, gauge)
    check_boundary_density(psi, gauge)
    report = ContinuityReport()
    norm0 = psi.norm_squared()
    V = cfg.scalar_potential
    if observer is not None:
        observer(0, psi)
    for n in range(1, cfg.steps + 1):
        if cfg.integrator == "rk4":
            new = SpinorField(psi.lattice, _rk4(psi.data, gauge, cfg, V))
            iters = 0
        else:
            data, iters, _ = _cayley_solve(psi.data, gauge, cfg, V)
            new = SpinorField(psi.lattice, data)
        check_boundary_density(new, gauge)
        with_jm, without = _continuity_pair(psi, new, gauge, cfg.dt)
        report.residuals.append(float(with_jm))
        report.residuals_without_jm.append(float(without))
        report.norm_drift.append(abs(new.norm_squared() / norm0 - 1.0))
        report.solver_iterations.append(iters)
        psi = new
        if observer is not None:
            observer(n, psi)
    return psi, report
