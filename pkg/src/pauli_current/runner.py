"""Scenario setup, verification suites, evolution runs and convergence studies.

A run is described by a flat INI file (see :meth:`ScenarioConfig.from_file`).
Every resolved setting, including defaults, is copied into the report so a
report alone is enough to reproduce a run.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .currents import (
    _antisymmetric_terms,
    analytic_currents,
    current_equivalence_analytic,
    current_equivalence_grid,
    curl_m_residual,
    decompose,
    magnetization_current,
)
from .dynamics import (
    EvolutionConfig,
    evolve as run_evolution,
    zeeman_residual,
    zeeman_residual_analytic,
    zeeman_splitting_ratio,
)
from .errors import InvalidArgumentError, MemoryGuardError
from .gauge import GaugeConfig, Residual, UniformField, UnitsConfig, ZeroPotential, analytic_pi, leibniz_grid_residual, leibniz_identity_residual
from .grid import Lattice, divergence_array
from .noether import lm_ablation_difference, lm_total_divergence_residual, noether_current, on_shell_lagrangian
from .spinor import SpinorField, pauli_identity_residual, pauli_product_residual, probability_density, sample
from .states import AnalyticJet, GaussianPacket, PeriodicImages, PlaneWave, TexturedGaussian, probe_points

log = logging.getLogger(__name__)

SCENARIOS = ("plane_wave", "gaussian_spin_up", "gaussian_spin_texture", "uniform_b_zeeman", "neutral_particle")
PATHS = ("grid", "analytic", "both")
GAUGE_KINDS = ("zero", "uniform_b_symmetric")

# Tolerances; "relative" ones are compared with residual / scale.
EXACT_RTOL = 1e-13
ANALYTIC_RTOL = 1e-12
NORM_DRIFT_TOL = 1e-9
FLAG_DIFFERENCE_TOL = 1e-13
MIN_ORDER = 1.9
EXACT_FLOOR = 1e-12


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to set up and run one scenario."""

    name: str = "gaussian_spin_up"
    dims: tuple = (32, 32, 32)
    spacing: tuple = (0.5, 0.5, 0.5)
    hbar: float = 1.0
    mass: float = 1.0
    c: float = 1.0
    charge: float = 1.0
    gauge_kind: str = "zero"
    b_z: float = 0.0
    wavevector: tuple = (1, 0, 0)
    width: float = 1.0
    spinor: tuple = (1.0, 0.0)
    pitch: tuple = (0.5, 0.0, 0.0)
    twist: tuple = (0.0, 0.3, 0.0)
    dt: float = 0.05
    steps: int = 20
    integrator: str = "implicit_midpoint"
    linear_solve_tolerance: float = 1e-12
    linear_solve_max_iterations: int = 500
    snapshot_every: int = 10
    probe_count: int = 100
    grid_error_constant: float = 2.0
    refinements: int = 3
    converge_dims: tuple = (16, 16, 16)
    converge_spacing: tuple = (0.5, 0.5, 0.5)
    converge_steps: int = 2
    max_sites: int = 64**3
    seed: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise InvalidArgumentError(f"unknown scenario {self.name!r}; choose from {SCENARIOS}")
        if self.gauge_kind not in GAUGE_KINDS:
            raise InvalidArgumentError(f"gauge kind must be one of {GAUGE_KINDS}, got {self.gauge_kind!r}")
        if any(float(n) != int(n) for n in self.wavevector):
            raise InvalidArgumentError(f"wavevector entries must be integers, got {self.wavevector}")
        lattice = self.lattice()
        if self.name != "plane_wave" and self.width < 2 * max(lattice.spacing):
            raise InvalidArgumentError(f"packet width {self.width} is below twice the spacing {max(lattice.spacing)}")
        if not np.any(np.abs(np.asarray(self.spinor, complex)) > 0):
            raise InvalidArgumentError("spinor must be nonzero")
        self.units()
        self.evolution()
        if self.refinements < 2:
            raise InvalidArgumentError("refinements must be at least 2")
        if self.grid_error_constant <= 0:
            raise InvalidArgumentError("grid_error_constant must be positive")
        if self.snapshot_every < 1 or self.probe_count < 1 or self.max_sites < 1:
            raise InvalidArgumentError("snapshot_every, probe_count and max_sites must be positive")
        if any(int(n) < 3 for n in self.converge_dims):
            raise InvalidArgumentError(f"converge_dims must be >= 3, got {self.converge_dims}")
        self.converge_lattice()

    # --- construction ---------------------------------------------------------

    @classmethod
    def default(cls, name: str = "gaussian_spin_up", **overrides) -> ScenarioConfig:
        presets = {
            "plane_wave": {"spinor": (1.0, 0.0)},
            "gaussian_spin_up": {"spinor": (1.0, 0.0)},
            "gaussian_spin_texture": {},
            # the symmetric-gauge potential is not periodic, so the packet must stay clear of the faces
            "uniform_b_zeeman": {
                "gauge_kind": "uniform_b_symmetric",
                "b_z": 1.0,
                "dims": (40, 40, 40),
                "converge_dims": (32, 32, 32),
                "refinements": 2,
            },
            "neutral_particle": {"charge": 0.0},
        }
        if name not in presets:
            raise InvalidArgumentError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
        return cls(name=name, **{**presets[name], **overrides})

    @classmethod
    def from_string(cls, text: str) -> ScenarioConfig:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise InvalidArgumentError(f"cannot parse config: {exc}") from exc
        return cls._from_parser(parser)

    @classmethod
    def from_file(cls, path) -> ScenarioConfig:
        path = Path(path)
        if not path.is_file():
            raise InvalidArgumentError(f"config file not found: {path}")
        return cls.from_string(path.read_text())

    @classmethod
    def _from_parser(cls, parser) -> ScenarioConfig:
        known = {k: v for k, v in _SCHEMA.items()}
        values = {}
        for section in parser.sections():
            if section not in _SECTIONS:
                raise InvalidArgumentError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in known or _SCHEMA[key][0] != section:
                    raise InvalidArgumentError(f"unknown key {key!r} in [{section}]")
                values[key] = _parse_value(key, raw, _SCHEMA[key][1])
        name = values.pop("name", "gaussian_spin_up")
        return cls.default(name, **values)

    def with_overrides(self, **changes) -> ScenarioConfig:
        return replace(self, **changes)

    # --- derived objects ------------------------------------------------------

    def lattice(self) -> Lattice:
        return Lattice(self.dims, self.spacing)

    def converge_lattice(self) -> Lattice:
        """Coarsest level of a convergence study."""
        return Lattice(self.converge_dims, self.converge_spacing)

    def units(self) -> UnitsConfig:
        return UnitsConfig(self.hbar, self.mass, self.c, self.charge)

    def potential(self):
        return UniformField(self.b_z) if self.gauge_kind == "uniform_b_symmetric" else ZeroPotential()

    def gauge(self, lattice: Lattice | None = None) -> GaugeConfig:
        return GaugeConfig(lattice or self.lattice(), self.units(), self.potential())

    def evolution(self, dt: float | None = None, steps: int | None = None) -> EvolutionConfig:
        return EvolutionConfig(
            dt=self.dt if dt is None else dt,
            steps=self.steps if steps is None else steps,
            integrator=self.integrator,
            linear_solve_tolerance=self.linear_solve_tolerance,
            linear_solve_max_iterations=self.linear_solve_max_iterations,
        )

    def state(self, lattice: Lattice | None = None):
        """The scenario's analytic state, normalised numerically on ``lattice``."""
        lattice = lattice or self.lattice()
        spinor = tuple(complex(s) for s in self.spinor)
        if self.name == "plane_wave":
            return PlaneWave.on_lattice(lattice, tuple(int(n) for n in self.wavevector), spinor)
        if self.name == "gaussian_spin_texture":
            base = TexturedGaussian(width=self.width, pitch=self.pitch, twist=self.twist)
        elif self.name in ("gaussian_spin_up", "neutral_particle"):
            base = GaussianPacket(width=self.width, spinor=(1.0, 0.0))
        else:
            base = GaussianPacket(width=self.width, spinor=spinor)
        return base.normalized_on(lattice)

    def periodic_state(self, lattice: Lattice):
        """Smooth periodic version of the state, used for grid convergence on periodic gauges."""
        state = self.state(lattice)
        if self.name == "plane_wave":
            return state
        return PeriodicImages(state, lattice.lengths)

    def length_scale(self) -> float:
        """Shortest length over which the scenario state varies."""
        if self.name == "plane_wave":
            lengths = self.lattice().lengths
            k = max(2 * np.pi * abs(n) / l for n, l in zip(self.wavevector, lengths))
            return 1.0 / k if k > 0 else min(lengths)
        scale = self.width
        if self.name == "gaussian_spin_texture":
            for rate in (self.pitch, self.twist):
                norm = float(np.linalg.norm(rate))
                if norm > 0:
                    scale = min(scale, 1.0 / norm)
        return scale

    def grid_tolerance(self) -> float:
        """Relative bound for O(h^2) grid residuals: ``grid_error_constant * (h / length_scale)^2``."""
        return self.grid_error_constant * (max(self.spacing) / self.length_scale()) ** 2

    def probes(self) -> np.ndarray:
        radius = 3.0 * self.width if self.name != "plane_wave" else 0.25 * min(self.lattice().lengths)
        return probe_points(self.probe_count, radius=radius, seed=self.seed)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["spinor"] = [[complex(s).real, complex(s).imag] for s in self.spinor]
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


_SECTIONS = ("scenario", "lattice", "units", "gauge", "state", "evolution", "verify", "converge", "output")
# key -> (section, kind)
_SCHEMA = {
    "name": ("scenario", "str"),
    "seed": ("scenario", "int"),
    "dims": ("lattice", "ints"),
    "spacing": ("lattice", "floats"),
    "hbar": ("units", "float"),
    "mass": ("units", "float"),
    "c": ("units", "float"),
    "charge": ("units", "float"),
    "gauge_kind": ("gauge", "str"),
    "b_z": ("gauge", "float"),
    "wavevector": ("state", "ints"),
    "width": ("state", "float"),
    "spinor": ("state", "complexes"),
    "pitch": ("state", "floats"),
    "twist": ("state", "floats"),
    "dt": ("evolution", "float"),
    "steps": ("evolution", "int"),
    "integrator": ("evolution", "str"),
    "linear_solve_tolerance": ("evolution", "float"),
    "linear_solve_max_iterations": ("evolution", "int"),
    "snapshot_every": ("evolution", "int"),
    "probe_count": ("verify", "int"),
    "grid_error_constant": ("verify", "float"),
    "refinements": ("converge", "int"),
    "converge_dims": ("converge", "ints"),
    "converge_spacing": ("converge", "floats"),
    "converge_steps": ("converge", "int"),
    "max_sites": ("converge", "int"),
    "output_dir": ("output", "str"),
}


def _parse_value(key, raw, kind):
    raw = raw.strip()
    try:
        if kind == "str":
            return raw
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if kind == "ints":
            values = tuple(float(p) for p in parts)
            if any(v != int(v) for v in values):
                raise ValueError("expected integers")
            return tuple(int(v) for v in values)
        if kind == "floats":
            return tuple(float(p) for p in parts)
        return tuple(complex(p.replace(" ", "")) for p in parts)
    except ValueError as exc:
        raise InvalidArgumentError(f"bad value for {key!r}: {raw!r} ({exc})") from exc


# --- reports -----------------------------------------------------------------


@dataclass
class RunReport:
    """Checks, convergence tables and continuity series from one command."""

    command: str
    config: ScenarioConfig
    path: str = "both"
    checks: list = field(default_factory=list)
    convergence: list = field(default_factory=list)
    continuity: dict | None = None
    snapshots: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks) and all(t["passed"] for t in self.convergence)

    def add(self, name, path, residual, tolerance, relative=True, exact=True):
        """Record a residual against its tolerance; ``relative`` compares ``residual / scale``."""
        scale = getattr(residual, "scale", None)
        value = float(residual)
        measured = residual.relative if (relative and isinstance(residual, Residual)) else value
        entry = {
            "name": name,
            "path": path,
            "residual": value,
            "scale": scale,
            "measured": measured,
            "tolerance": tolerance,
            "tolerance_kind": "relative" if relative else "absolute",
            "kind": "exact" if exact else "discretization",
            "passed": bool(np.isfinite(measured) and measured <= tolerance),
        }
        self.checks.append(entry)
        log.info("%-40s %-9s %.3e <= %.1e %s", name, path, measured, tolerance, "ok" if entry["passed"] else "FAIL")
        return entry

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "path": self.path,
            "passed": self.passed,
            "checks": self.checks,
            "convergence": self.convergence,
            "continuity": self.continuity,
            "snapshots": self.snapshots,
            "notes": self.notes,
            "provenance": {
                "package_version": __version__,
                "config_sha256": self.config.digest(),
                "config": self.config.to_dict(),
                "integrator_note": "time integration is a numerical choice of this package, not part of the model",
                "linear_solver": "scipy.sparse.linalg.gmres, restart 30, matrix-free",
            },
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.as_dict()), indent=2, sort_keys=True)

    def write(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        target = out_dir / f"{self.command}_report.json"
        target.write_text(self.to_json() + "\n")
        return target


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _wants(path: str, which: str) -> bool:
    return path == "both" or path == which


def _secondary_state(cfg: ScenarioConfig, lattice: Lattice):
    """A second, different state for two-state identities."""
    return TexturedGaussian(width=cfg.width * 1.1, center=(0.3, -0.2, 0.1), momentum=(0.4, -0.1, 0.2)).normalized_on(lattice)


def _random_field(lattice: Lattice, seed: int) -> SpinorField:
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(2, *lattice.dims)) + 1j * rng.normal(size=(2, *lattice.dims))
    return SpinorField(lattice, data)


# --- verify ------------------------------------------------------------------


def verify(cfg: ScenarioConfig, path: str = "both") -> RunReport:
    """Run every identity check of the scenario; exact checks always run."""
    if path not in PATHS:
        raise InvalidArgumentError(f"path must be one of {PATHS}, got {path!r}")
    report = RunReport("verify", cfg, path)
    lattice = cfg.lattice()
    gauge = cfg.gauge(lattice)
    free = GaugeConfig(lattice, cfg.units(), ZeroPotential())
    state = cfg.state(lattice)
    other = _secondary_state(cfg, lattice)
    psi = sample(state, lattice)
    points = cfg.probes()
    grid_tol = cfg.grid_tolerance()
    rng = np.random.default_rng(cfg.seed)

    # Pauli algebra
    report.add("pauli_products", "exact", pauli_product_residual(), 0.0, relative=False)
    pairs = rng.normal(size=(1000, 2, 3))
    pairs /= np.linalg.norm(pairs, axis=2, keepdims=True)
    worst = max(pauli_identity_residual(u, v) for u, v in pairs)
    report.add("pauli_identity_random_pairs", "exact", worst, EXACT_RTOL, relative=False)

    # Leibniz identity
    if _wants(path, "analytic"):
        for name, (a, b) in {"self": (state, state), "pair": (state, other)}.items():
            for axis in range(3):
                r1 = leibniz_identity_residual(a, b, axis, gauge.with_charge(1.0), points)
                r0 = leibniz_identity_residual(a, b, axis, gauge.with_charge(0.0), points)
                report.add(f"leibniz_{name}_axis{axis}", "analytic", Residual(max(r0, r1), max(r0.scale, r1.scale)), ANALYTIC_RTOL)
                report.add(
                    f"leibniz_{name}_axis{axis}_charge_independence",
                    "analytic",
                    Residual(abs(float(r1) - float(r0)), max(r0.scale, r1.scale)),
                    ANALYTIC_RTOL,
                )
    if _wants(path, "grid"):
        psi_other = sample(other, lattice)
        for axis in range(3):
            r = leibniz_grid_residual(psi, psi_other, axis, gauge)
            report.add(f"leibniz_grid_axis{axis}", "grid", r, grid_tol, exact=False)

    # antisymmetric remainder, with a nonzero vector potential
    b_gauge = GaugeConfig(lattice, cfg.units().with_charge(1.0), UniformField(cfg.b_z or 1.0))
    for label, field_ in (("scenario", psi), ("random", _random_field(lattice, cfg.seed))):
        from .currents import antisymmetric_remainder

        report.add(f"antisymmetric_remainder_{label}", "grid", antisymmetric_remainder(field_, b_gauge), EXACT_RTOL)
    if _wants(path, "analytic"):
        pi_psi, _, _ = analytic_pi(AnalyticJet.of(state, points), b_gauge)
        total, mag = _antisymmetric_terms(pi_psi)
        report.add("antisymmetric_remainder_analytic", "analytic", Residual(np.max(np.abs(total)), np.max(mag)), EXACT_RTOL)

    # direct current vs J0 + JM
    dec = decompose(psi, gauge)
    if _wants(path, "analytic"):
        for q in (0.0, 1.0):
            r = current_equivalence_analytic(state, gauge.with_charge(q), points)
            report.add(f"current_equivalence_q{q:g}", "analytic", r, ANALYTIC_RTOL)
    if _wants(path, "grid"):
        report.add("current_equivalence_grid", "grid", current_equivalence_grid(psi, gauge), grid_tol, exact=False)

    # J_M is divergence-free, charge independent; M and c curl M
    jm = dec.JM.data.real
    div = divergence_array(jm, lattice)
    report.add("div_JM", "grid", Residual(np.max(np.abs(div)), np.max(np.abs(jm)) / min(lattice.spacing)), EXACT_RTOL)
    jm_q0 = magnetization_current(psi, gauge.with_charge(0.0)).data
    jm_q1 = magnetization_current(psi, gauge.with_charge(1.0)).data
    report.add("JM_charge_independence_bitwise", "grid", float(np.max(np.abs(jm_q0 - jm_q1))), 0.0, relative=False)
    report.add("magnetization_relation", "grid", curl_m_residual(psi, gauge), ANALYTIC_RTOL)
    report.notes["max_abs_M"] = dec.M.max_abs()
    report.notes["max_abs_JM"] = dec.JM.max_abs()
    report.notes["max_abs_J0"] = dec.J0.max_abs()
    if cfg.charge == 0:
        report.add("neutral_M_identically_zero", "grid", dec.M.max_abs(), 0.0, relative=False)

    # Zeeman expansion
    if _wants(path, "analytic"):
        report.add("zeeman_analytic", "analytic", zeeman_residual_analytic(state, gauge, points), ANALYTIC_RTOL)
        if cfg.name == "uniform_b_zeeman" and cfg.charge != 0:
            envelope = GaussianPacket(width=cfg.width)
            ratio = zeeman_splitting_ratio(envelope, gauge, np.linspace(0.25, 1.0, 4) * (cfg.b_z or 1.0), points)
            report.notes["zeeman_splitting_ratio"] = ratio
            report.add("zeeman_g_factor", "analytic", abs(ratio - 1.0), 1e-10, relative=False)
    if _wants(path, "grid"):
        report.add("zeeman_grid", "grid", zeeman_residual(psi, gauge), grid_tol, exact=False)

    # Noether suite (A = 0)
    units = cfg.units()
    n_grid = noether_current(psi, None, "grid", units=free)
    rho = probability_density(psi).data.real
    report.add("noether_J0_equals_rho", "grid", Residual(np.max(np.abs(n_grid.J0_component.data - rho)), rho.max()), EXACT_RTOL)
    lag = on_shell_lagrangian(psi, "grid", units=free)
    report.add("lagrangian_split_grid", "grid", lag.split_residual, ANALYTIC_RTOL)
    if _wants(path, "analytic"):
        cur = analytic_currents(state, free, points)
        n_an = noether_current(state, None, "analytic", points, units)
        report.add(
            "noether_J0_equals_rho_analytic",
            "analytic",
            Residual(np.max(np.abs(n_an.J0_component - cur["rho"])), np.max(cur["rho"])),
            EXACT_RTOL,
        )
        j_scale = max(np.max(np.abs(cur[k])) for k in ("J0", "JM", "J_total"))
        report.add(
            "noether_current_equals_J0_plus_JM",
            "analytic",
            Residual(np.max(np.abs(n_an.J_vector - cur["J_total"])), j_scale),
            ANALYTIC_RTOL,
        )
        diff = lm_ablation_difference(state, "analytic", points, units)
        report.add("noether_LM_ablation_equals_JM", "analytic", Residual(np.max(np.abs(diff - cur["JM"])), j_scale), ANALYTIC_RTOL)
        lag_an = on_shell_lagrangian(state, "analytic", points, units)
        report.add("lagrangian_split_analytic", "analytic", lag_an.split_residual, ANALYTIC_RTOL)
    if _wants(path, "grid"):
        j_scale = max(dec.J0.max_abs(), dec.JM.max_abs())
        r = Residual(np.max(np.abs(n_grid.J_vector.data.real - decompose(psi, free).J_total.data.real)), j_scale)
        report.add("noether_current_grid", "grid", r, grid_tol, exact=False)

    # L_M as a total divergence
    lm_grid = lm_total_divergence_residual(psi, "grid", units=units)
    report.add("LM_grid_sum", "grid", lm_grid.integral, ANALYTIC_RTOL)
    if _wants(path, "grid"):
        report.add("LM_divergence_form_grid", "grid", lm_grid.pointwise, grid_tol, exact=False)
    if _wants(path, "analytic"):
        lm_an = lm_total_divergence_residual(state, "analytic", points, units)
        report.add("LM_divergence_form_analytic", "analytic", lm_an.pointwise, ANALYTIC_RTOL)
    return report


# --- evolve ------------------------------------------------------------------


SNAPSHOT_COLUMNS = ("x", "y", "z", "rho", "J0_x", "J0_y", "J0_z", "JM_x", "JM_y", "JM_z", "J_x", "J_y", "J_z", "M_x", "M_y", "M_z")


def write_snapshot(path, psi: SpinorField, gauge: GaugeConfig, step: int, time: float, cfg: ScenarioConfig):
    """Tabular snapshot of densities and currents, one site per row, x fastest."""
    dec = decompose(psi, gauge)
    lat = psi.lattice
    cols = [lat.points()]
    cols.append(dec.rho.flat().real[None])
    for f in (dec.J0, dec.JM, dec.J_total, dec.M):
        cols.append(f.flat().real)
    table = np.vstack(cols).T
    u = gauge.units
    header = "\n".join(
        [
            f"step {step} time {time:.17g}",
            f"grid dims {lat.dims} spacing {lat.spacing} (x fastest)",
            f"units hbar={u.hbar:g} mass={u.mass:g} c={u.c:g} charge={u.charge:g} (Gaussian units)",
            f"scenario {cfg.name} gauge {gauge.kind}",
            " ".join(SNAPSHOT_COLUMNS),
        ]
    )
    np.savetxt(path, table, fmt="%.17e", header=header)


def evolve(cfg: ScenarioConfig, out_dir=None) -> RunReport:
    """Time-evolve the scenario, monitoring continuity and writing snapshots."""
    report = RunReport("evolve", cfg, "grid")
    lattice = cfg.lattice()
    gauge = cfg.gauge(lattice)
    psi = sample(cfg.state(lattice), lattice)
    evo = cfg.evolution()
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    def observer(n, field_):
        if n % cfg.snapshot_every == 0 or n == evo.steps:
            name = f"snapshot_{n:06d}.tsv"
            write_snapshot(out / name, field_, gauge, n, n * evo.dt, cfg)
            report.snapshots.append({"step": n, "time": n * evo.dt, "file": name})

    _, cont = run_evolution(psi, gauge, evo, observer)
    report.continuity = cont.as_dict()
    if cont.residuals:
        report.add("norm_drift", "grid", cont.max_norm_drift, NORM_DRIFT_TOL, relative=False)
        report.add("continuity_flag_difference", "grid", cont.max_flag_difference, FLAG_DIFFERENCE_TOL, relative=False)
    return report


# --- converge ----------------------------------------------------------------


def fit_order(spacings, residuals) -> float:
    """Least-squares slope of ``log r`` against ``log h``."""
    return float(np.polyfit(np.log(spacings), np.log(residuals), 1)[0])


def _grid_residuals(cfg: ScenarioConfig, lattice: Lattice, dt: float) -> dict:
    gauge = cfg.gauge(lattice)
    state = cfg.periodic_state(lattice) if gauge.is_periodic else cfg.state(lattice)
    psi = sample(state, lattice)
    other_state = _secondary_state(cfg, lattice)
    if gauge.is_periodic:
        other_state = PeriodicImages(other_state, lattice.lengths)
    other = sample(other_state, lattice)
    out = {
        "leibniz_grid": leibniz_grid_residual(psi, other, 0, gauge),
        "current_equivalence_grid": current_equivalence_grid(psi, gauge),
        "zeeman_grid": zeeman_residual(psi, gauge),
    }
    jm = magnetization_current(psi, gauge).data.real
    out["div_JM"] = Residual(np.max(np.abs(divergence_array(jm, lattice))), np.max(np.abs(jm)) / min(lattice.spacing))
    if cfg.converge_steps > 0:
        _, cont = run_evolution(psi, gauge, cfg.evolution(dt=dt, steps=cfg.converge_steps))
        out["continuity"] = Residual(cont.rms_residual, 1.0)
    return out


def converge(cfg: ScenarioConfig, refinements: int | None = None) -> RunReport:
    """Refine ``(h, dt)`` by halves from ``converge_dims`` and fit convergence orders."""
    refinements = cfg.refinements if refinements is None else refinements
    if refinements < 2:
        raise InvalidArgumentError("refinements must be at least 2")
    base = cfg.converge_lattice()
    lattices = [base]
    for _ in range(refinements - 1):
        lattices.append(lattices[-1].refined(2))
    finest = lattices[-1]
    if finest.n_sites > cfg.max_sites:
        raise MemoryGuardError(f"refined grid {finest.dims} has {finest.n_sites} sites, above the cap {cfg.max_sites}")
    report = RunReport("converge", cfg, "grid")
    dt0 = cfg.dt * base.spacing[0] / cfg.spacing[0]
    rows = []
    for level, lat in enumerate(lattices):
        rows.append(_grid_residuals(cfg, lat, dt0 / 2**level))
    spacings = [lat.spacing[0] for lat in lattices]
    for name in rows[0]:
        res = [rows[i][name] for i in range(len(rows))]
        rel = [r.relative for r in res]
        entry = {
            "name": name,
            "h": spacings,
            "dt": [dt0 / 2**i for i in range(len(rows))],
            "residual": [float(r) for r in res],
            "relative": rel,
        }
        if max(rel) <= EXACT_FLOOR:
            entry.update(order=None, status="exact", passed=True)
        else:
            order = fit_order(spacings, [float(r) for r in res])
            entry.update(order=order, status="fitted", minimum_order=MIN_ORDER, passed=bool(order >= MIN_ORDER))
        report.convergence.append(entry)
        log.info("%-28s %s", name, entry.get("order") or entry["status"])
    return report
