import json

import numpy as np
import pytest

from pauli_current.cli import main
from pauli_current.errors import InvalidArgumentError, MemoryGuardError
from pauli_current.runner import SCENARIOS, ScenarioConfig, converge, evolve, fit_order, verify

SMALL = {"dims": (16, 16, 16), "spacing": (0.5, 0.5, 0.5)}


def _write(tmp_path, text, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def _load_snapshot(path, dims):
    """Snapshot table reshaped to ``(column, nx, ny, nz)``; rows are x-fastest."""
    table = np.loadtxt(path)
    return table.T.reshape(table.shape[1], *dims, order="F")


def _stencil(arr, axis, h):
    """Independent periodic central difference."""
    return (np.roll(arr, -1, axis) - np.roll(arr, 1, axis)) / (2 * h)


# --- config ------------------------------------------------------------------


def test_defaults_round_trip_through_ini(tmp_path):
    path = _write(tmp_path, "[scenario]\nname = gaussian_spin_texture\n[lattice]\ndims = 20, 20, 24\n")
    cfg = ScenarioConfig.from_file(path)
    assert cfg.name == "gaussian_spin_texture"
    assert cfg.dims == (20, 20, 24)
    assert cfg.spacing == (0.5, 0.5, 0.5)


def test_presets_apply_before_file_overrides():
    cfg = ScenarioConfig.from_string("[scenario]\nname = uniform_b_zeeman\n[gauge]\nb_z = 0.5\n")
    assert cfg.gauge_kind == "uniform_b_symmetric"
    assert cfg.b_z == 0.5
    assert ScenarioConfig.default("neutral_particle").charge == 0.0


def test_complex_spinor_parses():
    cfg = ScenarioConfig.from_string("[state]\nspinor = 1, 0+1j\n")
    assert cfg.spinor == (1 + 0j, 1j)


@pytest.mark.parametrize(
    "text",
    [
        "[lattice]\ndims = 2, 2, 2\n",
        "[lattice]\nbogus = 1\n",
        "[nowhere]\ndims = 8, 8, 8\n",
        "[units]\ndims = 8, 8, 8\n",
        "[scenario]\nname = hydrogen\n",
        "[state]\nwavevector = 1.5, 0, 0\n",
        "[state]\nwidth = 0.5\n",
        "[state]\nspinor = 0, 0\n",
        "[lattice]\nspacing = -0.5, 0.5, 0.5\n",
        "[gauge]\ngauge_kind = coulomb\n",
        "[converge]\nrefinements = 1\n",
        "[verify]\ngrid_error_constant = 0\n",
        "[evolution]\nsteps = many\n",
        "not an ini file",
    ],
)
def test_invalid_configs_raise(text):
    with pytest.raises(InvalidArgumentError):
        ScenarioConfig.from_string(text)


def test_missing_file_raises(tmp_path):
    with pytest.raises(InvalidArgumentError):
        ScenarioConfig.from_file(tmp_path / "absent.ini")


def test_digest_tracks_every_setting():
    a = ScenarioConfig.default()
    assert a.digest() == ScenarioConfig.default().digest()
    assert a.digest() != a.with_overrides(seed=1).digest()


def test_grid_tolerance_follows_truncation_estimate():
    cfg = ScenarioConfig.default(width=2.0)
    assert cfg.grid_tolerance() == pytest.approx(2.0 * (0.5 / 2.0) ** 2)
    wave = ScenarioConfig.default("plane_wave")
    k = 2 * np.pi / 16.0
    assert wave.grid_tolerance() == pytest.approx(2.0 * (0.5 * k) ** 2)


# --- verify ------------------------------------------------------------------


@pytest.mark.parametrize("name", SCENARIOS)
def test_verify_passes_for_every_scenario(name):
    extra = {"dims": (40, 40, 40)} if name == "uniform_b_zeeman" else SMALL
    cfg = ScenarioConfig.default(name, **extra, probe_count=20)
    report = verify(cfg)
    failed = [(c["name"], c["measured"], c["tolerance"]) for c in report.checks if not c["passed"]]
    assert not failed
    assert report.passed


def test_verify_runs_in_documented_order():
    names = [c["name"] for c in verify(ScenarioConfig.default(**SMALL, probe_count=10)).checks]
    groups = ["pauli", "leibniz", "antisymmetric", "current_equivalence", "div_JM", "zeeman", "noether", "LM"]
    first = [next(i for i, n in enumerate(names) if n.startswith(g)) for g in groups]
    assert first == sorted(first)


def test_grid_path_skips_analytic_checks():
    report = verify(ScenarioConfig.default(**SMALL, probe_count=10), "grid")
    assert report.checks
    assert not any(c["path"] == "analytic" for c in report.checks)


def test_analytic_path_keeps_only_exact_checks():
    report = verify(ScenarioConfig.default(**SMALL, probe_count=10), "analytic")
    assert any(c["path"] == "analytic" for c in report.checks)
    assert all(c["kind"] == "exact" for c in report.checks)


def test_verify_rejects_unknown_path():
    with pytest.raises(InvalidArgumentError):
        verify(ScenarioConfig.default(**SMALL), "spectral")


def test_every_check_carries_tolerance_and_flag():
    for check in verify(ScenarioConfig.default(**SMALL, probe_count=10)).checks:
        assert {"name", "path", "residual", "tolerance", "passed", "measured"} <= set(check)
        assert check["passed"] == (check["measured"] <= check["tolerance"])


def test_neutral_particle_has_zero_m_but_nonzero_jm(tmp_path):
    cfg = ScenarioConfig.default("neutral_particle", **SMALL, steps=0, output_dir=str(tmp_path))
    checks = {c["name"]: c for c in verify(cfg).checks}
    assert checks["neutral_M_identically_zero"]["passed"]
    assert checks["JM_charge_independence_bitwise"]["residual"] == 0.0
    evolve(cfg, tmp_path)
    cols = _load_snapshot(tmp_path / "snapshot_000000.tsv", cfg.dims)
    assert np.all(cols[13:16] == 0.0)
    assert np.max(np.abs(cols[7:10])) > 1e-3


# --- evolve ------------------------------------------------------------------


def test_zero_steps_writes_only_initial_snapshot(tmp_path):
    report = evolve(ScenarioConfig.default(**SMALL, steps=0), tmp_path)
    assert [s["step"] for s in report.snapshots] == [0]
    assert sorted(p.name for p in tmp_path.iterdir()) == ["snapshot_000000.tsv"]


def test_snapshot_schedule_includes_final_step(tmp_path):
    report = evolve(ScenarioConfig.default(**SMALL, steps=5, snapshot_every=2), tmp_path)
    assert [s["step"] for s in report.snapshots] == [0, 2, 4, 5]
    assert report.passed


def test_initial_snapshot_jm_matches_density_stencil(tmp_path):
    cfg = ScenarioConfig.default("gaussian_spin_up", **SMALL, steps=0)
    evolve(cfg, tmp_path)
    cols = _load_snapshot(tmp_path / "snapshot_000000.tsv", cfg.dims)
    rho, h = cols[3], 0.5
    expected = 0.5 * np.stack([_stencil(rho, 1, h), -_stencil(rho, 0, h), np.zeros_like(rho)])
    np.testing.assert_allclose(cols[7:10], expected, rtol=0, atol=1e-15)
    np.testing.assert_allclose(cols[10:13], cols[4:7] + cols[7:10], rtol=0, atol=1e-15)


def test_snapshot_header_and_layout(tmp_path):
    cfg = ScenarioConfig.default(dims=(8, 9, 10), spacing=(0.5, 0.5, 0.5), width=1.0, steps=0)
    evolve(cfg, tmp_path)
    lines = (tmp_path / "snapshot_000000.tsv").read_text().splitlines()
    assert lines[0].startswith("# step 0 time 0")
    assert "x fastest" in lines[1]
    assert lines[4].split()[1:5] == ["x", "y", "z", "rho"]
    rows = np.loadtxt(tmp_path / "snapshot_000000.tsv")
    assert rows.shape == (8 * 9 * 10, 16)
    np.testing.assert_array_equal(rows[:8, 0], (np.arange(8) - 4) * 0.5)
    assert np.all(rows[:8, 1] == rows[0, 1])


def test_plane_wave_evolution_conserves_norm(tmp_path):
    report = evolve(ScenarioConfig.default("plane_wave", **SMALL, steps=20, snapshot_every=20), tmp_path)
    assert report.continuity["norm_drift_max"] <= 1e-9
    assert report.continuity["flag_difference_max"] <= 1e-13


# --- converge ----------------------------------------------------------------


def test_fit_order_recovers_power_law():
    h = np.array([1.0, 0.5, 0.25])
    assert fit_order(h, 3.0 * h**2) == pytest.approx(2.0, abs=1e-12)


def test_converge_default_orders():
    report = converge(ScenarioConfig.default())
    table = {t["name"]: t for t in report.convergence}
    assert table["div_JM"]["status"] == "exact"
    for name in ("leibniz_grid", "current_equivalence_grid", "continuity"):
        assert table[name]["order"] >= 1.9
    assert report.passed


def test_memory_guard():
    cfg = ScenarioConfig.default(converge_dims=(16, 16, 16), max_sites=32**3)
    with pytest.raises(MemoryGuardError):
        converge(cfg, refinements=3)


# --- reproducibility and CLI -------------------------------------------------


def test_reports_are_bit_reproducible(tmp_path):
    cfg = ScenarioConfig.default(**SMALL, probe_count=10, steps=3)
    assert verify(cfg).to_json() == verify(cfg).to_json()
    a = evolve(cfg, tmp_path / "a")
    b = evolve(cfg, tmp_path / "b")
    assert a.to_json() == b.to_json()
    assert (tmp_path / "a" / "snapshot_000003.tsv").read_bytes() == (tmp_path / "b" / "snapshot_000003.tsv").read_bytes()


def test_report_provenance_holds_resolved_config(tmp_path):
    cfg = ScenarioConfig.default(**SMALL, probe_count=10)
    data = json.loads(verify(cfg).to_json())
    assert data["provenance"]["config_sha256"] == cfg.digest()
    assert data["provenance"]["config"]["grid_error_constant"] == 2.0


def test_cli_exit_zero_and_report(tmp_path, capsys):
    cfg = _write(tmp_path, "[scenario]\nname = plane_wave\n[lattice]\ndims = 16, 16, 16\n[verify]\nprobe_count = 10\n")
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert "verify: PASS" in capsys.readouterr().out
    assert json.loads((tmp_path / "o" / "verify_report.json").read_text())["passed"]


def test_cli_exit_one_on_failed_check(tmp_path, capsys):
    cfg = _write(tmp_path, "[lattice]\ndims = 16, 16, 16\n[verify]\nprobe_count = 10\ngrid_error_constant = 1e-6\n")
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "failed: leibniz_grid_axis0" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv_tail, text",
    [
        (["verify"], "[lattice]\ndims = 2, 2, 2\n"),
        (["converge"], "[converge]\nmax_sites = 100\n"),
        (["evolve"], "[scenario]\nname = uniform_b_zeeman\n[lattice]\ndims = 12, 12, 12\n"),
    ],
)
def test_cli_exit_two_on_invalid_input(tmp_path, argv_tail, text):
    cfg = _write(tmp_path, text)
    assert main([*argv_tail, "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_cli_seed_override(tmp_path):
    cfg = _write(tmp_path, "[lattice]\ndims = 16, 16, 16\n[verify]\nprobe_count = 10\n")
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path), "--seed", "7", "--path", "analytic"]) == 0
    data = json.loads((tmp_path / "verify_report.json").read_text())
    assert data["provenance"]["config"]["seed"] == 7
    assert data["path"] == "analytic"
