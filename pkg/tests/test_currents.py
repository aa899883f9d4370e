import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pauli_current.currents import (
    analytic_currents,
    antisymmetric_remainder,
    convective_current,
    current_equivalence_analytic,
    current_equivalence_grid,
    curl_m_residual,
    decompose,
    direct_current,
    magnetization_current,
    magnetization_density,
)
from pauli_current.gauge import GaugeConfig, UniformField, UnitsConfig
from pauli_current.grid import Lattice, central_difference, divergence
from pauli_current.spinor import SpinorField, sample
from pauli_current.states import GaussianPacket, PeriodicImages, PlaneWave, TexturedGaussian, probe_points

from conftest import random_array

SCENARIO_STATES = {
    "plane_wave": PlaneWave((2 * np.pi / 8, 0, 2 * np.pi / 8), (0.6, 0.8j)),
    "gaussian_spin_up": GaussianPacket(width=1.0),
    "gaussian_moving": GaussianPacket(width=1.2, spinor=(1, 1j), momentum=(0.5, 0.2, 0)),
    "gaussian_spin_texture": TexturedGaussian(width=1.0, momentum=(0.3, 0, 0.1)),
}


def test_convective_plane_wave_discrete_eigenvalue():
    lat = Lattice((16, 8, 8), (0.5, 0.5, 0.5))
    pw = PlaneWave.on_lattice(lat, (1, 0, 0))
    j0 = convective_current(sample(pw, lat), GaugeConfig(lat, UnitsConfig(hbar=1.5, mass=2.0))).data.real
    k = pw.wavevector[0]
    expected = 1.5 * np.sin(k * 0.5) / 0.5 / (2.0 * lat.volume)
    np.testing.assert_allclose(j0[0], expected, rtol=1e-12)
    np.testing.assert_allclose(j0[1:], 0.0, atol=1e-17)


def test_convective_real_wavefunction_vanishes(cube16):
    psi = sample(GaussianPacket(width=2.0), cube16)
    assert convective_current(psi, GaugeConfig(cube16)).max_abs() == 0


def test_convective_constant_spinor_in_potential(small_lattice):
    psi = SpinorField.uniform(small_lattice, (0.6, 0.8), 0.5)
    u = UnitsConfig(mass=2.0, c=3.0, charge=1.5)
    g = GaugeConfig(small_lattice, u, UniformField(0.8))
    rho = 0.25
    expected = -(1.5 / (2.0 * 3.0)) * g.A.data.real * rho
    np.testing.assert_allclose(convective_current(psi, g).data.real, expected, atol=1e-15)


def test_magnetization_current_uniform_spin_is_zero(small_lattice):
    psi = SpinorField.uniform(small_lattice, (1, 1j), 0.3)
    assert magnetization_current(psi).max_abs() == 0


def test_magnetization_current_spin_up_circulation(cube16):
    psi = sample(GaussianPacket(width=2.0), cube16)
    rho = np.abs(psi.data[0]) ** 2
    h = cube16.spacing
    u = UnitsConfig(hbar=0.7, mass=1.4)
    jm = magnetization_current(psi, u).data.real
    c = 0.7 / (2 * 1.4)
    np.testing.assert_allclose(jm[0], c * central_difference(rho, 1, h[1]), atol=1e-16)
    np.testing.assert_allclose(jm[1], -c * central_difference(rho, 0, h[0]), atol=1e-16)
    assert np.max(np.abs(jm[2])) == 0


def test_magnetization_current_charge_and_gauge_independent(rng, small_lattice):
    psi = SpinorField(small_lattice, random_array(rng, (2, *small_lattice.dims)))
    g1 = GaugeConfig(small_lattice, UnitsConfig(charge=1.0), UniformField(2.0))
    g0 = GaugeConfig(small_lattice, UnitsConfig(charge=0.0))
    np.testing.assert_array_equal(magnetization_current(psi, g1).data, magnetization_current(psi, g0).data)


def test_direct_current_plane_wave_equals_convective():
    lat = Lattice.cubic(8, 8.0)
    psi = sample(PlaneWave.on_lattice(lat, (1, 1, 0), (0.6, 0.8)), lat)
    g = GaugeConfig(lat)
    np.testing.assert_allclose(direct_current(psi, g).data, convective_current(psi, g).data, atol=1e-16)
    assert direct_current(SpinorField.zeros(lat), g).max_abs() == 0


@pytest.mark.parametrize("name", list(SCENARIO_STATES))
@pytest.mark.parametrize("charge", [0.0, 1.0])
@pytest.mark.parametrize("b_z", [0.0, 1.0])
def test_current_equivalence_analytic(name, charge, b_z):
    g = GaugeConfig(Lattice.cubic(4, 4.0), UnitsConfig(charge=charge), UniformField(b_z))
    r = current_equivalence_analytic(SCENARIO_STATES[name], g, probe_points(100, seed=11))
    assert r.relative <= 1e-12


def test_analytic_currents_spin_up_circulation():
    # J_M = (hbar/2m)(d_y rho, -d_x rho, 0) with the Gaussian rho differentiated by hand
    state = GaussianPacket(width=1.3)
    pts = probe_points(40, seed=2)
    cur = analytic_currents(state, GaugeConfig(Lattice.cubic(4, 1.0)), pts)
    rho = np.exp(-np.sum(pts**2, axis=0) / (2 * 1.3**2))
    drho = -pts / 1.3**2 * rho
    np.testing.assert_allclose(cur["JM"][0], 0.5 * drho[1], atol=1e-15)
    np.testing.assert_allclose(cur["JM"][1], -0.5 * drho[0], atol=1e-15)
    np.testing.assert_allclose(cur["J0"], 0.0, atol=1e-16)


def test_current_equivalence_grid_converges():
    L = 8.0
    state = PeriodicImages(TexturedGaussian(width=1.0, momentum=(0.3, 0, 0.1)), (L, L, L))
    hs, rs = [], []
    for n in (16, 32, 64):
        lat = Lattice.cubic(n, L)
        hs.append(L / n)
        rs.append(float(current_equivalence_grid(sample(state, lat), GaugeConfig(lat))))
    assert np.polyfit(np.log(hs), np.log(rs), 1)[0] >= 1.9


@given(seed=st.integers(0, 2**32 - 1), b_z=st.floats(-3, 3), charge=st.floats(-2, 2))
def test_antisymmetric_remainder_random_fields(seed, b_z, charge):
    rng = np.random.default_rng(seed)
    lat = Lattice((5, 6, 4), (0.5, 0.3, 0.7))
    psi = SpinorField(lat, random_array(rng, (2, *lat.dims)))
    r = antisymmetric_remainder(psi, GaugeConfig(lat, UnitsConfig(charge=charge), UniformField(b_z)))
    assert r.relative <= 1e-13


def test_antisymmetric_remainder_zero_and_texture(cube16):
    g = GaugeConfig(cube16, potential=UniformField(1.0))
    assert float(antisymmetric_remainder(SpinorField.zeros(cube16), g)) == 0
    psi = sample(TexturedGaussian(width=2.0), cube16)
    assert antisymmetric_remainder(psi, g).relative <= 1e-13


def test_magnetization_density():
    lat = Lattice.cubic(6, 6.0)
    psi = SpinorField.uniform(lat, (1, 0), 0.4)
    assert magnetization_density(psi, GaugeConfig(lat, UnitsConfig(charge=0.0))).max_abs() == 0
    m = magnetization_density(psi, GaugeConfig(lat)).data.real
    np.testing.assert_allclose(m[2], 0.16 / 2)
    np.testing.assert_allclose(m[:2], 0.0)


@pytest.mark.parametrize("charge", [1.0, -0.5, 2.0])
def test_curl_m_relation(rng, small_lattice, charge):
    psi = SpinorField(small_lattice, random_array(rng, (2, *small_lattice.dims)))
    g = GaugeConfig(small_lattice, UnitsConfig(c=1.7, charge=charge, hbar=0.9, mass=1.1))
    assert curl_m_residual(psi, g).relative <= 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_div_jm_exact(seed):
    rng = np.random.default_rng(seed)
    lat = Lattice((7, 6, 9), (0.4, 0.5, 0.3))
    psi = SpinorField(lat, random_array(rng, (2, *lat.dims)))
    jm = magnetization_current(psi)
    assert divergence(jm).max_abs() <= 1e-13 * jm.max_abs() / min(lat.spacing)


def test_decompose_plane_wave():
    lat = Lattice.cubic(8, 8.0)
    psi = sample(PlaneWave.on_lattice(lat, (0, 1, 0), (1, 0)), lat)
    dec = decompose(psi, GaugeConfig(lat))
    np.testing.assert_allclose(dec.rho.data.real, 1 / lat.volume, rtol=1e-13)
    assert dec.JM.max_abs() <= 1e-18
    j0 = dec.J0.data.real
    assert np.all(j0[1] > 0) and np.max(np.abs(j0[[0, 2]])) <= 1e-18
    assert dec.direct_residual.relative <= 1e-13
    np.testing.assert_array_equal(dec.J_total.data, (dec.J0 + dec.JM).data)


def test_decompose_neutral_gaussian():
    lat = Lattice.cubic(16, 16.0)
    psi = sample(GaussianPacket(width=2.0), lat)
    dec = decompose(psi, GaugeConfig(lat, UnitsConfig(charge=0.0)))
    assert dec.J0.max_abs() == 0
    assert dec.JM.max_abs() > 1e-3
    assert dec.M.max_abs() == 0


def test_decompose_zero(small_lattice):
    dec = decompose(SpinorField.zeros(small_lattice), GaugeConfig(small_lattice))
    for f in dec.fields().values():
        assert f.max_abs() == 0
