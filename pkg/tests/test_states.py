import numpy as np
import pytest

from pauli_current.grid import Lattice
from pauli_current.states import (
    AnalyticJet,
    ConstantSpinorState,
    GaussianPacket,
    PeriodicImages,
    PlaneWave,
    TexturedGaussian,
    probe_points,
)

STATES = {
    "constant": ConstantSpinorState((0.6, 0.8j)),
    "plane_wave": PlaneWave((0.7, -0.3, 0.2), (1, 1j)),
    "gaussian": GaussianPacket(width=1.1, center=(0.2, 0, -0.1), spinor=(0.6, 0.8), momentum=(0.5, 0, 0.3)),
    "texture": TexturedGaussian(width=1.3, momentum=(0.2, 0.1, 0), pitch=(0.5, 0.2, 0), twist=(0, 0.3, 0.4)),
    "images": PeriodicImages(GaussianPacket(width=1.0, momentum=(0.8, 0, 0)), (6.0, 6.0, 6.0)),
}


def _fd_errors(state, h, points):
    grad, hess = state.gradient(points), state.hessian(points)
    e1 = e2 = 0.0
    for i in range(3):
        d = np.zeros((3, 1))
        d[i] = h
        fd1 = (state.value(points + d) - state.value(points - d)) / (2 * h)
        fd2 = (state.gradient(points + d) - state.gradient(points - d)) / (2 * h)
        e1 = max(e1, np.max(np.abs(fd1 - grad[i])))
        e2 = max(e2, np.max(np.abs(fd2 - hess[i])))
    return e1, e2


@pytest.mark.parametrize("name", list(STATES))
def test_derivatives_converge_at_order_two(name):
    state = STATES[name]
    points = probe_points(20, radius=2.0, seed=3)
    hs = [0.02, 0.01, 0.005]
    errs = np.array([_fd_errors(state, h, points) for h in hs])
    if np.all(errs < 1e-10):
        return  # constant state: derivatives are exactly zero
    for col in range(2):
        slope = np.polyfit(np.log(hs), np.log(errs[:, col]), 1)[0]
        assert slope >= 1.9


@pytest.mark.parametrize("name", list(STATES))
def test_hessian_symmetric(name):
    hess = STATES[name].hessian(probe_points(30, seed=1))
    np.testing.assert_allclose(hess, np.swapaxes(hess, 0, 1), atol=1e-14)


@pytest.mark.parametrize("name", list(STATES))
def test_value_path_matches_evaluate(name):
    pts = probe_points(30, seed=2)
    np.testing.assert_allclose(STATES[name].value(pts), STATES[name].evaluate(pts)[0], rtol=1e-14, atol=1e-300)


def test_plane_wave_on_lattice():
    lat = Lattice((8, 10, 12), (0.5, 0.5, 0.5))
    pw = PlaneWave.on_lattice(lat, (1, -2, 3), (3, 4))
    np.testing.assert_allclose(pw.wavevector, [2 * np.pi / 4, -4 * np.pi / 5, 6 * np.pi / 6])
    np.testing.assert_allclose(np.abs(pw.spinor), [0.6, 0.8])
    assert abs(pw.amplitude) ** 2 * lat.volume == pytest.approx(1.0)


def test_texture_spinor_is_unit_and_rotates():
    state = TexturedGaussian(width=1.0, pitch=(np.pi / 2, 0, 0), twist=(0, 0, 0))
    chi = state._texture(np.array([[0.0, 1.0], [0, 0], [0, 0]]), 0)[0]
    np.testing.assert_allclose(np.sum(np.abs(chi) ** 2, axis=0), 1.0)
    np.testing.assert_allclose(chi[:, 0], [1, 0])
    np.testing.assert_allclose(chi[:, 1], [np.cos(np.pi / 4), np.sin(np.pi / 4)])


def test_periodic_images_are_periodic():
    state = STATES["images"]
    rng = np.random.default_rng(5)
    face = np.vstack([np.full(10, 3.0), rng.uniform(-2, 2, (2, 10))])
    opposite = face - np.array([[6.0], [0.0], [0.0]])
    # opposite faces of the primary cell agree up to the omitted outer images
    np.testing.assert_allclose(state.value(face), state.value(opposite), atol=1e-12)
    np.testing.assert_allclose(state.gradient(face), state.gradient(opposite), atol=1e-12)


def test_jet_and_probe_points_reproducible():
    a, b = probe_points(50, seed=9), probe_points(50, seed=9)
    np.testing.assert_array_equal(a, b)
    assert np.all(np.linalg.norm(a, axis=0) <= 3.0)
    jet = AnalyticJet.of(STATES["gaussian"], a)
    assert jet.psi.shape == (2, 50) and jet.grad.shape == (3, 2, 50) and jet.hess.shape == (3, 3, 2, 50)


def test_normalized_on_lattice():
    lat = Lattice.cubic(12, 10.0)
    state = STATES["texture"].normalized_on(lat)
    psi = state.value(lat.coordinates())
    assert np.sum(np.abs(psi) ** 2) * lat.cell_volume == pytest.approx(1.0, abs=1e-13)
