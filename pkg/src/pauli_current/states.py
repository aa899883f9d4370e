"""Closed-form spinor states with exact first and second derivatives.

Each state evaluates at an array of points shaped ``(3, ...)`` and returns

* ``value``    shape ``(2, ...)``
* ``gradient`` shape ``(3, 2, ...)``         -- ``d_i psi``
* ``hessian``  shape ``(3, 3, 2, ...)``      -- ``d_i d_j psi``

Most states are "envelope times spinor texture": a scalar envelope ``g(x)``
multiplying a position-dependent spinor ``chi(x)``. The product rule is
applied once in :class:`AnalyticSpinorState`; subclasses supply the factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grid import Lattice


def _vec3(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    return arr


def _contract(vec: np.ndarray, points: np.ndarray) -> np.ndarray:
    return np.tensordot(vec, points, axes=(0, 0))


def _ones(points):
    return (1,) * (np.ndim(points) - 1)


class AnalyticSpinorState:
    """Base class; subclasses implement ``_envelope`` and ``_texture``.

    Both return ``(f, df, ddf)``; with ``order=0`` the derivatives may be None.
    """

    name = "analytic"
    amplitude: complex = 1.0

    def _envelope(self, points, order=2):
        shape = points.shape[1:]
        one = np.full(shape, complex(self.amplitude))
        if order == 0:
            return one, None, None
        return one, np.zeros((3, *shape), complex), np.zeros((3, 3, *shape), complex)

    def _texture(self, points, order=2):
        raise NotImplementedError

    def evaluate(self, points):
        """``(psi, grad, hess)`` at ``points``."""
        points = np.asarray(points, dtype=float)
        g, dg, ddg = self._envelope(points)
        chi, dchi, ddchi = self._texture(points)
        psi = g * chi
        grad = dg[:, None] * chi[None] + g * dchi
        hess = (
            ddg[:, :, None] * chi[None, None]
            + dg[:, None, None] * dchi[None]
            + dg[None, :, None] * dchi[:, None]
            + g * ddchi
        )
        return psi, grad, hess

    def value(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return self._envelope(points, 0)[0] * self._texture(points, 0)[0]

    def gradient(self, points) -> np.ndarray:
        return self.evaluate(points)[1]

    def hessian(self, points) -> np.ndarray:
        return self.evaluate(points)[2]

    def with_amplitude(self, amplitude):
        return replace(self, amplitude=amplitude)

    def normalized_on(self, lattice: Lattice):
        """Rescale so the sampled density sums to one on ``lattice``."""
        psi = self.value(lattice.coordinates())
        total = np.sum(np.abs(psi) ** 2) * lattice.cell_volume
        return self.with_amplitude(self.amplitude / np.sqrt(total))


def _constant_texture(spinor, points, order):
    shape = points.shape[1:]
    chi = np.broadcast_to(np.asarray(spinor, complex).reshape(2, *_ones(points)), (2, *shape))
    if order == 0:
        return chi, None, None
    return chi, np.zeros((3, 2, *shape), complex), np.zeros((3, 3, 2, *shape), complex)


@dataclass(frozen=True)
class ConstantSpinorState(AnalyticSpinorState):
    """The same spinor at every point."""

    spinor: tuple = (1.0, 0.0)
    amplitude: complex = 1.0
    name: str = "constant"

    def _texture(self, points, order=2):
        return _constant_texture(self.spinor, points, order)


@dataclass(frozen=True)
class PlaneWave(AnalyticSpinorState):
    """``amplitude * chi * exp(i k.x)`` with a constant spinor ``chi``."""

    wavevector: tuple = (0.0, 0.0, 0.0)
    spinor: tuple = (1.0, 0.0)
    amplitude: complex = 1.0
    name: str = "plane_wave"

    @classmethod
    def on_lattice(cls, lattice: Lattice, mode=(1, 0, 0), spinor=(1.0, 0.0)) -> PlaneWave:
        """Lattice-commensurate wave ``k_i = 2 pi n_i / L_i`` normalised to the box volume."""
        k = tuple(2 * np.pi * n / length for n, length in zip(mode, lattice.lengths))
        chi = np.asarray(spinor, complex)
        chi = chi / np.linalg.norm(chi)
        return cls(k, tuple(chi), 1.0 / np.sqrt(lattice.volume))

    def _envelope(self, points, order=2):
        k = _vec3(self.wavevector)
        g = self.amplitude * np.exp(1j * _contract(k, points))
        if order == 0:
            return g, None, None
        ik = (1j * k).reshape(3, *_ones(points))
        dg = ik * g
        ddg = ik[:, None] * ik[None] * g
        return g, dg, ddg

    def _texture(self, points, order=2):
        return _constant_texture(self.spinor, points, order)


@dataclass(frozen=True)
class GaussianPacket(AnalyticSpinorState):
    """Gaussian envelope with constant spinor.

    ``psi = amplitude * chi * exp(-|x - c|^2 / (4 w^2) + i k0.(x - c))``, so the
    density is a Gaussian of standard deviation ``width`` along each axis.
    """

    width: float = 1.0
    center: tuple = (0.0, 0.0, 0.0)
    spinor: tuple = (1.0, 0.0)
    momentum: tuple = (0.0, 0.0, 0.0)
    amplitude: complex = 1.0
    name: str = "gaussian"

    def _envelope(self, points, order=2):
        b = _ones(points)
        k0 = _vec3(self.momentum)
        d = points - _vec3(self.center).reshape(3, *b)
        w2 = self.width**2
        g = self.amplitude * np.exp(-np.sum(d * d, axis=0) / (4 * w2) + 1j * _contract(k0, d))
        if order == 0:
            return g, None, None
        dphi = -d / (2 * w2) + 1j * k0.reshape(3, *b)
        ddphi = -np.eye(3).reshape(3, 3, *b) / (2 * w2)
        dg = dphi * g
        ddg = (dphi[:, None] * dphi[None] + ddphi) * g
        return g, dg, ddg

    def _texture(self, points, order=2):
        return _constant_texture(self.spinor, points, order)


@dataclass(frozen=True)
class TexturedGaussian(GaussianPacket):
    """Gaussian packet whose spin direction rotates through space.

    ``chi(x) = (cos(theta/2), exp(i phi) sin(theta/2))`` with ``theta = pitch.(x - c)``
    and ``phi = twist.(x - c)``: the spin polar angle winds along ``pitch`` and the
    azimuth along ``twist``.
    """

    pitch: tuple = (0.5, 0.0, 0.0)
    twist: tuple = (0.0, 0.3, 0.0)
    name: str = "gaussian_texture"

    def _texture(self, points, order=2):
        b = _ones(points)
        kap = _vec3(self.pitch)
        eta = _vec3(self.twist)
        d = points - _vec3(self.center).reshape(3, *b)
        theta = _contract(kap, d)
        phase = np.exp(1j * _contract(eta, d))
        cs, sn = np.cos(theta / 2), np.sin(theta / 2)
        chi = np.stack([cs + 0j, phase * sn])
        if order == 0:
            return chi, None, None
        k1, e1 = kap.reshape(3, *b), eta.reshape(3, *b)
        kk = np.outer(kap, kap).reshape(3, 3, *b)
        ke = (np.outer(eta, kap) + np.outer(kap, eta)).reshape(3, 3, *b)
        ee = np.outer(eta, eta).reshape(3, 3, *b)
        d_up = -0.5 * sn * k1 + 0j
        d_dn = phase * (1j * e1 * sn + 0.5 * k1 * cs)
        dd_up = -0.25 * cs * kk + 0j
        dd_dn = phase * (-ee * sn + 0.5j * ke * cs - 0.25 * kk * sn)
        return chi, np.stack([d_up, d_dn], axis=1), np.stack([dd_up, dd_dn], axis=2)


@dataclass(frozen=True)
class PeriodicImages(AnalyticSpinorState):
    """Periodic sum ``sum_n base(x + n L)`` over image cells ``|n_i| <= reach``.

    Turns a localized packet into a smooth function on the periodic box,
    removing the wrap-around kink of a truncated Gaussian. ``amplitude``
    scales the sum.
    """

    base: AnalyticSpinorState = field(default_factory=GaussianPacket)
    lengths: tuple = (16.0, 16.0, 16.0)
    reach: int = 1
    amplitude: complex = 1.0
    name: str = "periodic_images"

    def _shifts(self, points):
        r = range(-self.reach, self.reach + 1)
        lengths = np.asarray(self.lengths, float)
        for n in ((i, j, k) for i in r for j in r for k in r):
            yield (np.asarray(n) * lengths).reshape(3, *_ones(points))

    def evaluate(self, points):
        points = np.asarray(points, dtype=float)
        psi = grad = hess = 0
        for shift in self._shifts(points):
            p, g, h = self.base.evaluate(points + shift)
            psi, grad, hess = psi + p, grad + g, hess + h
        a = self.amplitude
        return a * psi, a * grad, a * hess

    def value(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return self.amplitude * sum(self.base.value(points + s) for s in self._shifts(points))


@dataclass(frozen=True)
class AnalyticJet:
    """``psi`` and its exact first/second derivatives at a fixed set of points."""

    points: np.ndarray
    psi: np.ndarray
    grad: np.ndarray
    hess: np.ndarray = field(repr=False)

    @classmethod
    def of(cls, state: AnalyticSpinorState, points) -> AnalyticJet:
        points = np.asarray(points, dtype=float)
        psi, grad, hess = state.evaluate(points)
        return cls(points, psi, grad, hess)


def probe_points(n: int, center=(0.0, 0.0, 0.0), radius: float = 3.0, seed: int = 0) -> np.ndarray:
    """``n`` reproducible random points uniform in a ball, shape ``(3, n)``."""
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=(3, n))
    direction /= np.linalg.norm(direction, axis=0)
    r = radius * rng.random(n) ** (1 / 3)
    return np.asarray(center, float)[:, None] + direction * r
