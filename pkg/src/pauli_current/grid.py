"""Periodic lattice and second-order central-difference vector calculus.

Fields store their samples as numpy arrays indexed ``[..., ix, iy, iz]``;
leading axes hold components (3 for vectors, 2 for spinors). When flattened
for output the site order is x-fastest (Fortran order over the spatial axes).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI_CIVITA[_i, _j, _k] = 1.0
    LEVI_CIVITA[_i, _k, _j] = -1.0


@dataclass(frozen=True)
class Lattice:
    """Periodic 3-D grid.

    Site ``(ix, iy, iz)`` sits at ``((ix - nx//2) hx, (iy - ny//2) hy, (iz - nz//2) hz)``
    so the origin is a lattice site at (or next to) the grid centre.
    """

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        spacing = tuple(float(h) for h in self.spacing)
        if len(dims) != 3 or len(spacing) != 3:
            raise InvalidArgumentError("lattice needs exactly three dims and three spacings")
        if any(n < 3 for n in dims):
            raise InvalidArgumentError(f"every lattice dimension must be >= 3, got {dims}")
        if any(not np.isfinite(h) or h <= 0 for h in spacing):
            raise InvalidArgumentError(f"lattice spacing must be positive, got {spacing}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)

    @classmethod
    def cubic(cls, n: int, length: float) -> Lattice:
        return cls((n, n, n), (length / n,) * 3)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.dims

    @property
    def lengths(self) -> tuple[float, float, float]:
        return tuple(n * h for n, h in zip(self.dims, self.spacing))

    @property
    def n_sites(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    @property
    def cell_volume(self) -> float:
        hx, hy, hz = self.spacing
        return hx * hy * hz

    @property
    def volume(self) -> float:
        return self.cell_volume * self.n_sites

    def axis_coordinates(self, axis: int) -> np.ndarray:
        n, h = self.dims[axis], self.spacing[axis]
        return (np.arange(n) - n // 2) * h

    def coordinates(self) -> np.ndarray:
        """Site positions, shape ``(3, nx, ny, nz)``."""
        return np.stack(np.meshgrid(*(self.axis_coordinates(a) for a in range(3)), indexing="ij"))

    def points(self) -> np.ndarray:
        """Site positions flattened x-fastest, shape ``(3, n_sites)``."""
        return self.coordinates().reshape(3, -1, order="F")

    def refined(self, factor: int = 2) -> Lattice:
        """Same physical box with ``factor`` times as many sites per axis."""
        return Lattice(tuple(n * factor for n in self.dims), tuple(h / factor for h in self.spacing))

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.dims, dtype=bool)
        mask[0, :, :] = mask[-1, :, :] = True
        mask[:, 0, :] = mask[:, -1, :] = True
        mask[:, :, 0] = mask[:, :, -1] = True
        return mask


class _Field:
    """Samples on a lattice; ``data`` is a read-only complex array."""

    n_components: int | None = None

    def __init__(self, lattice: Lattice, data):
        arr = np.asarray(data, dtype=complex)
        expected = lattice.dims if self.n_components is None else (self.n_components, *lattice.dims)
        if arr.shape != expected:
            raise InvalidArgumentError(
                f"{type(self).__name__} on {lattice.dims} needs shape {expected}, got {arr.shape}"
            )
        view = arr.view()
        view.flags.writeable = False
        self.lattice = lattice
        self.data = view

    def _coerce(self, other):
        if isinstance(other, type(self)):
            require_same_lattice(self, other)
            return other.data
        return NotImplemented

    def __add__(self, other):
        rhs = self._coerce(other)
        return NotImplemented if rhs is NotImplemented else type(self)(self.lattice, self.data + rhs)

    def __sub__(self, other):
        rhs = self._coerce(other)
        return NotImplemented if rhs is NotImplemented else type(self)(self.lattice, self.data - rhs)

    def __mul__(self, scalar):
        if isinstance(scalar, _Field):
            return NotImplemented
        return type(self)(self.lattice, self.data * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return type(self)(self.lattice, self.data / scalar)

    def __neg__(self):
        return type(self)(self.lattice, -self.data)

    def __repr__(self):
        return f"{type(self).__name__}(dims={self.lattice.dims})"

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def is_real(self, rtol: float = 1e-13) -> bool:
        """True when every imaginary part is within ``rtol`` of the largest magnitude."""
        scale = self.max_abs()
        return bool(np.max(np.abs(self.data.imag), initial=0.0) <= rtol * scale)

    def real_part(self, rtol: float = 1e-13):
        """Drop the imaginary residue; raises if it is not negligible."""
        if not self.is_real(rtol):
            worst = float(np.max(np.abs(self.data.imag)))
            raise AssertionError(
                f"{type(self).__name__} has imaginary residue {worst:.3e} "
                f"exceeding {rtol:.0e} of scale {self.max_abs():.3e}"
            )
        return type(self)(self.lattice, self.data.real)

    def flat(self) -> np.ndarray:
        """Components flattened x-fastest: shape ``(n_components, n_sites)`` or ``(n_sites,)``."""
        if self.n_components is None:
            return self.data.reshape(-1, order="F")
        return self.data.reshape(self.n_components, -1, order="F")


class ScalarField(_Field):
    n_components = None

    @classmethod
    def zeros(cls, lattice: Lattice) -> ScalarField:
        return cls(lattice, np.zeros(lattice.dims, dtype=complex))


class VectorField3(_Field):
    n_components = 3

    @classmethod
    def zeros(cls, lattice: Lattice) -> VectorField3:
        return cls(lattice, np.zeros((3, *lattice.dims), dtype=complex))

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.lattice, self.data[i])

    @classmethod
    def from_components(cls, components) -> VectorField3:
        components = list(components)
        lattice = components[0].lattice
        for c in components[1:]:
            require_same_lattice(components[0], c)
        return cls(lattice, np.stack([c.data for c in components]))

    def norm(self) -> ScalarField:
        """Pointwise Euclidean length ``sqrt(sum |F_i|^2)``."""
        return ScalarField(self.lattice, np.sqrt(np.sum(np.abs(self.data) ** 2, axis=0)))


def require_same_lattice(*fields) -> Lattice:
    lattice = fields[0].lattice
    for f in fields[1:]:
        if f.lattice != lattice:
            raise InvalidArgumentError(f"lattice mismatch: {lattice} vs {f.lattice}")
    return lattice


def _check_axis(axis) -> int:
    if axis not in (0, 1, 2) or isinstance(axis, bool):
        raise InvalidArgumentError(f"axis must be 0, 1 or 2, got {axis!r}")
    return int(axis)


def central_difference(arr: np.ndarray, axis: int, h: float, factor=1.0) -> np.ndarray:
    """Periodic central difference along spatial ``axis`` of an array whose last three axes are x, y, z.

    ``factor`` scales the result (folded into the single normalisation pass).
    """
    ax = arr.ndim - 3 + _check_axis(axis)
    a = np.moveaxis(arr, ax, 0)
    out = np.empty(a.shape, dtype=np.result_type(arr, factor, float))
    np.subtract(a[2:], a[:-2], out=out[1:-1])
    np.subtract(a[1], a[-1], out=out[0])
    np.subtract(a[0], a[-2], out=out[-1])
    out *= factor / (2.0 * h)
    return np.moveaxis(out, 0, ax)


def partial(f: ScalarField, axis: int) -> ScalarField:
    axis = _check_axis(axis)
    return ScalarField(f.lattice, central_difference(f.data, axis, f.lattice.spacing[axis]))


def gradient(f: ScalarField) -> VectorField3:
    return VectorField3.from_components(partial(f, i) for i in range(3))


def divergence_array(data: np.ndarray, lattice: Lattice) -> np.ndarray:
    """``sum_i D_i F_i`` for an array of shape ``(3, *dims)``."""
    return sum(central_difference(data[i], i, lattice.spacing[i]) for i in range(3))


def curl_array(data: np.ndarray, lattice: Lattice) -> np.ndarray:
    h = lattice.spacing
    d = lambda k, j: central_difference(data[k], j, h[j])  # noqa: E731
    return np.stack([d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)])


def divergence(F: VectorField3) -> ScalarField:
    return ScalarField(F.lattice, divergence_array(F.data, F.lattice))


def curl(F: VectorField3) -> VectorField3:
    return VectorField3(F.lattice, curl_array(F.data, F.lattice))


def grid_sum(f: ScalarField) -> complex:
    """Discrete integral: sum over sites times the cell volume."""
    return complex(np.sum(f.data) * f.lattice.cell_volume)


def l2_norm(data: np.ndarray, lattice: Lattice) -> float:
    """Discrete L2 norm of an array with any number of leading component axes."""
    return float(np.sqrt(np.sum(np.abs(data) ** 2) * lattice.cell_volume))


def sample_scalar(lattice: Lattice, func) -> ScalarField:
    """Evaluate ``func(x, y, z)`` (broadcasting arrays) at every site."""
    x, y, z = lattice.coordinates()
    return ScalarField(lattice, np.broadcast_to(func(x, y, z), lattice.dims).astype(complex))


def sample_vector(lattice: Lattice, func) -> VectorField3:
    """Evaluate ``func(x, y, z) -> (Fx, Fy, Fz)`` at every site."""
    x, y, z = lattice.coordinates()
    comps = [np.broadcast_to(c, lattice.dims) for c in func(x, y, z)]
    return VectorField3(lattice, np.stack(comps).astype(complex))
