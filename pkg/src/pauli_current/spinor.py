"""Pauli matrices, two-component spinor fields and their densities."""

from __future__ import annotations

import numpy as np

from .grid import LEVI_CIVITA, Lattice, ScalarField, VectorField3, _Field, grid_sum

IDENTITY2 = np.eye(2, dtype=complex)
PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
# PAULI_PRODUCTS[i, j] = sigma_i @ sigma_j, kept unsimplified.
PAULI_PRODUCTS = np.einsum("iab,jbc->ijac", PAULI, PAULI)

REALITY_RTOL = 1e-13


def sigma_dot(v) -> np.ndarray:
    """``sum_i v_i sigma_i`` as a 2x2 complex matrix."""
    return np.einsum("i,iab->ab", np.asarray(v, dtype=complex), PAULI)


def pauli_product_expected(i: int, j: int) -> np.ndarray:
    """Right-hand side of the product rule: ``delta_ij I + i sum_k eps_ijk sigma_k``."""
    return (i == j) * IDENTITY2 + 1j * np.einsum("k,kab->ab", LEVI_CIVITA[i, j], PAULI)


def pauli_product_residual() -> float:
    """Largest entrywise deviation of the nine products ``sigma_i sigma_j`` from the product rule."""
    return max(
        float(np.max(np.abs(PAULI_PRODUCTS[i, j] - pauli_product_expected(i, j))))
        for i in range(3)
        for j in range(3)
    )


def pauli_identity_residual(u, v) -> float:
    """Max-norm of ``(s.u)(s.v) - [(u.v) I + i s.(u x v)]``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    lhs = sigma_dot(u) @ sigma_dot(v)
    rhs = np.dot(u, v) * IDENTITY2 + 1j * sigma_dot(np.cross(u, v))
    return float(np.max(np.abs(lhs - rhs)))


def apply_matrix(mat: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Apply a 2x2 matrix to a spinor array of shape ``(2, ...)``."""
    return np.einsum("ab,b...->a...", mat, psi)


def bilinear(a: np.ndarray, mat: np.ndarray | None, b: np.ndarray) -> np.ndarray:
    """Pointwise ``a^dagger M b`` (``M = I`` when ``mat`` is None)."""
    if mat is None:
        return np.sum(np.conj(a) * b, axis=0)
    return np.sum(np.conj(a) * apply_matrix(mat, b), axis=0)


def spin_density_array(psi: np.ndarray) -> np.ndarray:
    """``S_k = psi^dagger sigma_k psi`` for a spinor array; complex with vanishing imaginary part."""
    return np.einsum("a...,kab,b...->k...", np.conj(psi), PAULI, psi)


class SpinorField(_Field):
    """Two complex amplitudes per site, ``data`` shaped ``(2, nx, ny, nz)``."""

    n_components = 2

    @classmethod
    def zeros(cls, lattice: Lattice) -> SpinorField:
        return cls(lattice, np.zeros((2, *lattice.dims), dtype=complex))

    @classmethod
    def uniform(cls, lattice: Lattice, spinor, amplitude=1.0) -> SpinorField:
        chi = np.asarray(spinor, dtype=complex) * amplitude
        return cls(lattice, np.broadcast_to(chi[:, None, None, None], (2, *lattice.dims)))

    @property
    def up(self) -> ScalarField:
        return ScalarField(self.lattice, self.data[0])

    @property
    def down(self) -> ScalarField:
        return ScalarField(self.lattice, self.data[1])

    def inner(self, other: SpinorField) -> complex:
        """Discrete inner product ``<self, other>`` (antilinear in ``self``)."""
        return grid_sum(ScalarField(self.lattice, bilinear(self.data, None, other.data)))

    def norm_squared(self) -> float:
        return self.inner(self).real

    def normalized(self) -> SpinorField:
        return self / np.sqrt(self.norm_squared())


def probability_density(psi: SpinorField) -> ScalarField:
    rho = np.abs(psi.data[0]) ** 2 + np.abs(psi.data[1]) ** 2
    return ScalarField(psi.lattice, rho)


def spin_density(psi: SpinorField) -> VectorField3:
    return VectorField3(psi.lattice, spin_density_array(psi.data)).real_part(REALITY_RTOL)


def sample(state, lattice: Lattice) -> SpinorField:
    """Evaluate an analytic state at every lattice site."""
    return SpinorField(lattice, state.value(lattice.coordinates()))
