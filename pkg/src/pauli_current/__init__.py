"""Pauli-equation probability current: decomposition, dynamics and Noether checks on a periodic lattice."""

__version__ = "0.1.0"

from .currents import CurrentDecomposition, decompose, direct_current, magnetization_current  # noqa: E402
from .dynamics import EvolutionConfig, apply_hamiltonian, evolve, step  # noqa: E402
from .errors import (  # noqa: E402
    BoundaryDensityError,
    InvalidArgumentError,
    MemoryGuardError,
    SolverConvergenceError,
)
from .gauge import GaugeConfig, UniformField, UnitsConfig, ZeroPotential  # noqa: E402
from .grid import Lattice, ScalarField, VectorField3  # noqa: E402
from .spinor import SpinorField, sample  # noqa: E402
from .states import GaussianPacket, PeriodicImages, PlaneWave, TexturedGaussian  # noqa: E402

__all__ = [
    "BoundaryDensityError",
    "CurrentDecomposition",
    "EvolutionConfig",
    "GaugeConfig",
    "GaussianPacket",
    "InvalidArgumentError",
    "Lattice",
    "MemoryGuardError",
    "PeriodicImages",
    "PlaneWave",
    "ScalarField",
    "SolverConvergenceError",
    "SpinorField",
    "TexturedGaussian",
    "UniformField",
    "UnitsConfig",
    "VectorField3",
    "ZeroPotential",
    "apply_hamiltonian",
    "decompose",
    "direct_current",
    "evolve",
    "magnetization_current",
    "sample",
    "step",
]
