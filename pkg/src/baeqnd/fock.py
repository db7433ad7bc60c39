"""Truncated photon-number-basis linear algebra for a single light mode.

Conventions used throughout the package: the quadrature pair is

    x = (a + a*) / 2,        y = (a - a*) / (2i),

so [x, y] = i/2, the vacuum has <x^2> = 1/4, and x applied to the vacuum
yields 0.5 |1>.  Position-space wavefunctions follow the same scaling,
psi_0(x) = (2/pi)^(1/4) exp(-x^2), which makes the position and
number representations of x agree entry by entry.

Operators are built at the full requested dimension.  Ladder truncation
corrupts the top rows/columns, so identities should be checked on the
"trusted subspace" that excludes the top quarter of levels (see
:func:`trusted_levels`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_hermite

from .errors import (
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidParameterError,
    OutOfRangeError,
)

#: Highest wavefunction level for which the recurrence is validated.
MAX_WAVEFUNCTION_LEVEL = 256

#: Default tolerance for algebraic operator identities.
ALGEBRAIC_TOL = 1e-10

#: Default tolerance for identities established by numerical quadrature.
QUADRATURE_TOL = 1e-6

_GRID_KINDS = ("uniform", "gauss-hermite")


def _require_dim(dim) -> int:
    if not isinstance(dim, (int, np.integer)):
        raise InvalidDimensionError(f"dimension must be an integer, got {dim!r}")
    if dim < 2:
        raise InvalidDimensionError(f"dimension must be >= 2, got {dim}")
    return int(dim)


def trusted_levels(dim: int) -> int:
    """Number of low-lying levels on which truncated-operator identities hold.

    The top quarter of a truncated Fock space is corrupted by the missing
    ladder couplings; results should only be trusted on levels
    0 .. trusted_levels(dim) - 1.
    """
    dim = _require_dim(dim)
    return dim - dim // 4


@dataclass(frozen=True, eq=False)
class FockState:
    """Pure single-mode state: complex amplitudes over photon numbers 0..dim-1."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128).copy()
        if amps.ndim != 1:
            raise InvalidDimensionError("state amplitudes must be a 1-D vector")
        _require_dim(amps.size)
        if not np.all(np.isfinite(amps)):
            raise InvalidParameterError("state amplitudes must be finite")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @classmethod
    def vacuum(cls, dim: int) -> "FockState":
        return cls.number(dim, 0)

    @classmethod
    def number(cls, dim: int, n: int) -> "FockState":
        """The photon-number eigenstate |n> in a dim-dimensional space."""
        dim = _require_dim(dim)
        if not 0 <= n < dim:
            raise OutOfRangeError(f"photon number {n} outside 0..{dim - 1}")
        amps = np.zeros(dim, dtype=np.complex128)
        amps[n] = 1.0
        return cls(amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "FockState":
        nrm = self.norm()
        if nrm == 0.0 or not np.isfinite(nrm):
            raise InvalidParameterError("cannot normalize a zero-norm state")
        return FockState(self.amplitudes / nrm)

    def overlap(self, other: "FockState") -> complex:
        """<self|other>."""
        if self.dim != other.dim:
            raise DimensionMismatchError(f"state dims differ: {self.dim} vs {other.dim}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "FockState") -> float:
        """|<self|other>|^2 for normalized states."""
        return abs(self.overlap(other)) ** 2

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Dense operator on a truncated Fock space."""

    entries: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.entries, dtype=np.complex128).copy()
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise InvalidDimensionError("operator entries must be a square matrix")
        _require_dim(mat.shape[0])
        if not np.all(np.isfinite(mat)):
            raise InvalidParameterError("operator entries must be finite")
        mat.setflags(write=False)
        object.__setattr__(self, "entries", mat)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def _check_dim(self, other) -> None:
        if self.dim != other.dim:
            raise DimensionMismatchError(f"operator dims differ: {self.dim} vs {other.dim}")

    def apply(self, state: FockState) -> FockState:
        """Matrix action on a state; the result is generally unnormalized."""
        if self.dim != state.dim:
            raise DimensionMismatchError(f"operator dim {self.dim} vs state dim {state.dim}")
        return FockState(self.entries @ state.amplitudes)

    def expectation(self, state: FockState) -> complex:
        if self.dim != state.dim:
            raise DimensionMismatchError(f"operator dim {self.dim} vs state dim {state.dim}")
        return complex(np.vdot(state.amplitudes, self.entries @ state.amplitudes))

    def dagger(self) -> "FockOperator":
        return FockOperator(self.entries.conj().T)

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.conj().T)) <= atol)

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        self._check_dim(other)
        return FockOperator(self.entries @ other.entries)

    def __add__(self, other: "FockOperator") -> "FockOperator":
        self._check_dim(other)
        return FockOperator(self.entries + other.entries)

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        self._check_dim(other)
        return FockOperator(self.entries - other.entries)

    def __mul__(self, scalar) -> "FockOperator":
        return FockOperator(self.entries * complex(scalar))

    __rmul__ = __mul__


def annihilation(dim: int) -> FockOperator:
    """Ladder operator a with entries (n-1, n) = sqrt(n)."""
    dim = _require_dim(dim)
    return FockOperator(np.diag(np.sqrt(np.arange(1.0, dim)), k=1))


def creation(dim: int) -> FockOperator:
    """Ladder operator a* (transpose of :func:`annihilation`)."""
    dim = _require_dim(dim)
    return FockOperator(np.diag(np.sqrt(np.arange(1.0, dim)), k=-1))


def quadrature_x(dim: int) -> FockOperator:
    """x = (a + a*)/2.  Applied to the vacuum it gives 0.5 |1>."""
    dim = _require_dim(dim)
    return FockOperator((annihilation(dim).entries + creation(dim).entries) / 2.0)


def quadrature_y(dim: int) -> FockOperator:
    """y = (a - a*)/(2i), conjugate to x with [x, y] = i/2."""
    dim = _require_dim(dim)
    return FockOperator((annihilation(dim).entries - creation(dim).entries) / 2.0j)


def number_operator(dim: int) -> FockOperator:
    """n = a*a, diagonal with entries 0..dim-1."""
    dim = _require_dim(dim)
    return FockOperator(np.diag(np.arange(dim, dtype=np.float64)))


def x_second_moment(state: FockState) -> float:
    """<x^2> of a state, evaluated with the truncated quadrature operator."""
    x = quadrature_x(state.dim)
    return float(np.real((x @ x).expectation(state)))


def wavefunction_table(count: int, x: np.ndarray) -> np.ndarray:
    """Wavefunctions psi_0..psi_{count-1} evaluated at x, shape (count, *x.shape).

    Uses the three-term recurrence on the normalized functions,
    psi_{n+1} = (2 x psi_n - sqrt(n) psi_{n-1}) / sqrt(n+1), which stays
    bounded (no explicit factorials) up to MAX_WAVEFUNCTION_LEVEL.
    """
    if not isinstance(count, (int, np.integer)) or count < 1:
        raise InvalidParameterError(f"wavefunction count must be >= 1, got {count!r}")
    if count - 1 > MAX_WAVEFUNCTION_LEVEL:
        raise OutOfRangeError(
            f"wavefunction level {count - 1} exceeds supported maximum {MAX_WAVEFUNCTION_LEVEL}"
        )
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("wavefunction argument must be finite")
    out = np.empty((count,) + x.shape, dtype=np.float64)
    out[0] = (2.0 / np.pi) ** 0.25 * np.exp(-x * x)
    if count > 1:
        out[1] = 2.0 * x * out[0]
    for n in range(1, count - 1):
        out[n + 1] = (2.0 * x * out[n] - np.sqrt(n) * out[n - 1]) / np.sqrt(n + 1.0)
    return out


def oscillator_wavefunction(n: int, x) -> np.ndarray | float:
    """Real position wavefunction psi_n(x) of the photon-number state |n>."""
    if not isinstance(n, (int, np.integer)) or n < 0:
        raise OutOfRangeError(f"wavefunction level must be a non-negative integer, got {n!r}")
    if n > MAX_WAVEFUNCTION_LEVEL:
        raise OutOfRangeError(
            f"wavefunction level {n} exceeds supported maximum {MAX_WAVEFUNCTION_LEVEL}"
        )
    arr = np.asarray(x, dtype=np.float64)
    value = wavefunction_table(n + 1, arr)[n]
    if np.isscalar(x) or arr.ndim == 0:
        return float(value)
    return value


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Integration grid over a quadrature variable: nodes, weights, kind."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.float64).copy()
        weights = np.asarray(self.weights, dtype=np.float64).copy()
        if nodes.ndim != 1 or weights.ndim != 1 or nodes.size != weights.size:
            raise InvalidParameterError("grid nodes and weights must be 1-D and equal length")
        if nodes.size < 2:
            raise InvalidParameterError("grid needs at least 2 nodes")
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(weights))):
            raise InvalidParameterError("grid nodes and weights must be finite")
        if np.any(weights <= 0.0):
            raise InvalidParameterError("grid weights must be strictly positive")
        if np.any(np.diff(nodes) <= 0.0):
            raise InvalidParameterError("grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def count(self) -> int:
        return self.nodes.size

    @property
    def span(self) -> float:
        """Largest |node|; the half-width actually covered by the grid."""
        return float(np.max(np.abs(self.nodes)))

    def integrate(self, values: np.ndarray, axis: int = -1) -> np.ndarray | float:
        """Weighted sum approximating the integral of sampled values."""
        values = np.asarray(values)
        if values.shape[axis] != self.count:
            raise DimensionMismatchError(
                f"values axis length {values.shape[axis]} != grid count {self.count}"
            )
        result = np.tensordot(values, self.weights, axes=([axis], [0]))
        if np.ndim(result) == 0:
            return float(result)
        return result


def make_grid(kind: str, span: float, count: int) -> QuadratureGrid:
    """Build an integration grid covering [-span, span].

    "uniform": equally spaced nodes with trapezoid weights (weights sum to
    2*span exactly).  "gauss-hermite": Gauss-Hermite nodes rescaled so the
    outermost node sits at +-span, with the Gaussian weight factored out;
    weights sum to span/u_max * sum_k w_k exp(u_k^2).
    """
    if kind not in _GRID_KINDS:
        raise InvalidParameterError(f"grid kind must be one of {_GRID_KINDS}, got {kind!r}")
    if not np.isfinite(span) or span <= 0.0:
        raise InvalidParameterError(f"grid span must be positive and finite, got {span!r}")
    if not isinstance(count, (int, np.integer)) or count < 2:
        raise InvalidParameterError(f"grid count must be an integer >= 2, got {count!r}")
    if kind == "uniform":
        nodes = np.linspace(-span, span, count)
        step = 2.0 * span / (count - 1)
        weights = np.full(count, step)
        weights[0] = weights[-1] = step / 2.0
        return QuadratureGrid(nodes, weights, kind)
    u, w = roots_hermite(count)
    scale = span / float(u[-1])
    nodes = scale * u
    weights = scale * w * np.exp(u * u)
    return QuadratureGrid(nodes, weights, kind)
