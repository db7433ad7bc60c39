"""Gaussian quadrature-measurement kernel on a truncated Fock space.

The measurement of the x quadrature with resolution dx at outcome x_m is
represented by the positive operator

    P(x_m) = (2 pi dx^2)^(-1/4) exp(-(x_m - x)^2 / (4 dx^2)),

a Gaussian function of the quadrature operator x.  Squaring it gives the
outcome probability density of an input state, and its action followed by
normalization gives the conditional post-measurement state.

Two evaluation strategies are provided and cross-checked against each other:

* "closed-form": each matrix element <n|P(x_m)|m> is a Gaussian-Hermite
  integral.  Completing the square analytically reduces it to the integral
  of a polynomial of degree n+m against exp(-u^2), which a Gauss-Hermite
  rule with dim nodes evaluates exactly; the result is exact up to floating
  point.
* "quadrature": the same position-space integral on a dense uniform grid;
  an independent cross-check path.

Both strategies build the operator as M M^T with a positive prefactor, so
the result is symmetric positive semidefinite by construction.

Diagonalizing the truncated x operator and applying the scalar Gaussian to
its eigenvalues is deliberately not offered: truncated-x eigenvalues are
distorted and the approach is inexact in a way that is hard to bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_hermite

from .errors import (
    DegenerateConditioningError,
    DimensionMismatchError,
    GridTooNarrowError,
    InvalidParameterError,
    OutOfRangeError,
)
from .fock import FockOperator, FockState, QuadratureGrid, trusted_levels, wavefunction_table

EVAL_STRATEGIES = ("closed-form", "quadrature")

#: Densities below this are treated as degenerate conditioning, never divided by.
UNDERFLOW_DENSITY = 1e-300

#: Number of photon-number columns tabulated by default; for vacuum-like
#: inputs at dx >= 1 only the lowest few photon numbers carry any weight.
DEFAULT_N_MAX = 4

_QUADRATURE_COUNT = 4001
_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class MeasurementModel:
    """Measurement resolution plus truncation dimension and evaluation strategy."""

    delta_x: float
    dim: int
    eval_strategy: str = "closed-form"

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 2:
            raise InvalidParameterError(f"model dim must be an integer >= 2, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))
        dx = self.delta_x
        if not isinstance(dx, (int, float, np.floating)) or not np.isfinite(dx) or dx <= 0:
            raise InvalidParameterError(f"delta_x must be positive and finite, got {dx!r}")
        object.__setattr__(self, "delta_x", float(dx))
        if self.eval_strategy not in EVAL_STRATEGIES:
            raise InvalidParameterError(
                f"eval_strategy must be one of {EVAL_STRATEGIES}, got {self.eval_strategy!r}"
            )

    @property
    def kappa(self) -> float:
        """Exponent coefficient 1/(4 dx^2) of the measurement kernel."""
        return 1.0 / (4.0 * self.delta_x**2)


@dataclass(frozen=True, eq=False)
class OutcomeDensityTable:
    """Outcome density sampled on a grid, with optional per-photon split."""

    grid: QuadratureGrid
    density: np.ndarray
    per_photon: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        density = np.asarray(self.density, dtype=np.float64).copy()
        if density.shape != (self.grid.count,):
            raise DimensionMismatchError("density must have one value per grid node")
        density.setflags(write=False)
        object.__setattr__(self, "density", density)
        if self.per_photon is not None:
            rows = []
            for row in self.per_photon:
                row = np.asarray(row, dtype=np.float64).copy()
                if row.shape != (self.grid.count,):
                    raise DimensionMismatchError("per-photon rows must match the grid")
                row.setflags(write=False)
                rows.append(row)
            object.__setattr__(self, "per_photon", tuple(rows))

    def total_probability(self) -> float:
        return float(self.grid.integrate(self.density))


@lru_cache(maxsize=64)
def _gh_rule(count: int):
    u, w = roots_hermite(count)
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


def _hermite_rows(count: int, xi: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Rows scale * h_n(xi) for the orthonormal Hermite polynomials h_n.

    h_0 = pi^(-1/4), h_{n+1} = sqrt(2/(n+1)) xi h_n - sqrt(n/(n+1)) h_{n-1}.
    The scale factor is folded into the n=0 seed so one Gaussian suppression
    per factor keeps the rows inside double-precision range.
    """
    out = np.empty((count,) + xi.shape, dtype=np.float64)
    out[0] = np.pi**-0.25 * scale
    if count > 1:
        out[1] = np.sqrt(2.0) * xi * out[0]
    for n in range(1, count - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * xi * out[n] - np.sqrt(n / (n + 1.0)) * out[n - 1]
    return out


def _closed_form_factors(model: MeasurementModel, x_values: np.ndarray, squared: bool = False):
    """Factor matrix G and prefactor c with <n|P(x_b)|m> = c * (G_b G_b^T)_{nm}.

    Completing the square in the position integral leaves the weight
    exp(-alpha (x - x0)^2) with alpha = 2 + kappa and x0 = kappa x_m / alpha,
    plus the constant exp(-2 kappa x_m^2 / alpha), split evenly between the
    two factors of G so extreme outcomes underflow gracefully instead of
    overflowing.

    With squared=True the exact operator P^2 is built instead: the same
    Gaussian with doubled exponent, kappa -> 2 kappa, and squared prefactor.
    """
    dim = model.dim
    kappa = 2.0 * model.kappa if squared else model.kappa
    alpha = 2.0 + kappa
    u, w = _gh_rule(dim)
    x0 = kappa * x_values / alpha
    xi = np.sqrt(2.0) * (x0[:, None] + u[None, :] / np.sqrt(alpha))
    half_const = np.exp(-kappa * x_values**2 / alpha)
    rows = _hermite_rows(dim, xi, half_const[:, None])
    rows *= np.sqrt(w)[None, None, :]
    norm = (2.0 * np.pi * model.delta_x**2) ** (-0.5 if squared else -0.25)
    pref = norm * np.sqrt(2.0 / alpha)
    return rows, pref


@lru_cache(maxsize=16)
def _position_rule(dim: int):
    """Dense position grid and wavefunction table for the quadrature strategy."""
    span = np.sqrt(dim - 0.5) + 8.0
    nodes = np.linspace(-span, span, _QUADRATURE_COUNT)
    step = 2.0 * span / (_QUADRATURE_COUNT - 1)
    weights = np.full(_QUADRATURE_COUNT, step)
    weights[0] = weights[-1] = step / 2.0
    table = wavefunction_table(dim, nodes)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    table.setflags(write=False)
    return nodes, weights, table


def _quadrature_factors(model: MeasurementModel, x_values: np.ndarray, squared: bool = False):
    """Same contract as :func:`_closed_form_factors` via the dense grid."""
    nodes, weights, table = _position_rule(model.dim)
    kappa = 2.0 * model.kappa if squared else model.kappa
    kernel = np.exp(-kappa * (nodes[None, :] - x_values[:, None]) ** 2)
    rows = table[:, None, :] * np.sqrt(kernel * weights[None, :])[None, :, :]
    pref = (2.0 * np.pi * model.delta_x**2) ** (-0.5 if squared else -0.25)
    return rows, pref


def _factors(model: MeasurementModel, x_values: np.ndarray, squared: bool = False):
    if model.eval_strategy == "closed-form":
        return _closed_form_factors(model, x_values, squared)
    return _quadrature_factors(model, x_values, squared)


def _check_outcomes(x_values) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x_values, dtype=np.float64))
    if arr.ndim != 1:
        raise InvalidParameterError("outcome values must be scalar or 1-D")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError("outcome values must be finite")
    return arr


def measurement_operator(model: MeasurementModel, x_m: float) -> FockOperator:
    """Measurement operator P(x_m): real symmetric positive semidefinite."""
    x = _check_outcomes(x_m)
    if x.size != 1:
        raise InvalidParameterError("measurement_operator takes a single outcome")
    rows, pref = _factors(model, x)
    g = rows[:, 0, :]
    return FockOperator(pref * (g @ g.T))


def measurement_operator_squared(model: MeasurementModel, x_m: float) -> FockOperator:
    """The exact square P(x_m)^2, built directly as the doubled-exponent Gaussian.

    On a truncated space this differs from squaring the truncated operator
    matrix: the direct form keeps the contributions that pass through levels
    above the truncation, so its completeness integral is exact.
    """
    x = _check_outcomes(x_m)
    if x.size != 1:
        raise InvalidParameterError("measurement_operator_squared takes a single outcome")
    rows, pref = _factors(model, x, squared=True)
    g = rows[:, 0, :]
    return FockOperator(pref * (g @ g.T))


def operator_batch(model: MeasurementModel, x_values, squared: bool = False) -> np.ndarray:
    """Entries of P(x) (or the exact P(x)^2) for a batch of outcomes.

    Returns an array of shape (len(x), dim, dim).
    """
    x = _check_outcomes(x_values)
    out = np.empty((x.size, model.dim, model.dim))
    chunk = max(1, _CHUNK_ELEMENTS // (model.dim * model.dim))
    for start in range(0, x.size, chunk):
        sl = slice(start, min(start + chunk, x.size))
        rows, pref = _factors(model, x[sl], squared)
        out[sl] = pref * np.einsum("nbk,mbk->bnm", rows, rows, optimize=True)
    return out


def _hermite_contract(count: int, xi: np.ndarray, seed: np.ndarray, coeffs: np.ndarray):
    """Sum_m coeffs[m] * rows_m and all rows contracted against a running seed.

    Streams the three-term recurrence so only three (batch, nodes) arrays are
    alive at a time; returns sum_m coeffs[m] * (seed-scaled row m), the state
    contraction needed by the amplitude kernel.
    """
    prev = np.pi**-0.25 * seed
    acc = coeffs[0] * prev
    if count == 1:
        return acc
    cur = np.sqrt(2.0) * xi * prev
    acc = acc + coeffs[1] * cur
    for n in range(1, count - 1):
        prev, cur = cur, np.sqrt(2.0 / (n + 1)) * xi * cur - np.sqrt(n / (n + 1.0)) * prev
        if coeffs[n + 1] != 0.0:
            acc = acc + coeffs[n + 1] * cur
    return acc


def _hermite_project(count: int, xi: np.ndarray, seed: np.ndarray, weighted: np.ndarray):
    """Rows of sum_k row_n(xi_bk) * weighted_bk for every level n."""
    out = np.empty((xi.shape[0], count), dtype=weighted.dtype)
    prev = np.pi**-0.25 * seed
    out[:, 0] = (prev * weighted).sum(axis=1)
    if count == 1:
        return out
    cur = np.sqrt(2.0) * xi * prev
    out[:, 1] = (cur * weighted).sum(axis=1)
    for n in range(1, count - 1):
        prev, cur = cur, np.sqrt(2.0 / (n + 1)) * xi * cur - np.sqrt(n / (n + 1.0)) * prev
        out[:, n + 1] = (cur * weighted).sum(axis=1)
    return out


def measurement_amplitudes(state: FockState, model: MeasurementModel, x_values) -> np.ndarray:
    """Amplitudes <n|P(x)|state> for a batch of outcomes, shape (len(x), dim)."""
    if state.dim != model.dim:
        raise DimensionMismatchError(f"state dim {state.dim} != model dim {model.dim}")
    x = _check_outcomes(x_values)
    amps = state.amplitudes
    if np.all(amps.imag == 0.0):
        amps = amps.real
    dim = model.dim
    out = np.empty((x.size, dim), dtype=amps.dtype)

    if model.eval_strategy == "quadrature":
        nodes, weights, table = _position_rule(dim)
        pref = (2.0 * np.pi * model.delta_x**2) ** -0.25
        source = (amps @ table) * weights
        chunk = max(1, _CHUNK_ELEMENTS // nodes.size)
        for start in range(0, x.size, chunk):
            sl = slice(start, min(start + chunk, x.size))
            kernel = np.exp(-model.kappa * (nodes[None, :] - x[sl, None]) ** 2)
            out[sl] = pref * (kernel * source[None, :]) @ table.T
        return out

    kappa = model.kappa
    alpha = 2.0 + kappa
    u, w = _gh_rule(dim)
    pref = (2.0 * np.pi * model.delta_x**2) ** -0.25 * np.sqrt(2.0 / alpha)
    chunk = max(1, _CHUNK_ELEMENTS // dim)
    for start in range(0, x.size, chunk):
        sl = slice(start, min(start + chunk, x.size))
        xb = x[sl]
        xi = np.sqrt(2.0) * ((kappa * xb / alpha)[:, None] + u[None, :] / np.sqrt(alpha))
        seed = np.exp(-kappa * xb**2 / alpha)[:, None] * np.ones_like(xi)
        source = _hermite_contract(dim, xi, seed, amps) * (w[None, :] * seed)
        out[sl] = pref * _hermite_project(dim, xi, np.ones_like(xi), source)
    return out


def outcome_density(state: FockState, model: MeasurementModel, x_m: float) -> float:
    """Probability density of outcome x_m, the squared norm of P(x_m)|state>.

    For the vacuum this is a centered Gaussian with variance dx^2 + 1/4.
    """
    amps = measurement_amplitudes(state, model, x_m)
    return float(np.sum(np.abs(amps[0]) ** 2))


def conditional_state(state: FockState, model: MeasurementModel, x_m: float) -> FockState:
    """Normalized post-measurement state P(x_m)|state> / sqrt(density)."""
    amps = measurement_amplitudes(state, model, x_m)[0]
    density = float(np.sum(np.abs(amps) ** 2))
    if density < UNDERFLOW_DENSITY:
        raise DegenerateConditioningError(
            f"outcome density {density:.3e} at x_m={float(np.asarray(x_m)):.6g} underflows"
        )
    return FockState(amps / np.sqrt(density))


def joint_photon_density(state: FockState, model: MeasurementModel, x_m: float, n: int) -> float:
    """Joint density of outcome x_m and finding n photons afterwards."""
    if not isinstance(n, (int, np.integer)) or not 0 <= n < model.dim:
        raise OutOfRangeError(f"photon number {n!r} outside 0..{model.dim - 1}")
    amps = measurement_amplitudes(state, model, x_m)
    return float(np.abs(amps[0, n]) ** 2)


def asymptotic_p1(delta_x: float, x_m) -> np.ndarray | float:
    """Wide-kernel one-photon density for a vacuum input.

    (2 pi dx^2)^(-1/2) * x_m^2/(4 dx^2)^2 * exp(-x_m^2/(2 dx^2)); a double
    peak at x_m = +-sqrt(2) dx whose total area is 1/(16 dx^2).
    """
    if not np.isfinite(delta_x) or delta_x <= 0:
        raise InvalidParameterError(f"delta_x must be positive and finite, got {delta_x!r}")
    x = np.asarray(x_m, dtype=np.float64)
    val = (
        (2.0 * np.pi * delta_x**2) ** -0.5
        * x**2
        / (4.0 * delta_x**2) ** 2
        * np.exp(-(x**2) / (2.0 * delta_x**2))
    )
    if np.ndim(x_m) == 0:
        return float(val)
    return val


def completeness_required_span(model: MeasurementModel) -> float:
    """Grid half-width needed for the completeness integral at this dim."""
    return 6.0 * np.sqrt(model.delta_x**2 + model.dim)


def completeness_defect(
    model: MeasurementModel, grid: QuadratureGrid, include_untrusted: bool = False
) -> float:
    """Max-entry deviation of the integral of P^2 from the identity.

    Uses the exact squared kernel, so the only error sources are the grid
    (span and spacing) and the wavefunction tails of each level.  Restricted
    to the trusted subspace by default; with include_untrusted=True the top
    quarter of levels is measured too, which shows the residual defect
    sitting at the truncation edge.  Raises GridTooNarrowError when the grid
    does not cover 6 sigma of every trusted level's outcome distribution.
    """
    required = completeness_required_span(model)
    if grid.span < required:
        raise GridTooNarrowError(
            f"grid span {grid.span:.3g} < required {required:.3g} "
            f"(use span >= 6*sqrt(delta_x^2 + dim))"
        )
    squares = operator_batch(model, grid.nodes, squared=True)
    total = np.einsum("bnm,b->nm", squares, grid.weights, optimize=True)
    t = model.dim if include_untrusted else trusted_levels(model.dim)
    defect = total[:t, :t] - np.eye(model.dim)[:t, :t]
    return float(np.max(np.abs(defect)))


def truncated_square_defect(
    model: MeasurementModel, grid: QuadratureGrid, include_untrusted: bool = False
) -> float:
    """Completeness defect when the truncated operator matrix is squared.

    Squaring the truncated matrix drops the contributions routed through
    levels above the truncation, so this defect concentrates at the
    truncation edge: large when the top quarter is included, small on the
    trusted subspace at moderate resolution.
    """
    required = completeness_required_span(model)
    if grid.span < required:
        raise GridTooNarrowError(
            f"grid span {grid.span:.3g} < required {required:.3g} "
            f"(use span >= 6*sqrt(delta_x^2 + dim))"
        )
    ops = operator_batch(model, grid.nodes)
    total = np.einsum("bnm,bml,b->nl", ops, ops, grid.weights, optimize=True)
    t = model.dim if include_untrusted else trusted_levels(model.dim)
    defect = total[:t, :t] - np.eye(model.dim)[:t, :t]
    return float(np.max(np.abs(defect)))


def outcome_density_table(
    state: FockState,
    model: MeasurementModel,
    grid: QuadratureGrid,
    n_max: int = DEFAULT_N_MAX,
) -> OutcomeDensityTable:
    """Tabulate the outcome density and the first n_max+1 per-photon rows."""
    if not isinstance(n_max, (int, np.integer)) or not 0 <= n_max < model.dim:
        raise OutOfRangeError(f"n_max {n_max!r} outside 0..{model.dim - 1}")
    amps = measurement_amplitudes(state, model, grid.nodes)
    joint = np.abs(amps) ** 2
    density = joint.sum(axis=1)
    per_photon = tuple(joint[:, n] for n in range(n_max + 1))
    return OutcomeDensityTable(grid=grid, density=density, per_photon=per_photon)
