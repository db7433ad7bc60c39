"""Quantum-jump statistics: Monte Carlo sampling and deterministic integrals.

A vacuum input has zero photons, yet conditioning on the measurement outcome
creates them: the joint density of outcome x_m and finding n >= 1 photons is
a double-peaked function whose total area is the jump probability, close to
1/(16 dx^2) for wide kernels.  The jumps correlate with the squared outcome:
the integral of the one-photon density against (x_m^2 - dx^2) approaches the
resolution-independent constant 1/8, which equals the operator-ordering
correlation (<x^2 n + 2 x n x + n x^2>/4 - <x^2><n>) of the input state.

Monte Carlo shots are sharded into fixed-size blocks, each drawn from its
own deterministic random stream seeded by (seed, shard index).  Within a
shard, outcome uniforms are drawn first and photon uniforms second, so the
record stream is byte-identical no matter how many workers execute the
shards.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateConditioningError,
    DimensionMismatchError,
    GridTooNarrowError,
    InvalidParameterError,
)
from .fock import FockState, QuadratureGrid, make_grid, number_operator, quadrature_x, x_second_moment
from .measurement import MeasurementModel, measurement_amplitudes

#: Shots per random stream; fixed so that shard boundaries, and therefore the
#: sampled records, do not depend on how many workers run them.
SHARD_SIZE = 50_000

#: Node count of the inverse-CDF sampling table.
SAMPLING_GRID_COUNT = 8193


@dataclass(frozen=True, slots=True)
class OutcomeRecord:
    """One Monte Carlo shot: outcome, detected photons, and seed lineage."""

    x_m: float
    photon_n: int
    shot_index: int
    rng_stream_id: int


@dataclass(frozen=True)
class CorrelationReport:
    """Deterministic and sampled jump/correlation statistics.

    Exact quantities carry no error bars; standard_errors has one entry per
    sampled estimator.  Sampled fields are None when no shots were taken.
    """

    exact_c_integral: float
    operator_c: float
    jump_probability: float
    shots: int | None = None
    measured_c: float | None = None
    measured_covariance: float | None = None
    jump_fraction: float | None = None
    standard_errors: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if any(v < 0 for v in self.standard_errors.values()):
            raise InvalidParameterError("standard errors must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "CorrelationReport":
        return cls(**data)


def sampling_span(state: FockState, model: MeasurementModel) -> float:
    """Half-width of the adaptive sampling grid: 6 sigma of the outcome spread."""
    return 6.0 * np.sqrt(model.delta_x**2 + x_second_moment(state) + 1.0)


def required_span(state: FockState, model: MeasurementModel) -> float:
    """Minimum grid half-width accepted by the deterministic integrals."""
    return 6.0 * np.sqrt(model.delta_x**2 + x_second_moment(state) + 0.5)


def _check_wide(state: FockState, model: MeasurementModel, grid: QuadratureGrid) -> None:
    needed = required_span(state, model)
    if grid.span < needed:
        raise GridTooNarrowError(
            f"grid span {grid.span:.3g} < required {needed:.3g} for these jump integrals"
        )


def default_grid(state: FockState, model: MeasurementModel, count: int = 4001) -> QuadratureGrid:
    """Uniform grid wide enough for the deterministic jump integrals.

    Wider than the sampling grid: the correlation integral weights the tails
    by x^4, so 6 sigma leaves a visible remainder while 8 sigma does not.
    """
    span = 8.0 * np.sqrt(model.delta_x**2 + x_second_moment(state) + 1.0)
    return make_grid("uniform", span, count)


def _outcome_cdf(state: FockState, model: MeasurementModel):
    xs = np.linspace(
        -sampling_span(state, model), sampling_span(state, model), SAMPLING_GRID_COUNT
    )
    density = np.sum(np.abs(measurement_amplitudes(state, model, xs)) ** 2, axis=1)
    increments = 0.5 * (density[1:] + density[:-1]) * np.diff(xs)
    cdf = np.concatenate(([0.0], np.cumsum(increments)))
    # Strictly increasing CDF so the inverse is single valued in the tails;
    # the tilt shifts probability by ~1e-12, far below sampling noise.
    cdf += np.arange(cdf.size) * 1e-16
    cdf /= cdf[-1]
    return xs, cdf


def sample_outcome(state: FockState, model: MeasurementModel, rng, size: int | None = None):
    """Draw outcome(s) from the measurement density by inverse-CDF lookup."""
    if state.dim != model.dim:
        raise DimensionMismatchError(f"state dim {state.dim} != model dim {model.dim}")
    xs, cdf = _outcome_cdf(state, model)
    u = rng.random() if size is None else rng.random(size)
    return np.interp(u, cdf, xs)


def sample_photon_number(state_out: FockState, rng) -> int:
    """Draw a photon number from the distribution of a normalized state."""
    probs = state_out.probabilities()
    total = probs.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise InvalidParameterError("state has no probability weight to sample")
    cum = np.cumsum(probs)
    return int(np.searchsorted(cum, rng.random() * total, side="right"))


def _photon_samples(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probs, axis=1)
    totals = cum[:, -1]
    if np.any(totals <= 0.0):
        raise DegenerateConditioningError("sampled an outcome with zero conditional weight")
    return np.sum(cum < (u * totals)[:, None], axis=1)


def _run_shard(state, model, xs, cdf, seed, stream_id, start, count):
    rng = np.random.default_rng([seed, stream_id])
    u_x = rng.random(count)
    x = np.interp(u_x, cdf, xs)
    amps = measurement_amplitudes(state, model, x)
    probs = np.abs(amps) ** 2
    u_n = rng.random(count)
    n = _photon_samples(probs, u_n)
    return stream_id, start, x, n


def run_experiment(
    state: FockState,
    model: MeasurementModel,
    shots: int,
    seed: int,
    *,
    threads: int = 1,
) -> list[OutcomeRecord]:
    """Independent measurement shots: sample x_m, condition, sample photons.

    Deterministic for a fixed seed: shard s draws from default_rng([seed, s]),
    and shards are merged in shot order, so serial and threaded execution
    produce identical record lists.
    """
    if not isinstance(shots, (int, np.integer)) or shots < 1:
        raise InvalidParameterError(f"shots must be a positive integer, got {shots!r}")
    if not isinstance(threads, (int, np.integer)) or threads < 1:
        raise InvalidParameterError(f"threads must be a positive integer, got {threads!r}")
    xs, cdf = _outcome_cdf(state, model)
    shards = []
    start = 0
    stream_id = 0
    while start < shots:
        count = min(SHARD_SIZE, shots - start)
        shards.append((stream_id, start, count))
        start += count
        stream_id += 1

    def work(shard):
        sid, offset, count = shard
        return _run_shard(state, model, xs, cdf, seed, sid, offset, count)

    if threads > 1 and len(shards) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            parts = list(pool.map(work, shards))
    else:
        parts = [work(s) for s in shards]

    records: list[OutcomeRecord] = []
    for sid, offset, x, n in sorted(parts, key=lambda p: p[1]):
        records.extend(
            OutcomeRecord(float(xv), int(nv), offset + i, sid)
            for i, (xv, nv) in enumerate(zip(x, n))
        )
    return records


def _baseline_photon(state: FockState) -> int:
    return int(np.argmax(state.probabilities()))


def jump_probability(
    state: FockState,
    model: MeasurementModel,
    grid: QuadratureGrid,
    *,
    baseline_n: int | None = None,
) -> float:
    """Total probability that the detected photon number leaves the baseline.

    The baseline defaults to the input's most probable photon number (0 for
    vacuum, so this is the total weight of all n >= 1 columns).
    """
    if state.dim != model.dim:
        raise DimensionMismatchError(f"state dim {state.dim} != model dim {model.dim}")
    _check_wide(state, model, grid)
    if baseline_n is None:
        baseline_n = _baseline_photon(state)
    probs = np.abs(measurement_amplitudes(state, model, grid.nodes)) ** 2
    off_baseline = probs.sum(axis=1) - probs[:, baseline_n]
    return float(grid.integrate(off_baseline))


def measured_correlation(
    state: FockState, model: MeasurementModel, grid: QuadratureGrid
) -> float:
    """Deterministic jump/outcome correlation integral.

    Sum over n >= 1 of n times the integral of the joint photon/outcome
    density against (x_m^2 - dx^2); uses the exact matrix elements, not the
    wide-kernel approximation.  For a vacuum input this approaches 1/8 as the
    resolution grows.
    """
    if state.dim != model.dim:
        raise DimensionMismatchError(f"state dim {state.dim} != model dim {model.dim}")
    _check_wide(state, model, grid)
    probs = np.abs(measurement_amplitudes(state, model, grid.nodes)) ** 2
    ns = np.arange(model.dim)
    weighted = probs @ ns
    return float(grid.integrate(weighted * (grid.nodes**2 - model.delta_x**2)))


def operator_correlation(state: FockState, dim: int | None = None) -> float:
    """Operator-ordering correlation <x^2 n + 2 x n x + n x^2>/4 - <x^2><n>.

    Exactly 1/8 for the vacuum at any dim >= 4: only the sandwiched term
    contributes because n annihilates the vacuum on either side, and x|0> is
    the one-photon state with amplitude 0.5.
    """
    if dim is None:
        dim = state.dim
    if not isinstance(dim, (int, np.integer)) or dim < 4:
        raise InvalidParameterError(f"dim must be an integer >= 4, got {dim!r}")
    if dim < state.dim:
        support = np.nonzero(state.probabilities() > 0.0)[0]
        top = int(support[-1]) if support.size else 0
        if top >= dim:
            raise DimensionMismatchError(
                f"dim {dim} too small for state support up to level {top}"
            )
        amps = state.amplitudes[:dim]
    else:
        amps = np.zeros(dim, dtype=np.complex128)
        amps[: state.dim] = state.amplitudes
    x = quadrature_x(int(dim)).entries
    n = number_operator(int(dim)).entries
    xx = x @ x
    sandwich = xx @ n + 2.0 * (x @ n @ x) + n @ xx
    expect = lambda op: np.vdot(amps, op @ amps)
    value = 0.25 * expect(sandwich) - expect(xx) * expect(n)
    return float(np.real(value))


def summarize(
    records: Sequence[OutcomeRecord],
    state: FockState,
    model: MeasurementModel,
    grid: QuadratureGrid | None = None,
) -> CorrelationReport:
    """Combine sampled estimators with their deterministic counterparts.

    Sampled quantities: the jump fraction, the correlation estimator
    mean of n (x_m^2 - dx^2), and the sample covariance of (n, x_m^2), each
    with a shot-noise standard error.
    """
    if len(records) == 0:
        raise InvalidParameterError("records must be nonempty")
    if grid is None:
        grid = default_grid(state, model)
    exact = _exact_report_fields(state, model, grid)

    x = np.fromiter((r.x_m for r in records), dtype=np.float64, count=len(records))
    n = np.fromiter((r.photon_n for r in records), dtype=np.float64, count=len(records))
    shots = len(records)
    baseline = _baseline_photon(state)

    jumped = (n != baseline).astype(np.float64)
    jump_fraction = float(jumped.mean())
    se_jump = float(np.sqrt(jump_fraction * (1.0 - jump_fraction) / shots))

    values = n * (x**2 - model.delta_x**2)
    measured_c = float(values.mean())
    se_c = float(values.std(ddof=1) / np.sqrt(shots)) if shots > 1 else 0.0

    influence = (n - n.mean()) * (x**2 - (x**2).mean())
    measured_cov = float(influence.mean())
    se_cov = float(influence.std(ddof=1) / np.sqrt(shots)) if shots > 1 else 0.0

    return CorrelationReport(
        exact_c_integral=exact["exact_c_integral"],
        operator_c=exact["operator_c"],
        jump_probability=exact["jump_probability"],
        shots=shots,
        measured_c=measured_c,
        measured_covariance=measured_cov,
        jump_fraction=jump_fraction,
        standard_errors={
            "measured_c": se_c,
            "measured_covariance": se_cov,
            "jump_fraction": se_jump,
        },
    )


def exact_report(
    state: FockState, model: MeasurementModel, grid: QuadratureGrid | None = None
) -> CorrelationReport:
    """Deterministic quantities only; sampled fields are absent."""
    if grid is None:
        grid = default_grid(state, model)
    return CorrelationReport(**_exact_report_fields(state, model, grid))


def _exact_report_fields(state, model, grid) -> dict:
    return {
        "exact_c_integral": measured_correlation(state, model, grid),
        "operator_c": operator_correlation(state),
        "jump_probability": jump_probability(state, model, grid),
    }
