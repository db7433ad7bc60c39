"""Two-mode optical circuit realizing the quadrature measurement.

The circuit is: a beam splitter of reflectivity R mixes the signal with a
vacuum meter mode, one arm passes a phase-sensitive amplifier scaling
x -> x/a (and y -> a y), the other arm one scaling x -> a x (and
y -> y/a), and a second identical beam splitter recombines the arms.
An ideal homodyne detection of the x quadrature on the meter output then
measures the signal's x quadrature without absorbing it.

With R = a^2/(a^2+1) the Heisenberg transforms work out to

    x_meter_out  = x_meter_in - k x_signal_in,      k = (a^2 - 1)/a,
    x_signal_out = -x_signal_in,
    y_signal_out = -y_signal_in - k y_meter_in,

so the signal x survives untouched (backaction evasion), the meter reads it
against vacuum noise of variance 1/4 (resolution dx = 1/(2k) = a/(2(a^2-1))),
and the mandatory backaction lands in the signal y.  The overall sign flip
of the signal frame after the two mostly-reflecting splitters is undone by
a parity correction on the output, making the conditional output state equal
to the single-mode measurement-kernel prediction for all inputs.

Mode layout: index 0 is the rail fed by the signal input and read out by the
meter homodyne; index 1 is fed by the meter vacuum and carries the signal
output.  Joint states are (dim_signal, dim_meter) amplitude matrices.

Truncation policy.  The requested dimensions define the I/O contract: input
states, reported conditional outputs, and the truncation-overflow guard.
Internally the unitaries act on a padded working space (a sponge layer of
one extra space above each rail) so that amplitude flowing through levels
just above the truncation during the squeeze-recombine sequence is not
reflected back into the trusted region; the detection step then keeps one
extra quarter of levels, mirroring the trusted-subspace policy.  Without the
sponge, conditioning on rare outcomes amplifies the edge error far above the
per-amplitude level (measured: three orders of magnitude at a = 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize_scalar

from .errors import (
    DegenerateConditioningError,
    DimensionMismatchError,
    InvalidParameterError,
    SetupMismatchError,
    TruncationOverflowError,
)
from .fock import FockState, QuadratureGrid, make_grid, wavefunction_table
from .measurement import (
    UNDERFLOW_DENSITY,
    MeasurementModel,
    measurement_amplitudes,
)

#: Occupation at or above the trusted cut of either rail beyond which results
#: are rejected as truncation overflow.
TRUNCATION_OCCUPATION_LIMIT = 1e-6

#: Calibration residual above which the setup/kernel comparison is aborted:
#: a residual this large signals a convention bug, not a tolerance issue.
CALIBRATION_RESIDUAL_LIMIT = 1e-2

_SQUEEZE_DIRECTIONS = ("amplify-x", "amplify-y")


@dataclass(frozen=True)
class SetupParams:
    """Amplifier gain and truncation dimensions of the two-mode circuit."""

    gain_a: float
    dim_signal: int = 40
    dim_meter: int = 40
    swap_arms: bool = False

    def __post_init__(self):
        a = self.gain_a
        if not isinstance(a, (int, float, np.floating)) or not np.isfinite(a) or a <= 1.0:
            raise InvalidParameterError(
                f"gain_a must be > 1 (the resolution diverges at a = 1), got {a!r}"
            )
        object.__setattr__(self, "gain_a", float(a))
        for name in ("dim_signal", "dim_meter"):
            d = getattr(self, name)
            if not isinstance(d, (int, np.integer)) or d < 2:
                raise InvalidParameterError(f"{name} must be an integer >= 2, got {d!r}")
            object.__setattr__(self, name, int(d))

    @property
    def reflectivity(self) -> float:
        """Beam-splitter reflectivity R = a^2/(a^2+1) matched to the gain."""
        a2 = self.gain_a**2
        return a2 / (a2 + 1.0)

    @property
    def delta_x(self) -> float:
        """Measurement resolution a/(2(a^2-1)) realized by the circuit."""
        return self.gain_a / (2.0 * (self.gain_a**2 - 1.0))


@dataclass(frozen=True, eq=False)
class TwoModeState:
    """Joint state of the two rails as an amplitude matrix [n_mode0, n_mode1]."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128).copy()
        if amps.ndim != 2 or amps.shape[0] < 2 or amps.shape[1] < 2:
            raise InvalidParameterError("two-mode amplitudes must be a matrix, dims >= 2")
        if not np.all(np.isfinite(amps)):
            raise InvalidParameterError("two-mode amplitudes must be finite")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dims(self) -> tuple[int, int]:
        return self.amplitudes.shape

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "TwoModeState":
        nrm = self.norm()
        if nrm == 0.0 or not np.isfinite(nrm):
            raise InvalidParameterError("cannot normalize a zero-norm state")
        return TwoModeState(self.amplitudes / nrm)

    def mode_occupations(self, mode: int) -> np.ndarray:
        """Marginal photon-number distribution of one mode."""
        if mode not in (0, 1):
            raise InvalidParameterError(f"mode must be 0 or 1, got {mode!r}")
        probs = np.abs(self.amplitudes) ** 2
        return probs.sum(axis=1 - mode)


def _sector_blocks(reflectivity: float, dims: tuple[int, int]):
    """Beam-splitter rotations per total-photon-number sector.

    The generator theta (a* b - a b*) conserves the total photon number, so
    the unitary splits into one real rotation per sector; sectors that fit
    inside the truncation are exponentiated exactly.
    """
    d0, d1 = dims
    theta = float(np.arcsin(np.sqrt(reflectivity)))
    blocks = []
    for total in range(d0 + d1 - 1):
        lo = max(0, total - d1 + 1)
        hi = min(d0 - 1, total)
        size = hi - lo + 1
        n0 = np.arange(lo, hi + 1)
        if size == 1:
            blocks.append((n0, total - n0, np.eye(1)))
            continue
        gen = np.zeros((size, size))
        for j in range(size - 1):
            amp = theta * np.sqrt((lo + j + 1.0) * (total - lo - j))
            gen[j + 1, j] = amp
            gen[j, j + 1] = -amp
        blocks.append((n0, total - n0, expm(gen)))
    return blocks


def _apply_sectors(joint: np.ndarray, blocks) -> np.ndarray:
    out = np.zeros_like(joint)
    for n0, n1, block in blocks:
        out[n0, n1] = block @ joint[n0, n1]
    return out


def beam_splitter(reflectivity: float, dims: tuple[int, int]) -> np.ndarray:
    """Two-mode beam-splitter unitary on the (dims[0] * dims[1])-dim space.

    Real orthogonal; R = 0 is the identity and R = 1 swaps the modes up to
    signs.  Rows/columns are indexed by flat (n_mode0 * dims[1] + n_mode1).
    """
    if not np.isfinite(reflectivity) or not 0.0 <= reflectivity <= 1.0:
        raise InvalidParameterError(f"reflectivity must lie in [0, 1], got {reflectivity!r}")
    d0, d1 = int(dims[0]), int(dims[1])
    if d0 < 2 or d1 < 2:
        raise InvalidParameterError("beam splitter dims must be >= 2")
    full = np.zeros((d0 * d1, d0 * d1))
    for n0, n1, block in _sector_blocks(reflectivity, (d0, d1)):
        flat = n0 * d1 + n1
        full[np.ix_(flat, flat)] = block
    return full


def squeeze_matrix(gain_a: float, direction: str, dim: int) -> np.ndarray:
    """Single-mode squeezer exp(r (a*^2 - a^2)/2) with r = ln(a) (amplify-x).

    Heisenberg action: x -> a x, y -> y/a for "amplify-x"; the reciprocal
    scaling for "amplify-y".  Real matrix, unitary on the truncated space.
    """
    if not np.isfinite(gain_a) or gain_a <= 0.0:
        raise InvalidParameterError(f"gain_a must be positive, got {gain_a!r}")
    if direction not in _SQUEEZE_DIRECTIONS:
        raise InvalidParameterError(
            f"direction must be one of {_SQUEEZE_DIRECTIONS}, got {direction!r}"
        )
    if not isinstance(dim, (int, np.integer)) or dim < 2:
        raise InvalidParameterError(f"dim must be an integer >= 2, got {dim!r}")
    r = float(np.log(gain_a))
    if direction == "amplify-y":
        r = -r
    ladder = np.diag(np.sqrt(np.arange(1.0, dim)), k=1)
    gen = 0.5 * r * (ladder.T @ ladder.T - ladder @ ladder)
    return expm(gen)


def opa_squeezer(
    gain_a: float, which_mode: int, direction: str, dims: tuple[int, int]
) -> np.ndarray:
    """Single-mode squeezer embedded in the two-mode space."""
    if which_mode not in (0, 1):
        raise InvalidParameterError(f"which_mode must be 0 or 1, got {which_mode!r}")
    d0, d1 = int(dims[0]), int(dims[1])
    single = squeeze_matrix(gain_a, direction, d0 if which_mode == 0 else d1)
    if which_mode == 0:
        return np.kron(single, np.eye(d1))
    return np.kron(np.eye(d0), single)


class SetupCircuit:
    """Prebuilt circuit for one parameter set, reused across inputs and outcomes."""

    def __init__(self, params: SetupParams):
        self.params = params
        d0, d1 = params.dim_signal, params.dim_meter
        # Sponge layer: evolve on twice the contract space so edge reflections
        # cannot contaminate the reported levels; detection keeps one extra
        # quarter, the same margin the trusted-subspace policy excludes.
        self._work0 = 2 * d0 + 16
        self._work1 = 2 * d1 + 16
        self._keep0 = min(self._work0, d0 + d0 // 4)
        self._keep1 = min(self._work1, d1 + d1 // 4)
        self._blocks = _sector_blocks(params.reflectivity, (self._work0, self._work1))
        dir0, dir1 = "amplify-y", "amplify-x"
        if params.swap_arms:
            dir0, dir1 = dir1, dir0
        self._squeeze0 = squeeze_matrix(params.gain_a, dir0, self._work0)
        self._squeeze1 = squeeze_matrix(params.gain_a, dir1, self._work1)
        self._parity1 = np.where(np.arange(self._keep1) % 2 == 0, 1.0, -1.0)
        self._cache_key = None
        self._cache_joint = None

    def _evolve_work(self, signal_in: FockState) -> np.ndarray:
        if signal_in.dim != self.params.dim_signal:
            raise DimensionMismatchError(
                f"signal dim {signal_in.dim} != circuit dim {self.params.dim_signal}"
            )
        key = signal_in.amplitudes.tobytes()
        if self._cache_key == key:
            return self._cache_joint
        joint = np.zeros((self._work0, self._work1), dtype=np.complex128)
        joint[: signal_in.dim, 0] = signal_in.amplitudes
        joint = _apply_sectors(joint, self._blocks)
        joint = self._squeeze0 @ joint @ self._squeeze1.T
        joint = _apply_sectors(joint, self._blocks)
        self._check_truncation(joint)
        self._cache_key = key
        self._cache_joint = joint
        return joint

    def _check_truncation(self, joint: np.ndarray) -> None:
        probs = np.abs(joint) ** 2
        for mode, dim in ((0, self.params.dim_signal), (1, self.params.dim_meter)):
            occ = probs.sum(axis=1 - mode)
            top = float(occ[dim - dim // 4 :].sum())
            if top > TRUNCATION_OCCUPATION_LIMIT:
                raise TruncationOverflowError(
                    f"top-quarter occupation {top:.3e} of mode {mode} exceeds "
                    f"{TRUNCATION_OCCUPATION_LIMIT:g}; increase the truncation dimension"
                )

    def evolve(self, signal_in: FockState) -> TwoModeState:
        """Joint state after the circuit, truncated to the contract dimensions.

        The tiny weight living above the truncation is dropped, not
        renormalized, so the squared norm reports how much was lost.
        """
        joint = self._evolve_work(signal_in)
        return TwoModeState(joint[: self.params.dim_signal, : self.params.dim_meter])

    def homodyne_amplitudes(self, signal_in: FockState, raw_values) -> np.ndarray:
        """Signal-output amplitudes after reading mode 0 at raw outcome values.

        Projects mode 0 onto the x-quadrature eigenfunction at each raw value
        and applies the parity frame correction that undoes the circuit's
        signal-frame inversion.  Shape (len(raw_values), keep1) with
        keep1 >= dim_meter; squared row norms are the outcome density in the
        raw homodyne variable.
        """
        raw = np.atleast_1d(np.asarray(raw_values, dtype=np.float64))
        if not np.all(np.isfinite(raw)):
            raise InvalidParameterError("homodyne outcomes must be finite")
        joint = self._evolve_work(signal_in)[: self._keep0, : self._keep1]
        table = wavefunction_table(self._keep0, raw)
        projected = np.einsum("ab,ai->ib", joint, table, optimize=True)
        return projected * self._parity1[None, :]


@dataclass(frozen=True)
class Calibration:
    """Affine map x_m = scale * raw (offset fixed to 0 by circuit parity)."""

    scale: float
    offset: float
    residual: float


def calibrate_outcome_map(
    params: SetupParams,
    *,
    circuit: SetupCircuit | None = None,
    signal_in: FockState | None = None,
) -> Calibration:
    """Fit the scale mapping raw homodyne values to measurement outcomes.

    The magnitude comes from matching the variance of the raw outcome density
    against the measurement-kernel prediction for the same input, refined by
    a bounded one-dimensional least-squares pass; the sign is resolved by
    comparing conditional output states at one probe outcome.  The analytic
    expectation is scale = -2 dx.  A residual above
    CALIBRATION_RESIDUAL_LIMIT raises SetupMismatchError.
    """
    circuit = circuit or SetupCircuit(params)
    if signal_in is None:
        signal_in = FockState.vacuum(params.dim_signal)
    # The raw meter-output x has variance 1/4 + (delta_x^2 + <x^2>_in)/(2 dx)^2,
    # of order one for every gain; span 8 covers far beyond 6 sigma.
    raw = make_grid("uniform", 8.0, 1601)
    amps_raw = circuit.homodyne_amplitudes(signal_in, raw.nodes)
    density_raw = np.sum(np.abs(amps_raw) ** 2, axis=1)

    model = MeasurementModel(params.delta_x, params.dim_signal)
    xm_grid = make_grid("uniform", 6.0 * np.sqrt(params.delta_x**2 + 1.0), 1201)
    kernel_amps = measurement_amplitudes(signal_in, model, xm_grid.nodes)
    density_kernel = np.sum(np.abs(kernel_amps) ** 2, axis=1)
    peak = float(np.max(density_kernel))

    var_raw = raw.integrate(density_raw * raw.nodes**2) / raw.integrate(density_raw)
    var_kernel = xm_grid.integrate(density_kernel * xm_grid.nodes**2) / xm_grid.integrate(
        density_kernel
    )
    scale0 = float(np.sqrt(var_kernel / var_raw))

    probe = xm_grid.nodes[:: 24]

    def residual_of(c: float) -> float:
        setup_amps = circuit.homodyne_amplitudes(signal_in, probe / c)
        mapped = np.sum(np.abs(setup_amps) ** 2, axis=1) / abs(c)
        ref = measurement_amplitudes(signal_in, model, probe)
        return float(np.max(np.abs(mapped - np.sum(np.abs(ref) ** 2, axis=1)))) / peak

    fit = minimize_scalar(
        residual_of,
        bounds=(0.98 * scale0, 1.02 * scale0),
        method="bounded",
        options={"xatol": 1e-10},
    )
    scale = float(fit.x)
    residual = float(fit.fun)

    # Sign: compare conditional states at a probe outcome on the positive side.
    probe_raw = 0.8 * float(np.sqrt(var_raw))
    probe_amp = circuit.homodyne_amplitudes(signal_in, probe_raw)[0]
    nrm = np.linalg.norm(probe_amp)
    if nrm > 0.0:
        probe_state = probe_amp[: params.dim_meter] / nrm
        overlaps = []
        for sign in (1.0, -1.0):
            ref = measurement_amplitudes(signal_in, model, sign * scale * probe_raw)[0]
            ref_nrm = np.linalg.norm(ref)
            if ref_nrm > 0.0:
                overlaps.append(abs(np.vdot(ref / ref_nrm, probe_state)))
            else:
                overlaps.append(0.0)
        if overlaps[1] > overlaps[0]:
            scale = -scale

    if residual > CALIBRATION_RESIDUAL_LIMIT:
        raise SetupMismatchError(
            f"calibration residual {residual:.3e} exceeds {CALIBRATION_RESIDUAL_LIMIT:g}; "
            "the circuit does not reduce to the measurement kernel"
        )
    return Calibration(scale=scale, offset=0.0, residual=residual)


def run_setup(
    signal_in: FockState,
    params: SetupParams,
    homodyne_result: float,
    *,
    circuit: SetupCircuit | None = None,
    calibration: Calibration | None = None,
) -> tuple[float, FockState]:
    """Outcome density and conditional signal output at one calibrated outcome.

    The meter input is vacuum.  homodyne_result is expressed in calibrated
    measurement units; the returned density is per unit of that variable and
    the conditional state is reported at the meter-rail contract dimension.
    """
    if not np.isfinite(homodyne_result):
        raise InvalidParameterError("homodyne_result must be finite")
    circuit = circuit or SetupCircuit(params)
    calibration = calibration or calibrate_outcome_map(params, circuit=circuit)
    raw = homodyne_result / calibration.scale
    amps = circuit.homodyne_amplitudes(signal_in, raw)[0]
    density_raw = float(np.sum(np.abs(amps) ** 2))
    if density_raw < UNDERFLOW_DENSITY:
        raise DegenerateConditioningError(
            f"outcome density underflows at homodyne result {homodyne_result:.6g}"
        )
    density = density_raw / abs(calibration.scale)
    out = amps[: params.dim_meter]
    return density, FockState(out / np.linalg.norm(out))


def equivalence_defect(
    signal_in: FockState,
    params: SetupParams,
    grid: QuadratureGrid,
    *,
    circuit: SetupCircuit | None = None,
    calibration: Calibration | None = None,
    density_floor: float = 1e-6,
) -> float:
    """Worst-case disagreement between the circuit and the measurement kernel.

    For every grid outcome whose kernel density exceeds density_floor the
    defect is |density_setup - density_kernel| plus the trace distance
    between the conditional output states; the maximum over outcomes is
    returned.
    """
    if params.dim_signal != params.dim_meter:
        raise DimensionMismatchError(
            "equivalence comparison requires equal signal and meter dimensions"
        )
    circuit = circuit or SetupCircuit(params)
    calibration = calibration or calibrate_outcome_map(params, circuit=circuit)

    model = MeasurementModel(params.delta_x, params.dim_signal)
    kernel_amps = measurement_amplitudes(signal_in, model, grid.nodes)
    density_kernel = np.sum(np.abs(kernel_amps) ** 2, axis=1)

    raw = grid.nodes / calibration.scale
    setup_amps = circuit.homodyne_amplitudes(signal_in, raw)
    density_setup = np.sum(np.abs(setup_amps) ** 2, axis=1) / abs(calibration.scale)

    dim = params.dim_meter
    worst = 0.0
    for i in np.nonzero(density_kernel > density_floor)[0]:
        p_setup = float(density_setup[i])
        p_kernel = float(density_kernel[i])
        out = setup_amps[i, :dim]
        out_norm = np.linalg.norm(out)
        if out_norm == 0.0:
            worst = max(worst, abs(p_setup - p_kernel) + 1.0)
            continue
        ref = kernel_amps[i] / np.sqrt(p_kernel)
        overlap = abs(np.vdot(out / out_norm, ref))
        trace_distance = float(np.sqrt(max(0.0, 1.0 - min(1.0, overlap) ** 2)))
        worst = max(worst, abs(p_setup - p_kernel) + trace_distance)
    return worst
