"""Command-line front end: seeded runs, CSV/JSON tables and reports.

Every command writes a result envelope whose metadata (tool version, fully
resolved configuration, seed) suffices to reproduce the payload exactly.
JSON output is a single file {meta, payload, checksum}; CSV output writes the
tabular payload to the requested path plus a ``<path>.meta.json`` sidecar
carrying the metadata, any non-tabular payload, and the checksums.  Payload
bytes are deterministic for a fixed configuration and seed; only the
timestamp in the metadata varies between runs.

Exit codes: 0 success, 2 configuration error, 3 numeric precondition failure
(narrow grid, degenerate conditioning, calibration mismatch), 4 truncation
overflow.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import (
    BaeQndError,
    DegenerateConditioningError,
    GridTooNarrowError,
    InvalidParameterError,
    SetupMismatchError,
    TruncationOverflowError,
)
from .fock import FockState, make_grid
from .jumps import (
    default_grid,
    exact_report,
    jump_probability,
    run_experiment,
    summarize,
)
from .measurement import (
    MeasurementModel,
    asymptotic_p1,
    completeness_defect,
    completeness_required_span,
    outcome_density_table,
    truncated_square_defect,
)
from .setup_model import SetupCircuit, SetupParams, calibrate_outcome_map, equivalence_defect

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_TRUNCATION = 4

_COMMANDS = {}


def _command(name):
    def register(fn):
        _COMMANDS[name] = fn
        return fn

    return register


def _env_threads() -> int:
    raw = os.environ.get("BAE_QND_THREADS")
    if raw is None:
        return min(4, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError as exc:
        raise InvalidParameterError(f"BAE_QND_THREADS must be an integer, got {raw!r}") from exc
    if value < 1:
        raise InvalidParameterError(f"BAE_QND_THREADS must be >= 1, got {value}")
    return value


def _pyify(obj):
    """Recursively convert numpy scalars/arrays so json can serialize them."""
    if isinstance(obj, dict):
        return {k: _pyify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_pyify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_pyify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _canonical_payload_bytes(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def _checksum(payload: dict) -> str:
    return "sha256:" + hashlib.sha256(_canonical_payload_bytes(payload)).hexdigest()


def _format_cell(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _table_csv(table: dict) -> str:
    columns = table["columns"]
    lines = [",".join(columns)]
    for row in table["rows"]:
        lines.append(",".join(_format_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _report_csv(report: dict) -> str:
    lines = ["key,value"]

    def walk(prefix, node):
        if isinstance(node, dict):
            for key, value in node.items():
                walk(f"{prefix}{key}.", value)
        else:
            lines.append(f"{prefix.rstrip('.')},{_format_cell(node)}")

    walk("", report)
    return "\n".join(lines) + "\n"


def _write_envelope(args, payload: dict, seed) -> None:
    payload = _pyify(payload)
    meta = {
        "tool": "bae-qnd-sim",
        "version": __version__,
        "command": args.command,
        "config": _pyify(vars(args).copy()),
        "seed": seed,
        "threads": _env_threads(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    checksum = _checksum(payload)
    out = args.out
    if args.format == "json":
        envelope = {"meta": meta, "payload": payload, "checksum": checksum}
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(envelope, fh, indent=1, sort_keys=True)
            fh.write("\n")
        print(f"wrote {out}")
        return
    table = payload.get("table")
    if table is None:
        csv_text = _report_csv(payload.get("report", payload))
    else:
        csv_text = _table_csv(table)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_text)
    sidecar = {
        "meta": meta,
        "payload_without_table": {k: v for k, v in payload.items() if k != "table"},
        "checksum": checksum,
        "csv_sha256": "sha256:" + hashlib.sha256(csv_text.encode()).hexdigest(),
    }
    with open(out + ".meta.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out} and {out}.meta.json")


def _require_delta_x(args, count=1):
    if args.gain_a is not None:
        raise InvalidParameterError(
            f"command {args.command!r} takes --delta-x, not --gain-a"
        )
    if not args.delta_x:
        raise InvalidParameterError(f"command {args.command!r} requires --delta-x")
    if count == 1 and len(args.delta_x) != 1:
        raise InvalidParameterError(
            f"command {args.command!r} takes exactly one --delta-x value"
        )
    for dx in args.delta_x:
        if not np.isfinite(dx) or dx <= 0:
            raise InvalidParameterError(f"--delta-x must be positive, got {dx}")
    return args.delta_x[0] if count == 1 else list(args.delta_x)


def _require_gain(args):
    if args.delta_x:
        raise InvalidParameterError(
            f"command {args.command!r} takes --gain-a, not --delta-x"
        )
    if args.gain_a is None:
        raise InvalidParameterError(f"command {args.command!r} requires --gain-a")
    return args.gain_a


def _auto_span(delta_x: float) -> float:
    return 6.0 * np.sqrt(delta_x**2 + 1.0)


def _resolve_grid(args, delta_x: float, default_span=None):
    span = args.grid_span if args.grid_span is not None else (
        default_span if default_span is not None else _auto_span(delta_x)
    )
    args.grid_span = float(span)
    return make_grid("uniform", float(span), args.grid_count)


@_command("distribution")
def _cmd_distribution(args):
    delta_x = _require_delta_x(args)
    model = MeasurementModel(delta_x, args.dim)
    grid = _resolve_grid(args, delta_x)
    state = FockState.vacuum(args.dim)
    table = outcome_density_table(state, model, grid, n_max=args.n_max)
    asym = asymptotic_p1(delta_x, grid.nodes)
    columns = (
        ["x_m", "density"]
        + [f"p_{n}" for n in range(args.n_max + 1)]
        + ["p1_asymptotic", "x_scaled", "p1_scaled", "p1_asymptotic_scaled"]
    )
    p1 = table.per_photon[1] if args.n_max >= 1 else np.zeros(grid.count)
    rows = []
    cube = delta_x**3
    for i, x in enumerate(grid.nodes):
        row = [float(x), float(table.density[i])]
        row += [float(table.per_photon[n][i]) for n in range(args.n_max + 1)]
        row += [float(asym[i]), float(x / delta_x), float(cube * p1[i]), float(cube * asym[i])]
        rows.append(row)
    return {"table": {"columns": columns, "rows": rows}}, None


@_command("jump-sweep")
def _cmd_jump_sweep(args):
    sweep = _require_delta_x(args, count=None)
    rows = []
    for dx in sweep:
        model = MeasurementModel(dx, args.dim)
        state = FockState.vacuum(args.dim)
        grid = default_grid(state, model, count=args.grid_count)
        exact = jump_probability(state, model, grid)
        asym = 1.0 / (16.0 * dx * dx)
        rows.append([float(dx), float(exact), float(asym), float(exact / asym)])
    return {
        "table": {"columns": ["delta_x", "jump_exact", "jump_asymptotic", "ratio"], "rows": rows}
    }, None


@_command("correlation")
def _cmd_correlation(args):
    delta_x = _require_delta_x(args)
    model = MeasurementModel(delta_x, args.dim)
    state = FockState.vacuum(args.dim)
    grid = default_grid(state, model, count=args.grid_count)
    if args.shots is None:
        report = exact_report(state, model, grid)
        seed = None
    else:
        if args.seed is None:
            raise InvalidParameterError("--shots requires --seed (no silent default seed)")
        records = run_experiment(
            state, model, args.shots, args.seed, threads=_env_threads()
        )
        report = summarize(records, state, model, grid)
        seed = args.seed
    return {"report": report.to_dict()}, seed


@_command("povm-check")
def _cmd_povm_check(args):
    delta_x = _require_delta_x(args)
    rows = []
    dims = sorted({d for d in (args.dim - 16, args.dim - 8, args.dim) if d >= 8})
    for dim in dims:
        model = MeasurementModel(delta_x, dim)
        span = args.grid_span if args.grid_span is not None else completeness_required_span(model)
        grid = make_grid("uniform", float(span), args.grid_count)
        # Exact-kernel defect is the audit; the truncated-square variants show
        # that what truncation breaks stays localized at the top levels.
        rows.append([
            int(dim),
            int(dim - dim // 4),
            float(completeness_defect(model, grid)),
            float(truncated_square_defect(model, grid)),
            float(truncated_square_defect(model, grid, include_untrusted=True)),
        ])
    model = MeasurementModel(delta_x, args.dim)
    if args.grid_span is None:
        args.grid_span = float(completeness_required_span(model))
    return {
        "table": {
            "columns": [
                "dim",
                "trusted_levels",
                "defect",
                "truncated_square_defect_trusted",
                "truncated_square_defect_full",
            ],
            "rows": rows,
        },
        "report": {
            "delta_x": delta_x,
            "required_span": float(completeness_required_span(model)),
            "grid_span": float(args.grid_span),
            "grid_count": args.grid_count,
            "max_defect": max(r[2] for r in rows),
        },
    }, None


@_command("setup-check")
def _cmd_setup_check(args):
    gain = _require_gain(args)
    dims = sorted({max(8, args.dim // 2), (3 * args.dim) // 4, args.dim})
    params = SetupParams(gain, args.dim, args.dim)
    circuit = SetupCircuit(params)
    calibration = calibrate_outcome_map(params, circuit=circuit)
    inputs = {"vacuum": FockState.vacuum(args.dim), "one_photon": FockState.number(args.dim, 1)}
    grid = _resolve_grid(args, params.delta_x)
    defects = {}
    scales = {}
    for name, state in inputs.items():
        defects[name] = float(
            equivalence_defect(state, params, grid, circuit=circuit, calibration=calibration)
        )
        scales[name] = float(
            calibrate_outcome_map(params, circuit=circuit, signal_in=state).scale
        )
    rows = []
    for dim in dims:
        sub = SetupParams(gain, dim, dim)
        sub_grid = make_grid("uniform", args.grid_span, args.grid_count)
        try:
            sub_defect = float(equivalence_defect(FockState.vacuum(dim), sub, sub_grid))
            rows.append([int(dim), sub_defect, ""])
        except TruncationOverflowError:
            rows.append([int(dim), None, "truncation-overflow at this dim"])
    return {
        "table": {"columns": ["dim", "vacuum_defect", "note"], "rows": rows},
        "report": {
            "gain_a": gain,
            "reflectivity": params.reflectivity,
            "delta_x": params.delta_x,
            "calibration_scale": calibration.scale,
            "calibration_offset": calibration.offset,
            "calibration_residual": calibration.residual,
            "scale_by_input": scales,
            "equivalence_defect": defects,
        },
    }, None


@_command("simulate")
def _cmd_simulate(args):
    delta_x = _require_delta_x(args)
    if args.shots is None or args.seed is None:
        raise InvalidParameterError("simulate requires --shots and --seed")
    model = MeasurementModel(delta_x, args.dim)
    state = FockState.vacuum(args.dim)
    records = run_experiment(state, model, args.shots, args.seed, threads=_env_threads())
    report = summarize(records, state, model)
    emit = records if args.record_limit is None else records[: args.record_limit]
    rows = [[r.shot_index, r.rng_stream_id, float(r.x_m), r.photon_n] for r in emit]
    return {
        "table": {"columns": ["shot_index", "rng_stream_id", "x_m", "photon_n"], "rows": rows},
        "report": report.to_dict(),
        "records_emitted": len(rows),
    }, args.seed


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bae-qnd-sim",
        description=(
            "Simulator of backaction-evasion quadrature measurements: outcome "
            "distributions, quantum-jump statistics, and the two-mode optical "
            "setup that realizes the measurement."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "distribution": "tabulate outcome and per-photon densities on a grid",
        "jump-sweep": "exact jump probability against the wide-kernel 1/(16 dx^2) law",
        "correlation": "jump/outcome correlation report (exact, optionally sampled)",
        "povm-check": "completeness audit of the squared measurement kernel",
        "setup-check": "two-mode circuit vs measurement kernel equivalence",
        "simulate": "seeded Monte Carlo shots plus summary report",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--delta-x", type=float, action="append", default=None,
                       help="measurement resolution (repeatable for jump-sweep)")
        p.add_argument("--gain-a", type=float, default=None,
                       help="amplifier gain (setup-check only)")
        p.add_argument("--dim", type=int, default=32, help="Fock truncation dimension")
        p.add_argument("--grid-span", type=float, default=None,
                       help="outcome grid half-width (default: command-specific)")
        p.add_argument("--grid-count", type=int, default=2001, help="outcome grid nodes")
        p.add_argument("--n-max", type=int, default=4, help="highest tabulated photon number")
        p.add_argument("--shots", type=int, default=None, help="Monte Carlo shots")
        p.add_argument("--seed", type=int, default=None, help="random seed (required for shots)")
        p.add_argument("--record-limit", type=int, default=None,
                       help="emit at most this many per-shot records")
        p.add_argument("--out", required=True, help="output file path")
        p.add_argument("--format", choices=("csv", "json"), default="json",
                       help="output format (default json)")
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        payload, seed = _COMMANDS[args.command](args)
        _write_envelope(args, payload, seed)
    except TruncationOverflowError as exc:
        print(f"error: {exc} (suggestion: retry with --dim {args.dim + args.dim // 2})",
              file=sys.stderr)
        return EXIT_TRUNCATION
    except (GridTooNarrowError, DegenerateConditioningError, SetupMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidParameterError, BaeQndError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
