"""``phase-unwrap`` command line: generate, unwrap, evaluate, experiment.

Exit codes: 0 success, 2 usage, 3 data mismatch or unreadable data,
4 solver or problem-size failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__, gridio
from .errors import (
    ConsistencyError,
    GenerationFailedError,
    GridFormatError,
    InvalidArgumentError,
    InvalidStateError,
    ProblemTooLargeError,
)
from .experiment import (
    DEFAULT_OFFSET_SWEEPS,
    SUITES,
    ExperimentSettings,
    run_experiment,
    solver_config,
)
from .metrics import format_key_values, match_labels
from .phase import PhaseKind
from .solvers import SOLVERS
from .superpixel import unwrap_single, unwrap_superpixel
from .synth import SynthSpec, generate_instance

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_SOLVER = 4

log = logging.getLogger("qubo_unwrap")


class UsageError(Exception):
    pass


def _tile(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    return w, h


def _solver_list(text: str) -> list[str]:
    names = [s for s in text.replace(",", " ").split() if s]
    bad = [s for s in names if s not in SOLVERS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown solver(s) {bad}; choose from {sorted(SOLVERS)}")
    return names


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=str) + "\n")


def _prefix(p: str) -> Path:
    prefix = Path(p)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    return prefix


def _with_suffix(prefix: Path, suffix: str) -> Path:
    return prefix.with_name(prefix.name + suffix)


def _manifest(args, outputs, timings, metrics=None, inputs=()):
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    return {
        "command": args.command,
        "flags": flags,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "timings": timings,
        "metrics": metrics or {},
    }


def cmd_generate(args) -> int:
    started = time.perf_counter()
    spec = SynthSpec(
        width=args.width, height=args.height, seed=args.seed, max_ambiguity=args.max_ambiguity,
        snr_db=args.snr_db, perlin_octaves=args.octaves, perlin_base_frequency=args.base_frequency,
    )
    inst = generate_instance(spec)
    prefix = _prefix(args.out_prefix)
    outputs = {
        "truth": _with_suffix(prefix, ".truth.fpg"),
        "wrapped": _with_suffix(prefix, ".wrapped.fpg"),
        "labels": _with_suffix(prefix, ".labels.lbg"),
        "truth_pgm": _with_suffix(prefix, ".truth.pgm"),
        "wrapped_pgm": _with_suffix(prefix, ".wrapped.pgm"),
    }
    gridio.write_phase(inst.truth, outputs["truth"])
    gridio.write_phase(inst.wrapped, outputs["wrapped"])
    gridio.write_labels(inst.labels, outputs["labels"])
    gridio.export_pgm(inst.truth, outputs["truth_pgm"])
    gridio.export_pgm(inst.wrapped, outputs["wrapped_pgm"])
    manifest = _with_suffix(prefix, ".manifest.json")
    _write_json(manifest, _manifest(args, outputs.values(), {"total_seconds": time.perf_counter() - started}))
    for p in outputs.values():
        print(p)
    return EXIT_OK


def _read_wrapped(path) -> "gridio.PhaseGrid":
    path = Path(path)
    if path.suffix.lower() == ".csv":
        grid = gridio.import_csv(path)
    else:
        grid = gridio.read_phase(path)
    if grid.kind is not PhaseKind.WRAPPED:
        raise ConsistencyError(f"{path} holds an unwrapped grid; unwrap needs wrapped phase")
    return grid


def cmd_unwrap(args) -> int:
    started = time.perf_counter()
    wrapped = _read_wrapped(args.input)
    config = solver_config(args.solver, args.seed, args.sweeps, args.restarts, args.replicas)
    if args.no_tiling or args.tile is None:
        report = unwrap_single(wrapped, args.solver, config, args.domain)
    else:
        tw, th = args.tile
        offset_solver = args.offset_solver or args.solver
        report = unwrap_superpixel(
            wrapped, tw, th, solver=args.solver, config=config, domain_size=args.domain,
            tile_domain=args.tile_domain, offset_domain=args.offset_domain,
            offset_solver=offset_solver,
            offset_config=solver_config(offset_solver, args.seed, args.offset_sweeps),
        )
    prefix = _prefix(args.out_prefix)
    outputs = [
        _with_suffix(prefix, ".labels.lbg"),
        _with_suffix(prefix, ".unwrapped.fpg"),
        _with_suffix(prefix, ".unwrapped.pgm"),
        _with_suffix(prefix, ".energy.txt"),
    ]
    gridio.write_labels(report.labels, outputs[0])
    gridio.write_phase(report.unwrapped, outputs[1])
    gridio.export_pgm(report.unwrapped, outputs[2])
    energy = {**report.energy.as_dict(), "clamp_count": report.clamp_count,
              "tile_clamp_count": report.tile_clamp_count}
    outputs[3].write_text(format_key_values(energy))
    timings = {
        "total_seconds": time.perf_counter() - started,
        "tile_solve_seconds": [r.wall_time for r in report.tile_reports],
        "offset_solve_seconds": report.superpixel_report.wall_time if report.superpixel_report else 0.0,
    }
    _write_json(_with_suffix(prefix, ".manifest.json"),
                _manifest(args, outputs, timings, energy, inputs=[args.input]))
    sys.stdout.write(format_key_values(energy))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    result = gridio.read_labels(args.result)
    truth = gridio.read_labels(args.truth)
    if result.labels.shape != truth.labels.shape:
        raise ConsistencyError(
            f"shape mismatch: result {result.labels.shape} vs truth {truth.labels.shape}"
        )
    metrics = match_labels(result, truth).as_dict()
    text = format_key_values(metrics)
    sys.stdout.write(text)
    if args.out_prefix:
        prefix = _prefix(args.out_prefix)
        _with_suffix(prefix, ".metrics.txt").write_text(text)
        _write_json(_with_suffix(prefix, ".metrics.json"), metrics)
    return EXIT_OK


def cmd_experiment(args) -> int:
    suites = tuple(SUITES) if "all" in args.suite else tuple(dict.fromkeys(args.suite))
    settings = ExperimentSettings(
        suites=suites, images=args.images, size=args.size, tile=args.tile,
        solvers=tuple(args.solvers), seed=args.seed, max_ambiguity=args.max_ambiguity,
        domain=args.domain, tile_domain=args.tile_domain, offset_domain=args.offset_domain,
        offset_solver=args.offset_solver, sweeps=args.sweeps, offset_sweeps=args.offset_sweeps,
    )
    result = run_experiment(settings, args.out_dir, __version__, sys.argv[1:] if args.argv is None else args.argv)
    print(result.table())
    log.info("experiment finished in %.1f s", result.wall_time)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phase-unwrap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic interferogram and its truth")
    g.add_argument("--width", type=int, default=400)
    g.add_argument("--height", type=int, default=400)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--max-ambiguity", type=int, default=4)
    g.add_argument("--snr-db", type=float, default=None)
    g.add_argument("--octaves", type=int, default=4)
    g.add_argument("--base-frequency", type=float, default=2.0)
    g.add_argument("--out-prefix", required=True)
    g.set_defaults(func=cmd_generate)

    solver_names = sorted(SOLVERS)
    u = sub.add_parser("unwrap", help="unwrap a wrapped phase grid (FPG1 or CSV)")
    u.add_argument("--in", dest="input", required=True)
    u.add_argument("--solver", choices=solver_names, default="pt")
    tiling = u.add_mutually_exclusive_group()
    tiling.add_argument("--tile", type=_tile, default=(10, 10), help="tile size WxH (default 10x10)")
    tiling.add_argument("--no-tiling", action="store_true", help="solve the whole grid as one QUBO")
    u.add_argument("--domain", type=int, default=4, help="label domain size D")
    u.add_argument("--tile-domain", type=int, default=None, help="label domain for tile solves (default D)")
    u.add_argument("--offset-domain", type=int, default=None, help="offset domain (default 2D)")
    u.add_argument("--offset-solver", choices=solver_names, default=None)
    u.add_argument("--offset-sweeps", type=int, default=DEFAULT_OFFSET_SWEEPS)
    u.add_argument("--seed", type=int, default=0)
    u.add_argument("--sweeps", type=int, default=None)
    u.add_argument("--restarts", type=int, default=1)
    u.add_argument("--replicas", type=int, default=None)
    u.add_argument("--out-prefix", required=True)
    u.set_defaults(func=cmd_unwrap)

    e = sub.add_parser("evaluate", help="compare a label grid with the truth")
    e.add_argument("--result", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--out-prefix", default=None)
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("experiment", help="accuracy table over synthetic suites")
    x.add_argument("--suite", action="append", choices=sorted(SUITES) + ["all"],
                   help="repeatable; default noise-free")
    x.add_argument("--images", type=int, default=10)
    x.add_argument("--size", type=int, default=100)
    x.add_argument("--tile", type=int, default=10)
    x.add_argument("--solvers", type=_solver_list, default=["pt"], help="comma-separated")
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--max-ambiguity", type=int, default=4)
    x.add_argument("--domain", type=int, default=None, help="label domain (default max-ambiguity + 1)")
    x.add_argument("--tile-domain", type=int, default=4)
    x.add_argument("--offset-domain", type=int, default=8)
    x.add_argument("--offset-solver", choices=solver_names, default=None)
    x.add_argument("--sweeps", type=int, default=None)
    x.add_argument("--offset-sweeps", type=int, default=DEFAULT_OFFSET_SWEEPS)
    x.add_argument("--out-dir", default="experiment-out")
    x.set_defaults(func=cmd_experiment, argv=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "experiment":
        args.suite = args.suite or ["noise-free"]
        args.argv = list(argv) if argv is not None else None
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (InvalidArgumentError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConsistencyError, GridFormatError, InvalidStateError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ProblemTooLargeError, GenerationFailedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
