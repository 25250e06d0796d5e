"""Desk-scale accuracy experiment: synthetic suites, per-solver unwrapping, summary table.

Every artefact written here is a pure function of the flags and the master
seed; wall-clock timings go to the manifests only, never to label or metric
files, so reruns with different thread counts compare byte for byte.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import gridio
from .metrics import format_key_values, match_labels, summarize
from .solvers import SolverConfig, derive_seed
from .superpixel import unwrap_single, unwrap_superpixel
from .synth import SynthSpec, generate_instance

log = logging.getLogger(__name__)

SUITES = {"noise-free": None, "low-noise": 15.0, "high-noise": 13.0}
SUITE_STREAM = {"noise-free": 0, "low-noise": 1, "high-noise": 2}

# per-solver sweep budgets used when the caller does not give one
DEFAULT_SWEEPS = {"pt": 2000, "pticm": 300, "sa": 20000, "exhaustive": 1}
DEFAULT_OFFSET_SWEEPS = 2000


def solver_config(solver: str, seed: int, sweeps: int | None = None, restarts: int = 1,
                  replicas: int | None = None) -> SolverConfig:
    icm = solver == "pticm"
    return SolverConfig(
        seed=seed,
        num_sweeps=sweeps or DEFAULT_SWEEPS.get(solver, 1000),
        num_restarts=restarts,
        replicas_per_temperature=replicas or (2 if icm else 1),
        icm_enabled=icm,
    )


@dataclass
class ExperimentSettings:
    suites: tuple[str, ...] = ("noise-free",)
    images: int = 10
    size: int = 100
    tile: int = 10
    solvers: tuple[str, ...] = ("pt",)
    seed: int = 0
    max_ambiguity: int = 4
    domain: int | None = None  # parent label domain; None means max_ambiguity + 1
    tile_domain: int | None = 4
    offset_domain: int | None = 8
    offset_solver: str | None = None  # None: same as the tile solver
    sweeps: int | None = None
    offset_sweeps: int | None = DEFAULT_OFFSET_SWEEPS
    threads: int | None = None

    def __post_init__(self):
        unknown = [s for s in self.suites if s not in SUITES]
        if unknown:
            raise ValueError(f"unknown suite(s) {unknown}; choose from {sorted(SUITES)}")
        if self.images < 1:
            raise ValueError("images must be >= 1")

    @property
    def label_domain(self) -> int:
        return self.domain or self.max_ambiguity + 1


@dataclass
class SolverSummary:
    suite: str
    solver: str
    raw: list[float] = field(default_factory=list)
    aligned: list[float] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)

    def row(self) -> dict:
        mean, std = summarize(self.raw)
        amean, astd = summarize(self.aligned)
        return {
            "suite": self.suite,
            "solver": self.solver,
            "images": len(self.raw),
            "avg_raw_match_pct": round(mean, 6),
            "std_raw_match_pct": round(std, 6),
            "avg_aligned_match_pct": round(amean, 6),
            "std_aligned_match_pct": round(astd, 6),
            "avg_energy": round(sum(self.energies) / len(self.energies), 6),
        }


@dataclass
class ExperimentResult:
    settings: ExperimentSettings
    summaries: list[SolverSummary]
    wall_time: float

    def rows(self) -> list[dict]:
        return [s.row() for s in self.summaries]

    def table(self) -> str:
        head = f"{'suite':<11} {'solver':<7} {'images':>6} {'avg raw %':>10} {'std':>7} {'avg aligned %':>14} {'std':>7}"
        lines = [head, "-" * len(head)]
        for r in self.rows():
            lines.append(
                f"{r['suite']:<11} {r['solver']:<7} {r['images']:>6} {r['avg_raw_match_pct']:>10.2f} "
                f"{r['std_raw_match_pct']:>7.2f} {r['avg_aligned_match_pct']:>14.2f} {r['std_aligned_match_pct']:>7.2f}"
            )
        return "\n".join(lines)


def image_seed(master: int, suite: str, index: int) -> int:
    # synth seeds feed a SeedSequence, which wants nonnegative ints
    return derive_seed(master, 100 + SUITE_STREAM[suite], index) >> 1


def run_image(settings: ExperimentSettings, suite: str, index: int, solver: str):
    """Generate image ``index`` of ``suite`` and unwrap it; returns ``(instance, report)``."""
    seed = image_seed(settings.seed, suite, index)
    inst = generate_instance(
        SynthSpec(settings.size, settings.size, seed=seed,
                  max_ambiguity=settings.max_ambiguity, snr_db=SUITES[suite])
    )
    config = solver_config(solver, seed, settings.sweeps)
    if settings.tile >= settings.size:
        report = unwrap_single(inst.wrapped, solver, config, settings.label_domain)
        return inst, report
    offset_solver = settings.offset_solver or solver
    report = unwrap_superpixel(
        inst.wrapped, settings.tile, settings.tile, solver=solver, config=config,
        domain_size=settings.label_domain, tile_domain=settings.tile_domain,
        offset_domain=settings.offset_domain, offset_solver=offset_solver,
        offset_config=solver_config(offset_solver, seed, settings.offset_sweeps),
        threads=settings.threads,
    )
    return inst, report


def run_experiment(settings: ExperimentSettings, out_dir: Path | str | None = None,
                   version: str = "", command: list[str] | None = None) -> ExperimentResult:
    started = time.perf_counter()
    out = Path(out_dir) if out_dir is not None else None
    summaries = []
    for suite in settings.suites:
        for solver in settings.solvers:
            summary = SolverSummary(suite, solver)
            for i in range(settings.images):
                t0 = time.perf_counter()
                inst, report = run_image(settings, suite, i, solver)
                match = match_labels(report.labels, inst.labels)
                summary.raw.append(match.raw_match_pct)
                summary.aligned.append(match.shift_aligned_match_pct)
                summary.energies.append(report.energy.total)
                log.info("%s %s image %d: raw %.2f%%", suite, solver, i, match.raw_match_pct)
                if out is not None:
                    _write_image(out, settings, suite, i, solver, inst, report, match,
                                 time.perf_counter() - t0, version, command)
            summaries.append(summary)
    result = ExperimentResult(settings, summaries, time.perf_counter() - started)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.txt").write_text(result.table() + "\n")
        (out / "summary.json").write_text(
            json.dumps({"settings": asdict(settings), "rows": result.rows()}, indent=2, sort_keys=True) + "\n"
        )
    return result


def _write_image(out, settings, suite, index, solver, inst, report, match, elapsed, version, command):
    d = out / suite / f"img{index:03d}"
    d.mkdir(parents=True, exist_ok=True)
    gridio.write_phase(inst.wrapped, d / "wrapped.fpg")
    gridio.write_labels(inst.labels, d / "truth.lbg")
    gridio.write_labels(report.labels, d / f"{solver}.labels.lbg")
    metrics = {**match.as_dict(), **{f"energy_{k}": v for k, v in report.energy.as_dict().items()},
               "clamp_count": report.clamp_count}
    (d / f"{solver}.metrics.txt").write_text(format_key_values(metrics))
    (d / f"{solver}.metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    manifest = {
        "command": command or ["experiment"],
        "flags": asdict(settings),
        "suite": suite,
        "image": index,
        "image_seed": image_seed(settings.seed, suite, index),
        "solver": solver,
        "version": version,
        "outputs": sorted(p.name for p in d.iterdir() if p.name.startswith(solver) or p.suffix in (".fpg",)),
        "timings": {"image_seconds": elapsed},
        "metrics": metrics,
    }
    (d / f"{solver}.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
