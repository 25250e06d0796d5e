"""QUBO solvers behind a common ``solver(qubo, config) -> SolveReport`` contract.

Randomness comes from numpy's PCG64 seeded through ``SeedSequence``; callers
that run many sub-solves derive child seeds with :func:`derive_seed` so the
streams depend only on ``(master_seed, stream_index)`` and never on
scheduling.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import _kernels
from .errors import InvalidArgumentError, ProblemTooLargeError
from .qubo import QuboProblem, qubo_energy

EXHAUSTIVE_MAX_VARS = 24

DEFAULT_NUM_TEMPS = 16
DEFAULT_BETA_MIN = 0.5
DEFAULT_BETA_MAX = 40.0


@dataclass(frozen=True)
class SolverConfig:
    seed: int = 0
    num_sweeps: int = 1000
    num_restarts: int = 1
    temperature_ladder: tuple[float, ...] | None = None
    replicas_per_temperature: int = 1
    icm_enabled: bool = False

    def __post_init__(self):
        if self.num_sweeps < 1 or self.num_restarts < 1 or self.replicas_per_temperature < 1:
            raise InvalidArgumentError("sweep, restart and replica counts must be >= 1")
        if self.temperature_ladder is not None:
            ladder = tuple(float(b) for b in self.temperature_ladder)
            if not ladder:
                raise InvalidArgumentError("temperature ladder is empty")
            if any(b <= 0 or not math.isfinite(b) for b in ladder):
                raise InvalidArgumentError("inverse temperatures must be positive and finite")
            if any(b2 <= b1 for b1, b2 in zip(ladder, ladder[1:])):
                raise InvalidArgumentError("temperature ladder must be strictly increasing")
            object.__setattr__(self, "temperature_ladder", ladder)

    def with_seed(self, seed: int) -> "SolverConfig":
        return replace(self, seed=seed)


@dataclass
class SolveReport:
    best_bits: np.ndarray
    best_energy: float
    energy_trace: np.ndarray
    seed_used: int
    wall_time: float
    solver: str = ""
    stats: dict = field(default_factory=dict)


def derive_seed(master_seed: int, *stream: int) -> int:
    """64-bit child seed for sub-solve ``stream`` of ``master_seed``."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, *map(int, stream)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF)))


def coupling_scale(qubo: QuboProblem) -> float:
    """Typical single-flip energy scale: median absolute coefficient."""
    vals = np.concatenate([np.abs(qubo.lin_value), np.abs(qubo.quad_value)])
    vals = vals[vals > 0]
    return float(np.median(vals)) if vals.size else 1.0


def default_ladder(qubo: QuboProblem, num_temps: int | None = None) -> np.ndarray:
    """Geometric inverse temperatures between ``DEFAULT_BETA_MIN`` and
    ``DEFAULT_BETA_MAX`` divided by :func:`coupling_scale`."""
    n = num_temps or DEFAULT_NUM_TEMPS
    return np.geomspace(DEFAULT_BETA_MIN, DEFAULT_BETA_MAX, n) / coupling_scale(qubo)


def swap_probability(beta_a: float, beta_b: float, e_a: float, e_b: float) -> float:
    """Metropolis acceptance for exchanging configurations between two temperatures."""
    return min(1.0, math.exp(min(0.0, _kernels.swap_log_acceptance(beta_a, beta_b, e_a, e_b))))


def _ladder(qubo: QuboProblem, config: SolverConfig) -> np.ndarray:
    if config.temperature_ladder is not None:
        return np.asarray(config.temperature_ladder, dtype=np.float64)
    return default_ladder(qubo)


def _finish(qubo, bits, trace, config, started, name, **stats) -> SolveReport:
    bits = np.asarray(bits, dtype=np.int8)
    trace = np.asarray(trace, dtype=np.float64) + qubo.offset
    # the trace is built from incremental updates; the minimum is re-evaluated exactly
    best = qubo_energy(qubo, bits)
    if trace.size:
        trace = np.minimum.accumulate(trace)
        trace[-1] = min(trace[-1], best)
    return SolveReport(
        best_bits=bits,
        best_energy=best,
        energy_trace=trace,
        seed_used=int(config.seed),
        wall_time=time.perf_counter() - started,
        solver=name,
        stats=stats,
    )


def _trivial(qubo, config, name, started):
    return _finish(qubo, np.zeros(0, np.int8), np.zeros(1), config, started, name)


def solve_exhaustive(qubo: QuboProblem, config: SolverConfig | None = None) -> SolveReport:
    """Global minimum by enumeration; ties go to the smallest ``sum_i x_i 2**i``."""
    config = config or SolverConfig()
    started = time.perf_counter()
    n = qubo.num_vars
    if n > EXHAUSTIVE_MAX_VARS:
        raise ProblemTooLargeError(
            f"exhaustive solver is capped at {EXHAUSTIVE_MAX_VARS} variables, got {n}"
        )
    if n == 0:
        return _trivial(qubo, config, "exhaustive", started)
    indptr, indices, data = qubo.csr
    tol = 1e-9 * max(1.0, qubo.max_abs_coefficient())
    bits, energy = _kernels.exhaustive_run(qubo.dense_linear, indptr, indices, data, tol)
    return _finish(qubo, bits, [energy], config, started, "exhaustive", states=1 << n)


def solve_sa(qubo: QuboProblem, config: SolverConfig | None = None) -> SolveReport:
    """Simulated annealing with a geometric schedule between the ladder endpoints."""
    config = config or SolverConfig()
    started = time.perf_counter()
    if qubo.num_vars == 0:
        return _trivial(qubo, config, "sa", started)
    ladder = _ladder(qubo, config)
    if ladder.size == 1 or config.num_sweeps == 1:
        betas = np.full(config.num_sweeps, ladder[-1])
    else:
        betas = np.geomspace(ladder[0], ladder[-1], config.num_sweeps)
    indptr, indices, data = qubo.csr
    trace = np.zeros(config.num_sweeps * config.num_restarts)
    bits, _ = _kernels.sa_run(
        qubo.dense_linear, indptr, indices, data, betas, config.num_restarts,
        make_rng(config.seed), trace,
    )
    return _finish(qubo, bits, trace, config, started, "sa", restarts=config.num_restarts)


def icm_temperatures(num_temps: int) -> np.ndarray:
    """Ladder positions that receive cluster moves (the colder half).

    Above the percolation point of the disagreement graph a cluster spans
    almost every disagreeing bit and the exchange degenerates into a
    whole-replica swap, so the hot end gains nothing from it.
    """
    mask = np.zeros(num_temps, dtype=np.bool_)
    mask[num_temps // 2:] = True
    return mask


def _run_pt(qubo, config, icm, name):
    started = time.perf_counter()
    ladder = _ladder(qubo, config)
    if ladder.size < 2:
        raise InvalidArgumentError("parallel tempering needs at least two temperatures")
    if qubo.num_vars == 0:
        return _trivial(qubo, config, name, started)
    icm_mask = icm_temperatures(ladder.size)
    indptr, indices, data = qubo.csr
    trace = np.zeros(config.num_sweeps)
    bits, _ = _kernels.pt_run(
        qubo.dense_linear, indptr, indices, data, ladder, config.replicas_per_temperature,
        config.num_sweeps, icm_mask, icm, make_rng(config.seed), trace,
    )
    return _finish(
        qubo, bits, trace, config, started, name,
        temperatures=int(ladder.size), replicas=config.replicas_per_temperature,
    )


def solve_pt(qubo: QuboProblem, config: SolverConfig | None = None) -> SolveReport:
    """Parallel tempering with neighbour-temperature Metropolis swaps."""
    return _run_pt(qubo, config or SolverConfig(), False, "pt")


def solve_pticm(qubo: QuboProblem, config: SolverConfig | None = None) -> SolveReport:
    """Parallel tempering plus isoenergetic (Houdayer) cluster moves."""
    config = config or SolverConfig(replicas_per_temperature=2, icm_enabled=True)
    if config.icm_enabled and config.replicas_per_temperature < 2:
        raise InvalidArgumentError("cluster moves need at least 2 replicas per temperature")
    return _run_pt(qubo, config, config.icm_enabled, "pticm")


def icm_move(qubo: QuboProblem, xa, xb, start: int):
    """Apply one cluster exchange to copies of ``xa``/``xb``; returns the new pair."""
    indptr, indices, data = qubo.csr
    xa = np.array(xa, dtype=np.int8)
    xb = np.array(xb, dtype=np.int8)
    ha, hb = np.zeros(qubo.num_vars), np.zeros(qubo.num_vars)
    _kernels.init_fields(qubo.dense_linear, indptr, indices, data, xa, ha)
    _kernels.init_fields(qubo.dense_linear, indptr, indices, data, xb, hb)
    _kernels.icm_exchange(indptr, indices, data, xa, ha, xb, hb, int(start))
    return xa, xb


Solver = Callable[[QuboProblem, SolverConfig], SolveReport]

SOLVERS: dict[str, Solver] = {
    "exhaustive": solve_exhaustive,
    "sa": solve_sa,
    "pt": solve_pt,
    "pticm": solve_pticm,
}


def register_solver(name: str, solver: Solver) -> None:
    SOLVERS[name] = solver


def get_solver(name: str) -> Solver:
    try:
        return SOLVERS[name]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown solver {name!r}; choose from {sorted(SOLVERS)}"
        ) from None
