"""Two-level unwrapping: independent tile solves, then one integer offset per tile.

The parent energy splits exactly into per-tile energies plus the energy of
edges crossing tile borders. Once tile labels ``k'`` are fixed, shifting tile
``g`` by ``K_g`` leaves its interior pairwise terms unchanged, so the offsets
are found by minimising only the crossing terms (plus a small pull of every
``K_g`` towards zero), which is itself a labeling problem on the tile grid.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgumentError, InvalidStateError
from .phase import (
    EnergyBreakdown,
    LabelGrid,
    PhaseGrid,
    UnwrapProblem,
    WeightPolicy,
    apply_labels,
    build_problem,
    energy_l2,
    grid_edges,
)
from .qubo import (
    BinaryEncoding,
    QuboProblem,
    VarLayout,
    build_qubo,
    decode_bits,
    expand_quadratic_labels,
)
from .solvers import SolveReport, SolverConfig, derive_seed, get_solver

log = logging.getLogger(__name__)

THREADS_ENV = "PHASE_UNWRAP_THREADS"
TILE_STREAM = 0
OFFSET_STREAM = 1
DEFAULT_OFFSET_WEIGHT = 0.01


@dataclass(frozen=True, eq=False)
class Tile:
    index: int
    row0: int
    col0: int
    height: int
    width: int
    pixels: np.ndarray  # parent row-major indices, in local row-major order


@dataclass(frozen=True, eq=False)
class Tiling:
    width: int
    height: int
    tile_width: int
    tile_height: int
    tiles_x: int
    tiles_y: int
    tiles: tuple[Tile, ...]
    tile_of_pixel: np.ndarray
    boundary_edges: np.ndarray  # indices into the parent edge list

    @property
    def num_tiles(self) -> int:
        return len(self.tiles)


def make_tiling(width: int, height: int, tile_w: int, tile_h: int, parent: UnwrapProblem | None = None) -> Tiling:
    """Regular grid of tiles; the last row/column of tiles may be smaller.

    Boundary edges are identified against ``parent`` when given, otherwise
    against the standard four-neighbour edge list of a ``width x height`` grid.
    """
    if tile_w < 2 or tile_h < 2:
        raise InvalidArgumentError("tile dimensions must be >= 2")
    if width < tile_w or height < tile_h:
        raise InvalidArgumentError(
            f"tile {tile_w}x{tile_h} does not fit in grid {width}x{height}"
        )
    tiles_x = -(-width // tile_w)
    tiles_y = -(-height // tile_h)
    idx = np.arange(width * height, dtype=np.int64).reshape(height, width)
    tile_of_pixel = (
        (np.arange(height) // tile_h)[:, None] * tiles_x + (np.arange(width) // tile_w)[None, :]
    ).ravel()
    tiles = []
    for ty in range(tiles_y):
        for tx in range(tiles_x):
            r0, c0 = ty * tile_h, tx * tile_w
            r1, c1 = min(r0 + tile_h, height), min(c0 + tile_w, width)
            tiles.append(
                Tile(len(tiles), r0, c0, r1 - r0, c1 - c0, idx[r0:r1, c0:c1].ravel().copy())
            )
    if parent is not None:
        s, t = parent.edge_s, parent.edge_t
    else:
        s, t = grid_edges(width, height)
    boundary = np.nonzero(tile_of_pixel[s] != tile_of_pixel[t])[0]
    return Tiling(
        width, height, tile_w, tile_h, tiles_x, tiles_y, tuple(tiles), tile_of_pixel, boundary
    )


def restrict_problem(
    parent: UnwrapProblem, tiling: Tiling, tile: Tile | int, domain_size: int | None = None
) -> UnwrapProblem:
    """Sub-problem made of the parent's intra-tile edges and unary terms.

    ``domain_size`` overrides the parent's label domain. A small tile spans
    only a few distinct labels, and the offsets restore the global range, so
    a narrower tile domain (fewer bits per pixel) loses nothing while making
    the tile QUBO much easier for local-update solvers.
    """
    if domain_size is not None and domain_size < 2:
        raise InvalidArgumentError("tile domain must be >= 2")
    if isinstance(tile, (int, np.integer)):
        tile = tiling.tiles[tile]
    local = np.full(parent.num_pixels, -1, dtype=np.int64)
    local[tile.pixels] = np.arange(tile.pixels.size)
    ls, lt = local[parent.edge_s], local[parent.edge_t]
    inside = (ls >= 0) & (lt >= 0)
    return UnwrapProblem(
        width=tile.width,
        height=tile.height,
        edge_s=ls[inside],
        edge_t=lt[inside],
        edge_a=parent.edge_a[inside],
        edge_w=parent.edge_w[inside],
        unary_w=parent.unary_w[tile.pixels],
        unary_a=parent.unary_a[tile.pixels],
        domain_size=domain_size or parent.domain_size,
    )


def boundary_energy_l2(parent: UnwrapProblem, tiling: Tiling, labels) -> float:
    k = np.asarray(labels.labels if isinstance(labels, LabelGrid) else labels).ravel()
    e = tiling.boundary_edges
    r = (k[parent.edge_t[e]] - k[parent.edge_s[e]] - parent.edge_a[e]).astype(np.float64)
    return float(np.sum(parent.edge_w[e] * r * r))


@dataclass(frozen=True, eq=False)
class SuperpixelProblem:
    """Offset problem over one integer ``K_g`` per tile.

    Each crossing edge ``(s, t)`` with ``s`` in tile ``j`` and ``t`` in tile
    ``i`` contributes ``W (K_i - K_j - a')**2`` with
    ``a' = a_st - (k'_t - k'_s)``; each tile adds ``w_g (K_g - A_g)**2``.
    """

    tiles_x: int
    tiles_y: int
    tile_s: np.ndarray
    tile_t: np.ndarray
    a_prime: np.ndarray
    weight: np.ndarray
    unary_w: np.ndarray
    unary_a: np.ndarray
    offset_domain: int

    @property
    def num_tiles(self) -> int:
        return self.tiles_x * self.tiles_y

    @property
    def shift(self) -> int:
        """Offsets ``K`` are encoded as ``K + shift`` in ``[0, offset_domain)``."""
        return self.offset_domain // 2

    def pairwise_energy(self, offsets) -> float:
        K = np.asarray(offsets, dtype=np.int64)
        r = (K[self.tile_t] - K[self.tile_s] - self.a_prime).astype(np.float64)
        return float(np.sum(self.weight * r * r))

    def energy(self, offsets) -> float:
        K = np.asarray(offsets, dtype=np.int64)
        u = (K - self.unary_a).astype(np.float64)
        return self.pairwise_energy(K) + float(np.sum(self.unary_w * u * u))

    def merged_terms(self):
        """Crossing edges summed per unordered tile pair as ``(lo, hi, q2, q1, q0)``
        for ``q2 d**2 + q1 d + q0`` with ``d = K_hi - K_lo``."""
        forward = self.tile_s < self.tile_t
        lo = np.where(forward, self.tile_s, self.tile_t)
        hi = np.where(forward, self.tile_t, self.tile_s)
        a = np.where(forward, self.a_prime, -self.a_prime).astype(np.float64)
        n = self.num_tiles
        key = lo * n + hi
        uniq, inv = np.unique(key, return_inverse=True)
        W = self.weight
        q2 = np.bincount(inv, weights=W, minlength=uniq.size)
        q1 = np.bincount(inv, weights=-2.0 * W * a, minlength=uniq.size)
        q0 = np.bincount(inv, weights=W * a * a, minlength=uniq.size)
        return uniq // n, uniq % n, q2, q1, q0

    def to_qubo(self) -> tuple[QuboProblem, VarLayout, BinaryEncoding]:
        enc = BinaryEncoding(self.offset_domain)
        lo, hi, q2, q1, q0 = self.merged_terms()
        target = (self.unary_a + self.shift).astype(np.float64)
        uw = self.unary_w
        qubo = expand_quadratic_labels(
            self.num_tiles, enc, lo, hi, q2, q1, q0, uw, -2.0 * uw * target, uw * target * target
        )
        return qubo, VarLayout(self.num_tiles, enc.width), enc

    def decode(self, bits) -> tuple[np.ndarray, int]:
        """Offsets ``K`` from solver bits; returns ``(K, clamp_count)``."""
        enc = BinaryEncoding(self.offset_domain)
        raw = decode_bits(bits, VarLayout(self.num_tiles, enc.width))
        over = raw > self.offset_domain - 1
        return np.minimum(raw, self.offset_domain - 1) - self.shift, int(over.sum())


def _tile_label_array(tiling: Tiling, tile_labels: Sequence) -> list[np.ndarray]:
    if len(tile_labels) != tiling.num_tiles:
        raise InvalidStateError(
            f"expected {tiling.num_tiles} tile solutions, got {len(tile_labels)}"
        )
    out = []
    for tile, lab in zip(tiling.tiles, tile_labels):
        if lab is None:
            raise InvalidStateError(f"tile {tile.index} has no solution")
        arr = np.asarray(lab.labels if isinstance(lab, LabelGrid) else lab, dtype=np.int64)
        if arr.size != tile.pixels.size:
            raise InvalidStateError(f"tile {tile.index} solution has the wrong size")
        out.append(arr.ravel())
    return out


def assemble(tiling: Tiling, tile_labels: Sequence) -> np.ndarray:
    """Flat parent-order label array with every tile at offset zero."""
    k = np.zeros(tiling.width * tiling.height, dtype=np.int64)
    for tile, lab in zip(tiling.tiles, _tile_label_array(tiling, tile_labels)):
        k[tile.pixels] = lab
    return k


def build_superpixel_problem(
    parent: UnwrapProblem,
    tiling: Tiling,
    tile_labels: Sequence,
    offset_weight: float = DEFAULT_OFFSET_WEIGHT,
    offset_domain: int | None = None,
) -> SuperpixelProblem:
    k = assemble(tiling, tile_labels)
    e = tiling.boundary_edges
    s, t = parent.edge_s[e], parent.edge_t[e]
    n = tiling.num_tiles
    return SuperpixelProblem(
        tiles_x=tiling.tiles_x,
        tiles_y=tiling.tiles_y,
        tile_s=tiling.tile_of_pixel[s],
        tile_t=tiling.tile_of_pixel[t],
        a_prime=parent.edge_a[e] - (k[t] - k[s]),
        weight=parent.edge_w[e].copy(),
        unary_w=np.full(n, float(offset_weight)),
        unary_a=np.zeros(n, dtype=np.int64),
        offset_domain=offset_domain or 2 * parent.domain_size,
    )


def compose(tiling: Tiling, tile_labels: Sequence, offsets) -> np.ndarray:
    """Raw ``k'_i + K_tile(i)`` without normalisation or clamping, parent shape."""
    K = np.asarray(offsets, dtype=np.int64)
    return (assemble(tiling, tile_labels) + K[tiling.tile_of_pixel]).reshape(
        tiling.height, tiling.width
    )


def normalize_offsets(tiling: Tiling, tile_labels: Sequence, offsets) -> np.ndarray:
    """Offsets shifted so that ``min(K) == 0``, then lowered further until the
    smallest stitched label is 0.

    Both steps are global shifts, so the pairwise energy is unchanged. The
    second one matters when the tile holding the smallest offset was itself
    solved one level too high; it can only lower the unary energy.
    """
    K = np.asarray(offsets, dtype=np.int64)
    if K.shape != (tiling.num_tiles,):
        raise InvalidArgumentError("need one offset per tile")
    K = K - K.min()
    lowest = int(compose(tiling, tile_labels, K).min())
    return K - max(lowest, 0)


def stitch(tiling: Tiling, tile_labels: Sequence, offsets, domain_size: int) -> tuple[LabelGrid, int]:
    """Final labels ``k'_i + K_g`` with offsets from :func:`normalize_offsets`,
    clamped into ``[0, D-1]``. Returns ``(labels, clamp_count)``."""
    k = compose(tiling, tile_labels, normalize_offsets(tiling, tile_labels, offsets))
    over = (k > domain_size - 1) | (k < 0)
    clamped = int(over.sum())
    if clamped:
        log.warning("%d stitched labels fell outside [0, %d] and were clamped", clamped, domain_size - 1)
    return LabelGrid(np.clip(k, 0, domain_size - 1), domain_size), clamped


def inconsistent_tiles(tiling: Tiling, tile_labels: Sequence, reference) -> list[int]:
    """Tiles whose labels differ from ``reference`` by more than a constant shift.

    These are exactly the tiles for which the decomposition's core assumption
    fails relative to ``reference`` (typically a global optimum).
    """
    ref = np.asarray(reference.labels if isinstance(reference, LabelGrid) else reference).ravel()
    bad = []
    for tile, lab in zip(tiling.tiles, _tile_label_array(tiling, tile_labels)):
        diff = ref[tile.pixels] - lab
        if diff.size and np.any(diff != diff[0]):
            bad.append(tile.index)
    return bad


@dataclass
class PipelineReport:
    tile_reports: list[SolveReport]
    superpixel_report: SolveReport | None
    tile_labels: list[LabelGrid]
    offsets: np.ndarray
    labels: LabelGrid
    unwrapped: PhaseGrid
    energy: EnergyBreakdown
    clamp_count: int
    tile_clamp_count: int
    tiling: Tiling | None = None
    superpixel: SuperpixelProblem | None = None
    stats: dict = field(default_factory=dict)


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _solver_fn(solver) -> Callable[[QuboProblem, SolverConfig], SolveReport]:
    return get_solver(solver) if isinstance(solver, str) else solver


def _solve_labels(problem: UnwrapProblem, solver, config: SolverConfig, seed: int):
    qubo, layout = build_qubo(problem)
    report = _solver_fn(solver)(qubo, config.with_seed(seed))
    enc = BinaryEncoding(problem.domain_size)
    raw = decode_bits(report.best_bits, layout)
    clamped = int((raw > enc.domain_size - 1).sum())
    labels = LabelGrid(np.minimum(raw, enc.domain_size - 1).reshape(problem.height, problem.width), enc.domain_size)
    return labels, report, clamped


def unwrap_single(
    wrapped: PhaseGrid,
    solver="pt",
    config: SolverConfig | None = None,
    domain_size: int = 4,
    weights: WeightPolicy | None = None,
) -> PipelineReport:
    """Solve the whole image as one QUBO (uses the same RNG stream as tile 0)."""
    config = config or SolverConfig()
    problem = build_problem(wrapped, weights, domain_size)
    labels, report, clamped = _solve_labels(
        problem, solver, config, derive_seed(config.seed, TILE_STREAM, 0)
    )
    return PipelineReport(
        tile_reports=[report],
        superpixel_report=None,
        tile_labels=[labels],
        offsets=np.zeros(1, dtype=np.int64),
        labels=labels,
        unwrapped=apply_labels(wrapped, labels),
        energy=energy_l2(problem, labels),
        clamp_count=0,
        tile_clamp_count=clamped,
    )


def unwrap_superpixel(
    wrapped: PhaseGrid,
    tile_w: int,
    tile_h: int,
    solver="pt",
    config: SolverConfig | None = None,
    domain_size: int = 4,
    weights: WeightPolicy | None = None,
    offset_weight: float = DEFAULT_OFFSET_WEIGHT,
    offset_domain: int | None = None,
    offset_solver=None,
    threads: int | None = None,
    tile_domain: int | None = None,
    offset_config: SolverConfig | None = None,
) -> PipelineReport:
    """Tile solves, offset solve, stitch.

    ``offset_solver``/``offset_config`` default to the tile ``solver``/``config``;
    only the seed is replaced, by a stream derived from ``config.seed``.
    """
    config = config or SolverConfig()
    offset_config = offset_config or config
    problem = build_problem(wrapped, weights, domain_size)
    tiling = make_tiling(wrapped.width, wrapped.height, tile_w, tile_h, parent=problem)
    subproblems = [restrict_problem(problem, tiling, tile, tile_domain) for tile in tiling.tiles]

    def solve_tile(g):
        return _solve_labels(subproblems[g], solver, config, derive_seed(config.seed, TILE_STREAM, g))

    n_threads = min(resolve_threads(threads), tiling.num_tiles)
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(solve_tile, range(tiling.num_tiles)))
    else:
        results = [solve_tile(g) for g in range(tiling.num_tiles)]
    tile_labels = [r[0] for r in results]
    tile_reports = [r[1] for r in results]
    tile_clamps = sum(r[2] for r in results)

    sp = build_superpixel_problem(problem, tiling, tile_labels, offset_weight, offset_domain)
    sp_report = None
    if tiling.num_tiles > 1:
        qubo, _, _ = sp.to_qubo()
        sp_report = _solver_fn(offset_solver or solver)(
            qubo, offset_config.with_seed(derive_seed(config.seed, OFFSET_STREAM, 0))
        )
        offsets, _ = sp.decode(sp_report.best_bits)
    else:
        offsets = np.zeros(1, dtype=np.int64)

    labels, clamped = stitch(tiling, tile_labels, offsets, domain_size)
    energy = energy_l2(problem, labels)
    return PipelineReport(
        tile_reports=tile_reports,
        superpixel_report=sp_report,
        tile_labels=tile_labels,
        offsets=normalize_offsets(tiling, tile_labels, offsets),
        labels=labels,
        unwrapped=apply_labels(wrapped, labels),
        energy=energy,
        clamp_count=clamped,
        tile_clamp_count=tile_clamps,
        tiling=tiling,
        superpixel=sp,
        stats={"threads": n_threads, "num_tiles": tiling.num_tiles},
    )
