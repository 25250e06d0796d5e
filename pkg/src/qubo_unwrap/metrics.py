"""Ground-truth matching and run statistics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidArgumentError
from .phase import LabelGrid


@dataclass(frozen=True)
class MatchReport:
    raw_match_pct: float
    shift_aligned_match_pct: float
    best_shift: int
    pixel_count: int
    mismatch_count: int
    width: int
    height: int

    def as_dict(self) -> dict:
        return asdict(self)


def _labels(grid):
    return grid.labels if isinstance(grid, LabelGrid) else np.asarray(grid)


def mismatch_mask(result, truth) -> np.ndarray:
    r, t = _labels(result), _labels(truth)
    if r.shape != t.shape:
        raise InvalidArgumentError(f"shape mismatch: result {r.shape} vs truth {t.shape}")
    return r != t


def match_labels(result, truth) -> MatchReport:
    """Percentage of pixels whose label equals the truth, raw and after the best
    global integer shift of ``result``."""
    mask = mismatch_mask(result, truth)
    r, t = _labels(result).astype(np.int64), _labels(truth).astype(np.int64)
    n = r.size
    if n == 0:
        raise InvalidArgumentError("empty grids")
    raw_hits = n - int(mask.sum())
    shifts, counts = np.unique((t - r).ravel(), return_counts=True)
    best = counts.max()
    candidates = shifts[counts == best]
    # smallest |shift|, negative first on ties
    best_shift = int(sorted(candidates.tolist(), key=lambda c: (abs(c), c))[0])
    aligned_hits = int(best)
    return MatchReport(
        raw_match_pct=100.0 * raw_hits / n,
        shift_aligned_match_pct=100.0 * aligned_hits / n,
        best_shift=best_shift,
        pixel_count=n,
        mismatch_count=n - raw_hits,
        width=r.shape[1] if r.ndim == 2 else n,
        height=r.shape[0] if r.ndim == 2 else 1,
    )


def summarize(values) -> tuple[float, float]:
    """Arithmetic mean and population standard deviation."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise InvalidArgumentError("summarize() needs at least one value")
    return float(arr.mean()), float(arr.std(ddof=0))


def format_key_values(data: dict) -> str:
    return "".join(f"{k}={v}\n" for k, v in data.items())
