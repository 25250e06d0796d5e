"""Grid types, the wrap function, edge constants and integer-label energies.

Conventions used throughout the package:

* grids are ``(height, width)`` arrays, flattened row-major so that
  ``index = row * width + col``;
* an edge ``(s, t)`` joins pixel ``s`` to its right or lower neighbour ``t``
  and carries ``a_st = k_t - k_s``, the label jump a noise-free scene requires.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, InvalidArgumentError

TWO_PI = 2.0 * math.pi
INTEGRALITY_TOL = 1e-6


class PhaseKind(enum.Enum):
    WRAPPED = 0
    UNWRAPPED = 1


def _freeze(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    values: np.ndarray
    kind: PhaseKind

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise InvalidArgumentError(f"phase grid must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("phase grid contains non-finite values")
        if self.kind is PhaseKind.WRAPPED and values.size:
            lo, hi = values.min(), values.max()
            if lo <= -math.pi or hi > math.pi:
                raise InvalidArgumentError(
                    f"wrapped values must lie in (-pi, pi], got [{lo!r}, {hi!r}]"
                )
        object.__setattr__(self, "values", _freeze(values))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True, eq=False)
class LabelGrid:
    labels: np.ndarray
    domain_size: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise InvalidArgumentError(f"label grid must be 2-D, got shape {labels.shape}")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise InvalidArgumentError("labels must be integers")
        labels = labels.astype(np.int64)
        if self.domain_size < 1:
            raise InvalidArgumentError("domain_size must be >= 1")
        if labels.size and (labels.min() < 0 or labels.max() > self.domain_size - 1):
            raise InvalidArgumentError(
                f"labels must lie in [0, {self.domain_size - 1}], "
                f"got [{labels.min()}, {labels.max()}]"
            )
        object.__setattr__(self, "labels", _freeze(labels))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


@dataclass(frozen=True)
class WeightPolicy:
    edge_weight: float = 1.0
    unary_weight: float = 0.01
    unary_bias: int = 0


@dataclass(frozen=True, eq=False)
class UnwrapProblem:
    """Pixel graph for the labeling energy.

    Edge arrays are parallel: ``edge_s[e]``, ``edge_t[e]``, ``edge_a[e]``
    (integer jump) and ``edge_w[e]`` (weight). Unary arrays are per pixel in
    row-major order.
    """

    width: int
    height: int
    edge_s: np.ndarray
    edge_t: np.ndarray
    edge_a: np.ndarray
    edge_w: np.ndarray
    unary_w: np.ndarray
    unary_a: np.ndarray
    domain_size: int

    def __post_init__(self):
        for name, dtype in (
            ("edge_s", np.int64),
            ("edge_t", np.int64),
            ("edge_a", np.int64),
            ("edge_w", np.float64),
            ("unary_w", np.float64),
            ("unary_a", np.int64),
        ):
            object.__setattr__(self, name, _freeze(np.asarray(getattr(self, name), dtype=dtype)))
        n = self.width * self.height
        if self.unary_w.shape != (n,) or self.unary_a.shape != (n,):
            raise InvalidArgumentError("unary arrays must have one entry per pixel")
        m = self.edge_s.shape[0]
        if not (self.edge_t.shape == self.edge_a.shape == self.edge_w.shape == (m,)):
            raise InvalidArgumentError("edge arrays must have equal length")
        if np.any(self.edge_w < 0) or np.any(self.unary_w < 0):
            raise InvalidArgumentError("weights must be nonnegative")

    @property
    def num_pixels(self) -> int:
        return self.width * self.height

    @property
    def num_edges(self) -> int:
        return self.edge_s.shape[0]


@dataclass(frozen=True)
class EnergyBreakdown:
    pairwise: float
    unary: float
    total: float

    def as_dict(self) -> dict:
        return {"pairwise": self.pairwise, "unary": self.unary, "total": self.total}


def wrap(theta):
    """Map phase(s) into (-pi, pi]. Odd multiples of pi map to +pi."""
    arr = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("wrap() requires finite input")
    out = math.pi - np.mod(math.pi - arr, TWO_PI)
    # np.mod may round up to exactly 2*pi for tiny negative arguments
    out = np.where(out <= -math.pi, out + TWO_PI, out)
    # pi - arr can round to 2*pi just above -pi; in-range values are exact already
    out = np.where((arr > -math.pi) & (arr <= math.pi), arr, out)
    if out.ndim == 0:
        return float(out)
    return out


def _edge_quotients(phi_i, phi_j):
    diff = np.asarray(phi_i, dtype=np.float64) - np.asarray(phi_j, dtype=np.float64)
    # work on |diff| and restore the sign, so swapping the pair negates the result
    # bit for bit; a difference of exactly -pi then mirrors +pi and needs no jump
    mag = np.abs(diff)
    return np.sign(diff) * ((wrap(mag) - mag) / TWO_PI)


def edge_constants(phi_i, phi_j) -> np.ndarray:
    """Vectorised :func:`edge_constant`; returns an int64 array."""
    quotient = np.atleast_1d(_edge_quotients(phi_i, phi_j))
    rounded = np.round(quotient)
    err = np.abs(quotient - rounded)
    if err.size and err.max() >= INTEGRALITY_TOL:
        raise ConsistencyError(
            f"edge constant quotient {quotient[np.argmax(err)]!r} is not an integer; "
            "inputs were probably not wrapped phases"
        )
    return rounded.astype(np.int64)


def edge_constant(phi_i: float, phi_j: float) -> int:
    """Integer ``k_i - k_j`` implied by two neighbouring wrapped phases."""
    return int(edge_constants(phi_i, phi_j)[0])


def grid_edges(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Four-neighbour edges in row-major pixel order, right before down."""
    idx = np.arange(width * height, dtype=np.int64).reshape(height, width)
    s = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    t = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    direction = np.concatenate(
        [np.zeros(height * (width - 1), np.int64), np.ones((height - 1) * width, np.int64)]
    )
    order = np.lexsort((direction, s))
    return s[order], t[order]


def build_problem(
    wrapped: PhaseGrid, weights: WeightPolicy | None = None, domain_size: int = 4
) -> UnwrapProblem:
    if wrapped.kind is not PhaseKind.WRAPPED:
        raise InvalidArgumentError("build_problem needs a wrapped phase grid")
    if domain_size < 2:
        raise InvalidArgumentError("domain_size must be >= 2")
    if wrapped.width * wrapped.height < 2:
        raise InvalidArgumentError("grid must contain at least two pixels")
    weights = weights or WeightPolicy()
    if weights.edge_weight < 0 or weights.unary_weight < 0:
        raise InvalidArgumentError("weights must be nonnegative")
    s, t = grid_edges(wrapped.width, wrapped.height)
    flat = wrapped.values.ravel()
    n = flat.size
    return UnwrapProblem(
        width=wrapped.width,
        height=wrapped.height,
        edge_s=s,
        edge_t=t,
        edge_a=edge_constants(flat[t], flat[s]),
        edge_w=np.full(s.shape[0], float(weights.edge_weight)),
        unary_w=np.full(n, float(weights.unary_weight)),
        unary_a=np.full(n, int(weights.unary_bias), dtype=np.int64),
        domain_size=domain_size,
    )


def _flat_labels(problem: UnwrapProblem, labels) -> np.ndarray:
    arr = labels.labels if isinstance(labels, LabelGrid) else np.asarray(labels)
    if arr.ndim == 2:
        if arr.shape != (problem.height, problem.width):
            raise InvalidArgumentError(
                f"label shape {arr.shape} does not match problem "
                f"{(problem.height, problem.width)}"
            )
    elif arr.shape != (problem.num_pixels,):
        raise InvalidArgumentError(f"label shape {arr.shape} does not match problem")
    return arr.ravel().astype(np.int64)


def pairwise_residuals(problem: UnwrapProblem, labels) -> np.ndarray:
    k = _flat_labels(problem, labels)
    return k[problem.edge_t] - k[problem.edge_s] - problem.edge_a


def energy_l2(problem: UnwrapProblem, labels) -> EnergyBreakdown:
    k = _flat_labels(problem, labels)
    r = (k[problem.edge_t] - k[problem.edge_s] - problem.edge_a).astype(np.float64)
    u = (k - problem.unary_a).astype(np.float64)
    pairwise = float(np.sum(problem.edge_w * r * r))
    unary = float(np.sum(problem.unary_w * u * u))
    return EnergyBreakdown(pairwise, unary, pairwise + unary)


def energy_l1(problem: UnwrapProblem, labels) -> EnergyBreakdown:
    k = _flat_labels(problem, labels)
    r = np.abs(k[problem.edge_t] - k[problem.edge_s] - problem.edge_a).astype(np.float64)
    u = np.abs(k - problem.unary_a).astype(np.float64)
    pairwise = float(np.sum(problem.edge_w * r))
    unary = float(np.sum(problem.unary_w * u))
    return EnergyBreakdown(pairwise, unary, pairwise + unary)


def apply_labels(wrapped: PhaseGrid, labels: LabelGrid) -> PhaseGrid:
    if wrapped.kind is not PhaseKind.WRAPPED:
        raise InvalidArgumentError("apply_labels needs a wrapped phase grid")
    if wrapped.shape != labels.shape:
        raise InvalidArgumentError(
            f"shape mismatch: phase {wrapped.shape} vs labels {labels.shape}"
        )
    return PhaseGrid(wrapped.values + TWO_PI * labels.labels, PhaseKind.UNWRAPPED)
