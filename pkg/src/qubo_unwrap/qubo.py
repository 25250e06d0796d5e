"""Sparse QUBO container, binary label encoding, and the unwrapping QUBO."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidArgumentError
from .phase import LabelGrid, UnwrapProblem


@dataclass(frozen=True, eq=False)
class QuboProblem:
    """``E(x) = offset + sum_i lin[i] x_i + sum_{i<j} quad[i,j] x_i x_j``.

    Coefficients are stored canonically: ``lin_index`` sorted and unique,
    quadratic pairs with ``quad_i < quad_j`` sorted lexicographically, and no
    zero entries.
    """

    num_vars: int
    lin_index: np.ndarray
    lin_value: np.ndarray
    quad_i: np.ndarray
    quad_j: np.ndarray
    quad_value: np.ndarray
    offset: float = 0.0

    @classmethod
    def from_terms(cls, num_vars, linear=(), quadratic=(), offset=0.0) -> "QuboProblem":
        """Build from ``{i: a}`` / ``{(i, j): b}`` mappings or iterables of pairs.

        Diagonal quadratic entries fold into the linear part since ``x*x == x``
        for binary ``x``; repeated keys accumulate.
        """
        lin = linear.items() if hasattr(linear, "items") else linear
        quad = quadratic.items() if hasattr(quadratic, "items") else quadratic
        li, lv = [], []
        for i, v in lin:
            li.append(i)
            lv.append(v)
        qi, qj, qv = [], [], []
        for (i, j), v in quad:
            qi.append(i)
            qj.append(j)
            qv.append(v)
        return cls.from_arrays(num_vars, li, lv, qi, qj, qv, offset)

    @classmethod
    def from_arrays(cls, num_vars, lin_index, lin_value, quad_i, quad_j, quad_value, offset=0.0):
        lin_index = np.asarray(lin_index, dtype=np.int64).ravel()
        lin_value = np.asarray(lin_value, dtype=np.float64).ravel()
        qi = np.asarray(quad_i, dtype=np.int64).ravel()
        qj = np.asarray(quad_j, dtype=np.int64).ravel()
        qv = np.asarray(quad_value, dtype=np.float64).ravel()
        if lin_index.shape != lin_value.shape or not (qi.shape == qj.shape == qv.shape):
            raise InvalidArgumentError("coefficient arrays must have matching lengths")
        for arr in (lin_index, qi, qj):
            if arr.size and (arr.min() < 0 or arr.max() >= num_vars):
                raise InvalidArgumentError("variable index out of range")
        if not (np.all(np.isfinite(lin_value)) and np.all(np.isfinite(qv)) and math.isfinite(offset)):
            raise InvalidArgumentError("coefficients must be finite")

        diag = qi == qj
        lin_index = np.concatenate([lin_index, qi[diag]])
        lin_value = np.concatenate([lin_value, qv[diag]])
        qi, qj, qv = qi[~diag], qj[~diag], qv[~diag]
        lo, hi = np.minimum(qi, qj), np.maximum(qi, qj)

        lin = np.bincount(lin_index, weights=lin_value, minlength=num_vars)
        keep = np.nonzero(lin)[0]
        pair_key = lo * num_vars + hi
        uniq, inverse = np.unique(pair_key, return_inverse=True)
        summed = np.bincount(inverse, weights=qv, minlength=uniq.size) if uniq.size else np.zeros(0)
        nz = summed != 0
        uniq, summed = uniq[nz], summed[nz]
        return cls(
            num_vars=int(num_vars),
            lin_index=keep.astype(np.int64),
            lin_value=lin[keep],
            quad_i=(uniq // num_vars).astype(np.int64) if num_vars else uniq,
            quad_j=(uniq % num_vars).astype(np.int64) if num_vars else uniq,
            quad_value=summed,
            offset=float(offset),
        )

    @property
    def linear(self) -> dict[int, float]:
        return dict(zip(self.lin_index.tolist(), self.lin_value.tolist()))

    @property
    def quadratic(self) -> dict[tuple[int, int], float]:
        return dict(zip(zip(self.quad_i.tolist(), self.quad_j.tolist()), self.quad_value.tolist()))

    @cached_property
    def dense_linear(self) -> np.ndarray:
        out = np.zeros(self.num_vars)
        out[self.lin_index] = self.lin_value
        return out

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric adjacency ``(indptr, indices, data)`` with both directions stored."""
        rows = np.concatenate([self.quad_i, self.quad_j])
        cols = np.concatenate([self.quad_j, self.quad_i])
        vals = np.concatenate([self.quad_value, self.quad_value])
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        indptr = np.zeros(self.num_vars + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=self.num_vars), out=indptr[1:])
        return indptr, cols.astype(np.int64), vals.astype(np.float64)

    def max_abs_coefficient(self) -> float:
        vals = np.concatenate([np.abs(self.lin_value), np.abs(self.quad_value)])
        return float(vals.max()) if vals.size else 0.0

    def to_dense(self) -> np.ndarray:
        """Upper-triangular matrix with linear terms on the diagonal (offset excluded)."""
        q = np.zeros((self.num_vars, self.num_vars))
        q[self.lin_index, self.lin_index] = self.lin_value
        q[self.quad_i, self.quad_j] = self.quad_value
        return q


def qubo_energy(qubo: QuboProblem, x) -> float:
    x = np.asarray(x)
    if x.shape != (qubo.num_vars,):
        raise InvalidArgumentError(f"expected {qubo.num_vars} bits, got shape {x.shape}")
    xf = x.astype(np.float64)
    return float(
        qubo.offset
        + np.dot(qubo.lin_value, xf[qubo.lin_index])
        + np.dot(qubo.quad_value, xf[qubo.quad_i] * xf[qubo.quad_j])
    )


def qubo_energies(qubo: QuboProblem, xs) -> np.ndarray:
    """Energies for a batch of bit-vectors, shape ``(m, num_vars)``."""
    xf = np.asarray(xs, dtype=np.float64)
    return (
        qubo.offset
        + xf[:, qubo.lin_index] @ qubo.lin_value
        + (xf[:, qubo.quad_i] * xf[:, qubo.quad_j]) @ qubo.quad_value
    )


@dataclass(frozen=True)
class BinaryEncoding:
    domain_size: int

    def __post_init__(self):
        if self.domain_size < 2:
            raise InvalidArgumentError("domain_size must be >= 2")

    @property
    def width(self) -> int:
        return max(1, (self.domain_size - 1).bit_length())

    @property
    def bit_weights(self) -> np.ndarray:
        return 2 ** np.arange(self.width, dtype=np.int64)


def encode_label(k: int, enc: BinaryEncoding) -> np.ndarray:
    if not 0 <= k <= enc.domain_size - 1:
        raise InvalidArgumentError(f"label {k} outside [0, {enc.domain_size - 1}]")
    return ((int(k) >> np.arange(enc.width)) & 1).astype(np.int8)


@dataclass(frozen=True)
class VarLayout:
    """Variable ``pixel * bits + bit`` holds bit ``bit`` of pixel ``pixel``."""

    num_pixels: int
    bits: int

    @property
    def num_vars(self) -> int:
        return self.num_pixels * self.bits

    def var(self, pixel: int, bit: int) -> int:
        if not (0 <= pixel < self.num_pixels and 0 <= bit < self.bits):
            raise InvalidArgumentError(f"(pixel={pixel}, bit={bit}) out of range")
        return pixel * self.bits + bit

    def pixel_bit(self, var: int) -> tuple[int, int]:
        if not 0 <= var < self.num_vars:
            raise InvalidArgumentError(f"variable {var} out of range")
        return divmod(var, self.bits)


def encode_labels(labels, enc: BinaryEncoding) -> np.ndarray:
    """Bit-vector for a whole label grid under the standard layout."""
    k = labels.labels if isinstance(labels, LabelGrid) else np.asarray(labels)
    k = k.ravel().astype(np.int64)
    if k.size and (k.min() < 0 or k.max() > enc.domain_size - 1):
        raise InvalidArgumentError("labels outside the encoding domain")
    return ((k[:, None] >> np.arange(enc.width)) & 1).astype(np.int8).ravel()


def decode_bits(x, layout: VarLayout) -> np.ndarray:
    """Raw per-pixel integers, without clamping."""
    x = np.asarray(x)
    if x.shape != (layout.num_vars,):
        raise InvalidArgumentError(f"expected {layout.num_vars} bits, got shape {x.shape}")
    return x.reshape(layout.num_pixels, layout.bits).astype(np.int64) @ (
        2 ** np.arange(layout.bits, dtype=np.int64)
    )


def decode_solution(x, layout: VarLayout, enc: BinaryEncoding, shape=None):
    """Decode bits to a :class:`LabelGrid`; returns ``(grid, clamp_count)``.

    Codewords above ``D - 1`` (possible when D is not a power of two) are
    clamped and counted.
    """
    raw = decode_bits(x, layout)
    over = raw > enc.domain_size - 1
    clamped = int(over.sum())
    if clamped:
        warnings.warn(f"{clamped} decoded labels exceeded the domain and were clamped", stacklevel=2)
        raw = np.minimum(raw, enc.domain_size - 1)
    if shape is None:
        shape = (1, layout.num_pixels)
    return LabelGrid(raw.reshape(shape), enc.domain_size), clamped


def expand_quadratic_labels(
    num_nodes: int,
    enc: BinaryEncoding,
    pair_s,
    pair_t,
    pair_q2,
    pair_q1,
    pair_q0,
    node_q2,
    node_q1,
    node_q0,
) -> QuboProblem:
    """Binarize ``sum_e q2 d^2 + q1 d + q0`` (``d = k_t - k_s``) plus per-node
    ``q2 k^2 + q1 k + q0`` with ``k = sum_b 2^b x_b``.
    """
    d = enc.width
    w = enc.bit_weights.astype(np.float64)
    bit = np.arange(d)
    s = np.asarray(pair_s, dtype=np.int64)
    t = np.asarray(pair_t, dtype=np.int64)
    pq2, pq1 = np.asarray(pair_q2, float), np.asarray(pair_q1, float)
    nq2, nq1 = np.asarray(node_q2, float), np.asarray(node_q1, float)

    # d^2 = k_t^2 + k_s^2 - 2 k_t k_s, so every pair contributes q2 k^2 to both ends
    self_sq = np.bincount(s, weights=pq2, minlength=num_nodes) + np.bincount(
        t, weights=pq2, minlength=num_nodes
    ) + nq2
    self_lin = (
        np.bincount(t, weights=pq1, minlength=num_nodes)
        - np.bincount(s, weights=pq1, minlength=num_nodes)
        + nq1
    )

    nodes = np.arange(num_nodes, dtype=np.int64)
    # k^2 = sum_b w_b^2 x_b + 2 sum_{b<c} w_b w_c x_b x_c ; k = sum_b w_b x_b
    lin_index = (nodes[:, None] * d + bit).ravel()
    lin_value = (self_sq[:, None] * (w * w) + self_lin[:, None] * w).ravel()

    bb, cc = np.triu_indices(d, 1)
    self_qi = (nodes[:, None] * d + bb).ravel()
    self_qj = (nodes[:, None] * d + cc).ravel()
    self_qv = (self_sq[:, None] * (2.0 * w[bb] * w[cc])).ravel()

    # cross term -2 q2 k_t k_s over all bit pairs
    bt, bs = np.meshgrid(bit, bit, indexing="ij")
    bt, bs = bt.ravel(), bs.ravel()
    cross_qi = (t[:, None] * d + bt).ravel()
    cross_qj = (s[:, None] * d + bs).ravel()
    cross_qv = (-2.0 * pq2[:, None] * (w[bt] * w[bs])).ravel()

    offset = float(np.sum(pair_q0)) + float(np.sum(node_q0))
    return QuboProblem.from_arrays(
        num_nodes * d,
        lin_index,
        lin_value,
        np.concatenate([self_qi, cross_qi]),
        np.concatenate([self_qj, cross_qj]),
        np.concatenate([self_qv, cross_qv]),
        offset,
    )


def build_qubo(problem: UnwrapProblem) -> tuple[QuboProblem, VarLayout]:
    enc = BinaryEncoding(problem.domain_size)
    layout = VarLayout(problem.num_pixels, enc.width)
    a = problem.edge_a.astype(np.float64)
    W = problem.edge_w
    ua = problem.unary_a.astype(np.float64)
    uw = problem.unary_w
    # W (d - a)^2 = W d^2 - 2 W a d + W a^2 ;  w (k - a)^2 likewise
    qubo = expand_quadratic_labels(
        problem.num_pixels,
        enc,
        problem.edge_s,
        problem.edge_t,
        W,
        -2.0 * W * a,
        W * a * a,
        uw,
        -2.0 * uw * ua,
        uw * ua * ua,
    )
    return qubo, layout


def export_qubo_text(qubo: QuboProblem) -> str:
    lines = [f"offset {qubo.offset!r}"]
    lines += [f"lin {i} {v!r}" for i, v in zip(qubo.lin_index.tolist(), qubo.lin_value.tolist())]
    lines += [
        f"quad {i} {j} {v!r}"
        for i, j, v in zip(qubo.quad_i.tolist(), qubo.quad_j.tolist(), qubo.quad_value.tolist())
    ]
    return "\n".join(lines) + "\n"


def write_qubo_text(qubo: QuboProblem, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(export_qubo_text(qubo))


def parse_qubo_text(text: str, num_vars: int | None = None) -> QuboProblem:
    """Inverse of :func:`export_qubo_text`.

    The text format carries no variable count; it is inferred from the largest
    index unless ``num_vars`` is given.
    """
    offset = 0.0
    lin, quad = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "offset" and len(parts) == 2:
                offset = float(parts[1])
            elif parts[0] == "lin" and len(parts) == 3:
                lin.append((int(parts[1]), float(parts[2])))
            elif parts[0] == "quad" and len(parts) == 4:
                quad.append(((int(parts[1]), int(parts[2])), float(parts[3])))
            else:
                raise ValueError(line)
        except ValueError:
            raise InvalidArgumentError(f"malformed QUBO line {lineno}: {raw!r}") from None
    if num_vars is None:
        idx = [i for i, _ in lin] + [max(p) for p, _ in quad]
        num_vars = max(idx) + 1 if idx else 0
    return QuboProblem.from_terms(num_vars, lin, quad, offset)
