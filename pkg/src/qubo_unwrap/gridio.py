"""Binary grid formats (FPG1 phase, LBG1 labels), PGM previews and CSV import.

Both binary formats are little-endian::

    FPG1: b"FPG1" | u32 width | u32 height | u8 kind (0 wrapped, 1 unwrapped) | f32 payload
    LBG1: b"LBG1" | u32 width | u32 height | u32 domain_size                   | i32 payload

Payloads are row-major. Phases are stored as binary32, so writing a float64
grid quantises it; wrapped values are kept inside (-pi, pi] after rounding.
"""

from __future__ import annotations

import csv
import math
import struct
from pathlib import Path

import numpy as np

from .errors import GridFormatError
from .phase import LabelGrid, PhaseGrid, PhaseKind

PHASE_MAGIC = b"FPG1"
LABEL_MAGIC = b"LBG1"
_PHASE_HEADER = struct.Struct("<4sIIB")
_LABEL_HEADER = struct.Struct("<4sIII")
MAX_PAYLOAD_BYTES = 2**31

_F32_PI_BELOW = np.nextafter(np.float32(math.pi), np.float32(0))


def quantize_phase(values: np.ndarray, kind: PhaseKind) -> np.ndarray:
    """float32 image of ``values`` as it will be stored on disk."""
    q = np.asarray(values, dtype=np.float64).astype("<f4")
    if kind is PhaseKind.WRAPPED:
        # float32(pi) rounds above pi; pull boundary values back inside the range
        # compare in float64: against a float32 array, math.pi would be demoted
        wide = q.astype(np.float64)
        q = np.where(wide > math.pi, _F32_PI_BELOW, q)
        q = np.where(wide <= -math.pi, -_F32_PI_BELOW, q).astype("<f4")
    return q


def phase_bytes(grid: PhaseGrid) -> bytes:
    header = _PHASE_HEADER.pack(PHASE_MAGIC, grid.width, grid.height, grid.kind.value)
    return header + quantize_phase(grid.values, grid.kind).tobytes()


def label_bytes(grid: LabelGrid) -> bytes:
    header = _LABEL_HEADER.pack(LABEL_MAGIC, grid.width, grid.height, grid.domain_size)
    return header + grid.labels.astype("<i4").tobytes()


def write_phase(grid: PhaseGrid, path) -> None:
    Path(path).write_bytes(phase_bytes(grid))


def write_labels(grid: LabelGrid, path) -> None:
    Path(path).write_bytes(label_bytes(grid))


def _check_payload(data: bytes, header_size: int, width: int, height: int, elem: int):
    expected = width * height * elem
    if expected > MAX_PAYLOAD_BYTES:
        raise GridFormatError(f"declared payload of {expected} bytes exceeds the cap", 4)
    actual = len(data) - header_size
    if actual != expected:
        raise GridFormatError(
            f"payload length mismatch: expected {expected} bytes, found {actual}", header_size
        )


def parse_phase(data: bytes) -> PhaseGrid:
    if len(data) < _PHASE_HEADER.size:
        raise GridFormatError(
            f"truncated header: expected {_PHASE_HEADER.size} bytes, found {len(data)}", len(data)
        )
    magic, width, height, kind = _PHASE_HEADER.unpack_from(data)
    if magic != PHASE_MAGIC:
        raise GridFormatError(f"bad magic {magic!r}, expected {PHASE_MAGIC!r}", 0)
    if kind not in (0, 1):
        raise GridFormatError(f"unknown phase kind byte {kind}", 12)
    _check_payload(data, _PHASE_HEADER.size, width, height, 4)
    values = np.frombuffer(data, dtype="<f4", offset=_PHASE_HEADER.size).reshape(height, width)
    if not np.all(np.isfinite(values)):
        bad = int(np.argmax(~np.isfinite(values.ravel())))
        raise GridFormatError("non-finite phase value", _PHASE_HEADER.size + 4 * bad)
    pk = PhaseKind(kind)
    if pk is PhaseKind.WRAPPED:
        flat = values.ravel().astype(np.float64)
        out = (flat <= -math.pi) | (flat > math.pi)
        if out.any():
            bad = int(np.argmax(out))
            raise GridFormatError(
                f"wrapped value {flat[bad]!r} outside (-pi, pi]", _PHASE_HEADER.size + 4 * bad
            )
    return PhaseGrid(values.astype(np.float64), pk)


def parse_labels(data: bytes) -> LabelGrid:
    if len(data) < _LABEL_HEADER.size:
        raise GridFormatError(
            f"truncated header: expected {_LABEL_HEADER.size} bytes, found {len(data)}", len(data)
        )
    magic, width, height, domain = _LABEL_HEADER.unpack_from(data)
    if magic != LABEL_MAGIC:
        raise GridFormatError(f"bad magic {magic!r}, expected {LABEL_MAGIC!r}", 0)
    if domain < 1:
        raise GridFormatError("domain_size must be >= 1", 12)
    _check_payload(data, _LABEL_HEADER.size, width, height, 4)
    labels = np.frombuffer(data, dtype="<i4", offset=_LABEL_HEADER.size).reshape(height, width)
    out = (labels < 0) | (labels > domain - 1)
    if out.any():
        bad = int(np.argmax(out.ravel()))
        raise GridFormatError(
            f"label {labels.ravel()[bad]} outside [0, {domain - 1}]", _LABEL_HEADER.size + 4 * bad
        )
    return LabelGrid(labels.astype(np.int64), int(domain))


def read_phase(path) -> PhaseGrid:
    return parse_phase(Path(path).read_bytes())


def read_labels(path) -> LabelGrid:
    return parse_labels(Path(path).read_bytes())


def pgm_bytes(grid: PhaseGrid) -> bytes:
    """8-bit binary PGM. Wrapped grids use the fixed range (-pi, pi]; others
    their own [min, max]; a constant grid renders as mid-grey."""
    v = grid.values
    if grid.kind is PhaseKind.WRAPPED:
        lo, hi = -math.pi, math.pi
    else:
        lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        img = np.clip(np.round((v - lo) / (hi - lo) * 255.0), 0, 255).astype(np.uint8)
    else:
        img = np.full(v.shape, 128, dtype=np.uint8)
    return f"P5 {grid.width} {grid.height} 255\n".encode("ascii") + img.tobytes()


def export_pgm(grid: PhaseGrid, path) -> None:
    Path(path).write_bytes(pgm_bytes(grid))


def import_csv(path) -> PhaseGrid:
    """Rectangular numeric CSV; tagged wrapped if every value lies in (-pi, pi]."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for r, row in enumerate(csv.reader(fh), 1):
            if not row or all(not cell.strip() for cell in row):
                continue
            vals = []
            for c, cell in enumerate(row, 1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise GridFormatError(f"row {r}, column {c}: not a number: {cell!r}") from None
            if rows and len(vals) != len(rows[0]):
                raise GridFormatError(
                    f"row {r}: expected {len(rows[0])} columns, found {len(vals)}"
                )
            rows.append(vals)
    if not rows:
        raise GridFormatError("CSV contains no data")
    values = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise GridFormatError("CSV contains non-finite values")
    wrapped = bool(np.all((values > -math.pi) & (values <= math.pi)))
    return PhaseGrid(values, PhaseKind.WRAPPED if wrapped else PhaseKind.UNWRAPPED)
