"""Synthetic interferograms: Perlin-noise truth surfaces, wrapping, phase noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GenerationFailedError, InvalidArgumentError
from .phase import TWO_PI, LabelGrid, PhaseGrid, PhaseKind, wrap

PERM_STREAM = 0
OFFSET_STREAM = 1
NOISE_STREAM = 2
MAX_FREQUENCY_REDUCTIONS = 10

# eight gradient directions at 45 degree steps
_GRADIENTS = np.array(
    [(math.cos(k * math.pi / 4), math.sin(k * math.pi / 4)) for k in range(8)]
)


@dataclass(frozen=True)
class SynthSpec:
    width: int = 400
    height: int = 400
    seed: int = 0
    perlin_octaves: int = 4
    perlin_base_frequency: float = 2.0
    max_ambiguity: int = 4
    snr_db: float | None = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.width * self.height < 2:
            raise InvalidArgumentError("grid must contain at least two pixels")
        if self.max_ambiguity < 1:
            raise InvalidArgumentError("max_ambiguity must be >= 1")
        if self.perlin_octaves < 0:
            raise InvalidArgumentError("perlin_octaves must be >= 0")
        if self.perlin_base_frequency <= 0:
            raise InvalidArgumentError("perlin_base_frequency must be positive")
        if self.snr_db is not None and not math.isfinite(self.snr_db):
            raise InvalidArgumentError("snr_db must be finite")


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), stream])))


def _fade(t):
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def _noise(x, y, perm):
    xi = np.floor(x).astype(np.int64)
    yi = np.floor(y).astype(np.int64)
    xf, yf = x - xi, y - yi
    xi &= 255
    yi &= 255

    def corner(dx, dy):
        h = perm[perm[(xi + dx) & 255] + ((yi + dy) & 255)] & 7
        g = _GRADIENTS[h]
        return g[..., 0] * (xf - dx) + g[..., 1] * (yf - dy)

    u, v = _fade(xf), _fade(yf)
    bottom = corner(0, 0) + u * (corner(1, 0) - corner(0, 0))
    top = corner(0, 1) + u * (corner(1, 1) - corner(0, 1))
    return bottom + v * (top - bottom)


def perlin_field(width, height, seed, octaves=4, base_frequency=2.0) -> np.ndarray:
    """Fractal gradient noise; octave ``o`` has frequency ``base * 2**o`` cycles
    per image side and amplitude ``2**-o``. ``octaves=0`` yields the plane
    ``row + col`` (a constant-gradient field)."""
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    if octaves == 0:
        return rows + cols
    perm = _rng(seed, PERM_STREAM).permutation(256)
    perm = np.concatenate([perm, perm])
    shifts = _rng(seed, OFFSET_STREAM).uniform(0.0, 256.0, size=(octaves, 2))
    out = np.zeros((height, width))
    for o in range(octaves):
        freq = base_frequency * 2.0**o
        x = cols / width * freq + shifts[o, 0]
        y = rows / height * freq + shifts[o, 1]
        out += _noise(x, y, perm) * 0.5**o
    return out


def _max_neighbour_step(grid: np.ndarray) -> float:
    steps = [0.0]
    if grid.shape[1] > 1:
        steps.append(np.abs(np.diff(grid, axis=1)).max())
    if grid.shape[0] > 1:
        steps.append(np.abs(np.diff(grid, axis=0)).max())
    return float(max(steps))


def generate_truth(spec: SynthSpec) -> PhaseGrid:
    """Unwrapped surface spanning exactly ``[0, 2 pi M]`` with all neighbour
    steps below pi. The base frequency is halved until that holds."""
    span = TWO_PI * spec.max_ambiguity
    freq = spec.perlin_base_frequency
    for _ in range(MAX_FREQUENCY_REDUCTIONS + 1):
        field = perlin_field(spec.width, spec.height, spec.seed, spec.perlin_octaves, freq)
        lo, hi = field.min(), field.max()
        if hi > lo:
            truth = (field - lo) / (hi - lo) * span
            truth[np.unravel_index(np.argmax(field), field.shape)] = span
            truth[np.unravel_index(np.argmin(field), field.shape)] = 0.0
            labels = _labels_from(truth, wrap(truth))
            covered = np.isin(np.arange(spec.max_ambiguity), labels).all()
            if _max_neighbour_step(truth) < math.pi and covered:
                return PhaseGrid(truth, PhaseKind.UNWRAPPED)
        freq /= 2.0
    raise GenerationFailedError(
        f"could not generate a surface with neighbour steps < pi for {spec}"
    )


def _labels_from(truth, wrapped) -> np.ndarray:
    return np.round((truth - wrapped) / TWO_PI).astype(np.int64)


def wrap_grid(truth: PhaseGrid, domain_size: int | None = None) -> tuple[PhaseGrid, LabelGrid]:
    """Wrapped phase and the labels ``k`` with ``truth = wrapped + 2 pi k``."""
    if truth.kind is not PhaseKind.UNWRAPPED:
        raise InvalidArgumentError("wrap_grid needs an unwrapped grid")
    wrapped = wrap(truth.values)
    labels = _labels_from(truth.values, wrapped)
    if labels.min() < 0:
        raise InvalidArgumentError("truth surface must be nonnegative")
    domain = domain_size or int(labels.max()) + 1
    return PhaseGrid(wrapped, PhaseKind.WRAPPED), LabelGrid(labels, max(domain, 2))


def add_noise(wrapped: PhaseGrid, snr_db: float, seed: int) -> PhaseGrid:
    """Add circular complex Gaussian noise to the unit phasor of every pixel.

    Per-component variance is ``10**(-snr_db/10) / 2`` so that the ratio of
    signal power (1) to complex noise power is ``snr_db``.
    """
    if wrapped.kind is not PhaseKind.WRAPPED:
        raise InvalidArgumentError("add_noise needs a wrapped grid")
    sigma = math.sqrt(10.0 ** (-snr_db / 10.0) / 2.0)
    rng = _rng(seed, NOISE_STREAM)
    noise = rng.standard_normal((2,) + wrapped.shape) * sigma
    z = np.exp(1j * wrapped.values) + (noise[0] + 1j * noise[1])
    return PhaseGrid(wrap(np.angle(z)), PhaseKind.WRAPPED)


@dataclass(frozen=True, eq=False)
class Instance:
    truth: PhaseGrid
    wrapped: PhaseGrid
    labels: LabelGrid


def generate_instance(spec: SynthSpec) -> Instance:
    """Truth, (noisy) wrapped phase and reference labels.

    With noise, reference labels are those that bring the noisy wrapped phase
    closest to the truth, clipped to ``[0, M]``.
    """
    truth = generate_truth(spec)
    domain = spec.max_ambiguity + 1
    wrapped, labels = wrap_grid(truth, domain)
    if spec.snr_db is not None:
        wrapped = add_noise(wrapped, spec.snr_db, spec.seed)
        k = np.clip(_labels_from(truth.values, wrapped.values), 0, spec.max_ambiguity)
        labels = LabelGrid(k, domain)
    return Instance(truth, wrapped, labels)
