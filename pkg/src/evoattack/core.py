"""Shared domain types and the deterministic RNG contract.

All stochastic behaviour in the toolkit flows from a single 64-bit seed
through named, independently derived streams (see :class:`RngStreams`), so a
run is reproducible given its seed and a deterministic oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

Provenance = Literal["initial", "genetic", "model-based"]


class EvoAttackError(Exception):
    """Base class for toolkit errors."""


@dataclass
class ImageTensor:
    """H x W x C grid of 8-bit pixel values.

    ``pixels`` is a (H, W, C) uint8 array; row-major flattening is the
    canonical linearization used everywhere (masks, weight files, wire
    protocol).
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"image must be H x W x C, got shape {arr.shape}")
        if arr.shape[2] not in (1, 3):
            raise ValueError(f"channel count must be 1 or 3, got {arr.shape[2]}")
        if arr.dtype != np.uint8:
            if np.any(arr < 0) or np.any(arr > 255):
                raise ValueError("pixel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        self.pixels = arr

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.pixels.shape  # type: ignore[return-value]

    def flat(self) -> np.ndarray:
        """Row-major (channel-minor) flattening, length H*W*C."""
        return self.pixels.reshape(-1)

    def copy(self) -> "ImageTensor":
        return ImageTensor(self.pixels.copy())


@dataclass
class SparseSolution:
    """Hybrid-coded candidate perturbation over the d masked-in positions.

    ``bits`` gates which positions carry a perturbation, ``values`` holds the
    per-position magnitude (pixel-intensity delta).  The effective
    perturbation is the element-wise product.
    """

    bits: np.ndarray    # (d,) uint8 in {0, 1}
    values: np.ndarray  # (d,) float64

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.bits.shape != self.values.shape:
            raise ValueError(
                f"bit/value length mismatch: {self.bits.shape} vs {self.values.shape}"
            )
        if self.bits.ndim != 1:
            raise ValueError("solution vectors must be one-dimensional")
        if np.any((self.bits != 0) & (self.bits != 1)):
            raise ValueError("bits must be 0 or 1")

    def __len__(self) -> int:
        return self.bits.shape[0]

    def copy(self) -> "SparseSolution":
        return SparseSolution(self.bits.copy(), self.values.copy())


def effective_perturbation(solution: SparseSolution) -> np.ndarray:
    """Element-wise product of the bit gate and the magnitude vector."""
    return solution.bits.astype(np.float64) * solution.values


@dataclass(frozen=True)
class ObjectiveVector:
    """Both objectives are minimized."""

    confidence: float  # oracle probability of the true class, in [0, 1]
    distortion: float  # l2 norm of the effective perturbation, >= 0

    def as_array(self) -> np.ndarray:
        return np.array([self.confidence, self.distortion], dtype=np.float64)


@dataclass
class MetricReport:
    """Similarity metrics of an evaluated solution plus its oracle verdict."""

    l0: int
    l1: float
    l2: float
    misclassified: bool
    predicted_label: int


@dataclass
class Individual:
    """A solution together with its evaluation record."""

    solution: SparseSolution
    provenance: Provenance
    objectives: Optional[ObjectiveVector] = None
    probs: Optional[np.ndarray] = None  # cached oracle output of the evaluation query
    metrics: Optional[MetricReport] = None


# Stream order is part of the reproducibility contract: changing it changes
# every seeded run.
_STREAM_NAMES = ("init", "mating", "route", "genetic", "model", "reduced")


@dataclass
class RngStreams:
    """Named PCG64 streams derived from one root seed.

    ``init``     population initialization
    ``mating``   tournament index draws
    ``route``    per-pair choice between genetic and model-based variation
    ``genetic``  SBX / polynomial mutation / bit operators in the original space
    ``model``    subspace-model weight init and training noise
    ``reduced``  variation operators applied in the reduced space

    Keeping the streams separate lets structurally different runs (e.g. with
    and without subspace models) consume identical draws on the paths they
    share.
    """

    seed: int
    init: np.random.Generator = field(repr=False, default=None)  # type: ignore[assignment]
    mating: np.random.Generator = field(repr=False, default=None)  # type: ignore[assignment]
    route: np.random.Generator = field(repr=False, default=None)  # type: ignore[assignment]
    genetic: np.random.Generator = field(repr=False, default=None)  # type: ignore[assignment]
    model: np.random.Generator = field(repr=False, default=None)  # type: ignore[assignment]
    reduced: np.random.Generator = field(repr=False, default=None)  # type: ignore[assignment]

    @classmethod
    def from_seed(cls, seed: int) -> "RngStreams":
        children = np.random.SeedSequence(seed).spawn(len(_STREAM_NAMES))
        gens = {
            name: np.random.Generator(np.random.PCG64(ss))
            for name, ss in zip(_STREAM_NAMES, children)
        }
        return cls(seed=seed, **gens)
