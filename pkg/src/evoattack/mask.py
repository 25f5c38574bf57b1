"""Binary saliency masks restricting which positions may be perturbed.

A mask maps between the reduced decision vector (length d) and full-image
coordinates.  Index order is row-major and channel-minor — i.e. the C order
of an (H, W, C) array — fixed so that subspace models always see variables
in the same order and runs stay reproducible.
"""

from __future__ import annotations

import numpy as np

from .core import EvoAttackError
from .imagefiles import PathLike, read_pgm


class UnusableMaskError(EvoAttackError):
    """Binarization produced an empty salient region (d = 0)."""


class MaskShapeError(EvoAttackError):
    """Mask dimensions do not match the target image."""


class AttentionMask:
    """Immutable inclusion map plus a dense index of the included positions."""

    def __init__(self, include: np.ndarray):
        include = np.asarray(include)
        if include.ndim != 3:
            raise ValueError(f"include map must be H x W x C, got shape {include.shape}")
        include = (include != 0).astype(np.uint8)
        include.setflags(write=False)
        self.include = include
        # np.argwhere walks the array in C order, so rows come out strictly
        # increasing in the row-major linearization.
        self.index = np.argwhere(include == 1)
        self.index.setflags(write=False)
        self.flat_index = np.flatnonzero(include.reshape(-1))
        self.flat_index.setflags(write=False)
        if self.d == 0:
            raise UnusableMaskError("mask includes no positions")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.include.shape  # type: ignore[return-value]

    @property
    def d(self) -> int:
        """Number of perturbable positions."""
        return int(self.flat_index.shape[0])


def binarize_map(salience: np.ndarray, threshold: float) -> AttentionMask:
    """Include every position whose salience strictly exceeds ``threshold``.

    With ``threshold=0`` this is exactly the zero/nonzero rule: positions with
    zero salience are excluded, everything else is kept.
    """
    salience = np.asarray(salience, dtype=np.float64)
    if salience.ndim == 2:
        salience = salience[:, :, None]
    if np.any(salience < 0):
        raise ValueError("salience map must be nonnegative")
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    include = salience > threshold
    if not include.any():
        raise UnusableMaskError(
            f"binarization at threshold {threshold} leaves no perturbable position"
        )
    return AttentionMask(include)


def full_mask(height: int, width: int, channels: int) -> AttentionMask:
    """Mask admitting every position (whole-image attack)."""
    return AttentionMask(np.ones((height, width, channels), dtype=np.uint8))


def load_mask(
    path: PathLike,
    height: int,
    width: int,
    channels: int,
    threshold: float = 0.2,
) -> AttentionMask:
    """Load a single-channel PGM saliency map and binarize it for an image.

    ``threshold`` is relative: the absolute cut is ``threshold * max(map)``,
    so 0.2 keeps positions above one fifth of the peak salience and 0 keeps
    every nonzero position.  The single-channel map is replicated across all
    ``channels`` of the target image (a salient pixel is perturbable in every
    channel).
    """
    gray = read_pgm(path)
    if gray.shape != (height, width):
        raise MaskShapeError(
            f"{path}: mask is {gray.shape[1]}x{gray.shape[0]} but image is {width}x{height}"
        )
    if not 0 <= threshold <= 1:
        raise ValueError(f"relative threshold must be in [0, 1], got {threshold}")
    gray = gray.astype(np.float64)
    cut = threshold * float(gray.max())
    replicated = np.repeat(gray[:, :, None], channels, axis=2)
    return binarize_map(replicated, cut)


def scatter(x: np.ndarray, mask: AttentionMask) -> np.ndarray:
    """Place the reduced vector into a full H x W x C array, zero elsewhere."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (mask.d,):
        raise ValueError(f"vector length {x.shape} does not match mask d={mask.d}")
    out = np.zeros(mask.include.size, dtype=np.float64)
    out[mask.flat_index] = x
    return out.reshape(mask.shape)


def gather(full: np.ndarray, mask: AttentionMask) -> np.ndarray:
    """Extract the masked-in positions of a full array, in index order."""
    full = np.asarray(full)
    if full.shape != mask.shape:
        raise ValueError(f"array shape {full.shape} does not match mask {mask.shape}")
    return full.reshape(-1)[mask.flat_index].astype(np.float64)
