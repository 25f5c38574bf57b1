"""PNG and PGM file handling.

PNG goes through Pillow (lossless, so tensor -> file -> tensor round-trips
bit-identically).  PGM is parsed by hand because the mask contract is strict:
binary graymap only (magic ``P5``), 8-bit, maxval 255.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from .core import EvoAttackError, ImageTensor

PathLike = Union[str, Path]


class ImageFileError(EvoAttackError):
    """Malformed or unsupported image file."""


def read_png(path: PathLike) -> ImageTensor:
    """Load an 8-bit grayscale or RGB PNG."""
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "L":
                arr = np.asarray(im, dtype=np.uint8)[:, :, None]
            elif mode == "RGB":
                arr = np.asarray(im, dtype=np.uint8)
            else:
                raise ImageFileError(
                    f"{path}: unsupported PNG mode {mode!r} (need L or RGB)"
                )
    except ImageFileError:
        raise
    except Exception as exc:
        raise ImageFileError(f"{path}: cannot read PNG ({exc})") from exc
    return ImageTensor(arr)


def write_png(image: ImageTensor, path: PathLike) -> None:
    arr = image.pixels
    if image.channels == 1:
        Image.fromarray(arr[:, :, 0], mode="L").save(path, format="PNG")
    else:
        Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def png_bytes(image: ImageTensor) -> bytes:
    buf = io.BytesIO()
    arr = image.pixels
    if image.channels == 1:
        Image.fromarray(arr[:, :, 0], mode="L").save(buf, format="PNG")
    else:
        Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def png_from_bytes(data: bytes) -> ImageTensor:
    buf = io.BytesIO(data)
    try:
        with Image.open(buf) as im:
            im.load()
            if im.mode == "L":
                arr = np.asarray(im, dtype=np.uint8)[:, :, None]
            elif im.mode == "RGB":
                arr = np.asarray(im, dtype=np.uint8)
            else:
                raise ImageFileError(f"unsupported PNG mode {im.mode!r} (need L or RGB)")
    except ImageFileError:
        raise
    except Exception as exc:
        raise ImageFileError(f"cannot decode PNG payload ({exc})") from exc
    return ImageTensor(arr)


def _next_pgm_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # Tokens are separated by whitespace; '#' starts a comment through end of line.
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c in b" \t\r\n":
            pos += 1
        elif c == b"#":
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos : pos + 1] not in b" \t\r\n":
        pos += 1
    if start == pos:
        raise ImageFileError("truncated PGM header")
    return data[start:pos], pos


def parse_pgm(data: bytes) -> np.ndarray:
    """Parse a binary (P5) 8-bit PGM into an (H, W) uint8 array."""
    if not data.startswith(b"P5"):
        raise ImageFileError("not a binary PGM (magic must be P5)")
    pos = 2
    try:
        width_tok, pos = _next_pgm_token(data, pos)
        height_tok, pos = _next_pgm_token(data, pos)
        maxval_tok, pos = _next_pgm_token(data, pos)
        width, height, maxval = int(width_tok), int(height_tok), int(maxval_tok)
    except ValueError as exc:
        raise ImageFileError(f"bad PGM header: {exc}") from exc
    if width <= 0 or height <= 0:
        raise ImageFileError(f"bad PGM dimensions {width}x{height}")
    if maxval != 255:
        raise ImageFileError(f"PGM maxval must be 255, got {maxval}")
    # Exactly one whitespace byte separates the header from the raster.
    pos += 1
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise ImageFileError(
            f"PGM raster truncated: expected {width * height} bytes, got {len(raster)}"
        )
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def read_pgm(path: PathLike) -> np.ndarray:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ImageFileError(f"{path}: cannot read ({exc})") from exc
    try:
        return parse_pgm(data)
    except ImageFileError as exc:
        raise ImageFileError(f"{path}: {exc}") from exc


def pgm_bytes(gray: np.ndarray) -> bytes:
    arr = np.asarray(gray)
    if arr.ndim != 2:
        raise ValueError(f"PGM payload must be 2-D, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if np.any(arr < 0) or np.any(arr > 255):
            raise ValueError("PGM values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    height, width = arr.shape
    return b"P5\n%d %d\n255\n" % (width, height) + arr.tobytes()


def write_pgm(gray: np.ndarray, path: PathLike) -> None:
    Path(path).write_bytes(pgm_bytes(gray))
