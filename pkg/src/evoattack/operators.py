"""Real- and binary-coded variation operators.

All operators draw a fixed number of random values per call (independent of
which variables end up changing), which keeps RNG streams aligned between
runs that share a seed but differ elsewhere.
"""

from __future__ import annotations

import numpy as np

_EPS = 1e-14


def sbx(
    p1: np.ndarray,
    p2: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    eta: float = 20.0,
    pc: float = 1.0,
    rng: np.random.Generator = None,  # type: ignore[assignment]
) -> tuple[np.ndarray, np.ndarray]:
    """Simulated binary crossover with distribution index ``eta``.

    Each variable takes part with probability 0.5; participating variables
    mix with spread factor beta derived from a uniform draw (beta = 1, i.e.
    children = parents, at u = 0.5).  Children are clipped to the bounds.
    With probability 1 - pc the whole pair is copied unchanged.
    """
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    if p1.shape != p2.shape:
        raise ValueError("parents must have equal length")
    c1, c2 = p1.copy(), p2.copy()
    if rng.random() >= pc:
        return c1, c2
    d = p1.shape[0]
    take = rng.random(d) < 0.5
    u = rng.random(d)
    beta = np.where(
        u <= 0.5,
        (2.0 * u) ** (1.0 / (eta + 1.0)),
        (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0)),
    )
    mix = take & (np.abs(p1 - p2) > _EPS)
    c1 = np.where(mix, 0.5 * ((1 + beta) * p1 + (1 - beta) * p2), c1)
    c2 = np.where(mix, 0.5 * ((1 - beta) * p1 + (1 + beta) * p2), c2)
    return np.clip(c1, lower, upper), np.clip(c2, lower, upper)


def poly_mutation(
    x: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    eta: float = 20.0,
    pm: float = 0.0,
    rng: np.random.Generator = None,  # type: ignore[assignment]
) -> np.ndarray:
    """Polynomial mutation with distribution index ``eta``.

    Each variable mutates independently with probability ``pm``; the
    perturbation is bounded, so a variable sitting on a bound only moves
    inward.  Variables with a degenerate interval (lower == upper) never
    move.
    """
    x = np.asarray(x, dtype=np.float64)
    lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), x.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=np.float64), x.shape)
    x = np.clip(x, lower, upper)  # keep the delta formula's bases nonnegative
    take = rng.random(x.shape[0]) < pm
    u = rng.random(x.shape[0])
    width = upper - lower
    active = take & (width > 0)
    if not active.any():
        return x.copy()
    safe_width = np.where(width > 0, width, 1.0)
    d1 = (x - lower) / safe_width
    d2 = (upper - x) / safe_width
    exp = 1.0 / (eta + 1.0)
    low_side = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)
    high_side = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)
    delta = np.where(u < 0.5, low_side**exp - 1.0, 1.0 - high_side**exp)
    out = np.where(active, x + delta * width, x)
    return np.clip(out, lower, upper)


def uniform_crossover_bits(
    b1: np.ndarray, b2: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Exchange each position between the parents with probability 0.5."""
    b1 = np.asarray(b1, dtype=np.uint8)
    b2 = np.asarray(b2, dtype=np.uint8)
    if b1.shape != b2.shape:
        raise ValueError("parents must have equal length")
    swap = rng.random(b1.shape[0]) < 0.5
    c1 = np.where(swap, b2, b1).astype(np.uint8)
    c2 = np.where(swap, b1, b2).astype(np.uint8)
    return c1, c2


def bitflip(bits: np.ndarray, pm: float, rng: np.random.Generator) -> np.ndarray:
    """Flip each bit independently with probability ``pm``."""
    bits = np.asarray(bits, dtype=np.uint8)
    flip = rng.random(bits.shape[0]) < pm
    return np.where(flip, 1 - bits, bits).astype(np.uint8)
