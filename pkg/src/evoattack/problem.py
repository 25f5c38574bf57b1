"""The optimization problem: objective evaluation against a black-box oracle,
box-constraint repair, similarity metrics, and final adversarial-example
selection.

Pixels are integers, perturbations are reals; the image an oracle sees is
``round(u + x)`` clamped to [0, 255] at masked positions, so the search stays
continuous while oracle inputs stay valid images.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    Individual,
    ImageTensor,
    MetricReport,
    ObjectiveVector,
    SparseSolution,
    effective_perturbation,
)
from .mask import AttentionMask, gather
from .oracle import Oracle, OracleError


@dataclass
class AttackInstance:
    """One image under attack: sample, mask, true label, and oracle handle."""

    image: ImageTensor
    mask: AttentionMask
    true_label: int
    oracle: Oracle
    base: np.ndarray = field(init=False)   # masked-in pixel values u_i, float (d,)
    lower: np.ndarray = field(init=False)  # per-variable bound -u_i
    upper: np.ndarray = field(init=False)  # per-variable bound 255 - u_i

    def __post_init__(self):
        if self.mask.shape != self.image.shape:
            raise ValueError(
                f"mask shape {self.mask.shape} does not match image {self.image.shape}"
            )
        if self.image.shape != self.oracle.shape:
            raise ValueError(
                f"oracle expects shape {self.oracle.shape}, image is {self.image.shape}"
            )
        if not 0 <= self.true_label < self.oracle.class_count:
            raise ValueError(
                f"true label {self.true_label} outside oracle's {self.oracle.class_count} classes"
            )
        self.base = gather(self.image.pixels, self.mask)
        self.lower = -self.base
        self.upper = 255.0 - self.base

    @property
    def d(self) -> int:
        return self.mask.d


def repair(solution: SparseSolution, instance: AttackInstance) -> SparseSolution:
    """Clamp magnitudes into [-u_i, 255-u_i]; bits are left untouched.

    All entries are clamped, not just the gated ones, so a bit that flips on
    later inherits a feasible magnitude.  Idempotent.
    """
    if len(solution) != instance.d:
        raise ValueError(f"solution length {len(solution)} does not match d={instance.d}")
    values = np.clip(solution.values, instance.lower, instance.upper)
    return SparseSolution(solution.bits.copy(), values)


def apply_perturbation(instance: AttackInstance, solution: SparseSolution) -> ImageTensor:
    """Perturbed image: round(u + x) clamped to [0, 255] at masked positions."""
    x = effective_perturbation(solution)
    perturbed = instance.base + x
    quantized = np.clip(np.rint(perturbed), 0, 255).astype(np.uint8)
    flat = instance.image.pixels.reshape(-1).copy()
    flat[instance.mask.flat_index] = quantized
    return ImageTensor(flat.reshape(instance.image.shape))


def evaluate(
    instance: AttackInstance,
    solution: SparseSolution,
    validate: bool = True,
) -> tuple[ObjectiveVector, np.ndarray]:
    """One oracle query; returns the objective pair and the full probability
    vector so callers can derive metrics without querying again.
    """
    image = apply_perturbation(instance, solution)
    if validate:
        _assert_feasible(instance, solution, image)
    try:
        probs = instance.oracle.classify(image)
    except OracleError as exc:
        total, _ = instance.oracle.query_stats()
        exc.args = (f"{exc.args[0]} (after {total} oracle queries)",) + exc.args[1:]
        raise
    x = effective_perturbation(solution)
    objectives = ObjectiveVector(
        confidence=float(probs[instance.true_label]),
        distortion=float(np.linalg.norm(x)),
    )
    return objectives, probs


def _assert_feasible(
    instance: AttackInstance, solution: SparseSolution, image: ImageTensor
) -> None:
    # Perturbed pixels stay in [0, 255] by dtype; check mask invariance: every
    # position outside the mask is bit-identical to the original.
    outside = instance.mask.include.reshape(-1) == 0
    if not np.array_equal(
        image.pixels.reshape(-1)[outside], instance.image.pixels.reshape(-1)[outside]
    ):
        raise AssertionError("perturbation leaked outside the attention mask")
    x = effective_perturbation(solution)
    perturbed = instance.base + x
    if np.any(perturbed < -1e-9) or np.any(perturbed > 255.0 + 1e-9):
        raise AssertionError("effective perturbation violates the pixel box constraint")


def compute_metrics(
    solution: SparseSolution, probs: np.ndarray, true_label: int
) -> MetricReport:
    """Norm metrics over the effective perturbation plus the oracle verdict,
    reusing the evaluation query's probability vector (no extra query)."""
    x = effective_perturbation(solution)
    predicted = int(np.argmax(probs))
    return MetricReport(
        l0=int(np.count_nonzero(x)),
        l1=float(np.abs(x).sum()),
        l2=float(np.linalg.norm(x)),
        misclassified=predicted != true_label,
        predicted_label=predicted,
    )


def select_final_ae(
    individuals: Sequence[Individual], norm: str = "l1"
) -> Optional[int]:
    """Pick the misclassifying individual with the smallest perturbation norm.

    ``norm`` selects the primary criterion (l1 by default); ties break on the
    other norm, then on the lowest index.  Returns the index into
    ``individuals``, or None when nothing misclassifies.
    """
    if norm not in ("l1", "l2"):
        raise ValueError(f"unknown selection norm {norm!r}")
    best: Optional[int] = None
    best_key: Optional[tuple[float, float]] = None
    for i, ind in enumerate(individuals):
        m = ind.metrics
        if m is None:
            raise ValueError("select_final_ae needs evaluated individuals with metrics")
        if not m.misclassified:
            continue
        key = (m.l1, m.l2) if norm == "l1" else (m.l2, m.l1)
        if best_key is None or key < best_key:
            best, best_key = i, key
    return best
