"""Learned low-dimensional subspace for the sparse search.

Each generation the nondominated solutions are collected and two shallow
models are retrained from scratch on them: a restricted Boltzmann machine
over the bit vectors (one-step contrastive divergence) and a denoising
autoencoder over the magnitude vectors (full-batch gradient descent on
squared reconstruction error).  Variation can then run in the K-dimensional
code space and map back.

Inference is fully deterministic: hidden/visible activations are thresholded
strictly above 0.5 instead of sampled (0.5 itself maps to 0), and the
encoder/decoder are plain function evaluations.  Sampling only happens inside
contrastive divergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit as _sigmoid

from .core import SparseSolution

K_MAX = 50
_RHO_EPS = 1e-6


@dataclass
class PslHyper:
    """Training hyperparameters; the sets are tiny so full-batch is fine."""

    epochs: int = 10
    rbm_lr: float = 0.1
    dae_lr: float = 0.05
    noise_rate: float = 0.1


@dataclass
class PslParams:
    rho: float  # probability of model-based variation, in [0.1, 0.9]
    k: int      # hidden size, 1 <= k <= K_MAX


@dataclass
class SurvivalStats:
    """Offspring bookkeeping for one environmental selection."""

    genetic_made: int = 0
    genetic_survived: int = 0
    model_made: int = 0
    model_survived: int = 0


class BinarySubspaceModel:
    """RBM with d visible and K hidden units, trained by CD-1."""

    def __init__(self, weights: np.ndarray, visible_bias: np.ndarray, hidden_bias: np.ndarray):
        self.weights = weights          # (d, K)
        self.visible_bias = visible_bias  # (d,)
        self.hidden_bias = hidden_bias    # (K,)

    @property
    def d(self) -> int:
        return self.weights.shape[0]

    @property
    def k(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def train(
        cls,
        data: np.ndarray,  # (n, d) in {0, 1}
        k: int,
        hyper: PslHyper,
        rng: np.random.Generator,
    ) -> "BinarySubspaceModel":
        data = np.asarray(data, dtype=np.float64)
        n, d = data.shape
        if k > d:
            raise ValueError(f"hidden size {k} exceeds visible size {d}")
        w = rng.normal(0.0, 0.1, size=(d, k))
        vb = np.zeros(d)
        hb = np.zeros(k)
        for _ in range(hyper.epochs):
            h0p = _sigmoid(data @ w + hb)
            h0s = (rng.random(h0p.shape) < h0p).astype(np.float64)
            v1p = _sigmoid(h0s @ w.T + vb)
            v1s = (rng.random(v1p.shape) < v1p).astype(np.float64)
            h1p = _sigmoid(v1s @ w + hb)
            w += hyper.rbm_lr * (data.T @ h0p - v1s.T @ h1p) / n
            vb += hyper.rbm_lr * (data - v1s).mean(axis=0)
            hb += hyper.rbm_lr * (h0p - h1p).mean(axis=0)
        return cls(w, vb, hb)

    def encode(self, bits: np.ndarray) -> np.ndarray:
        act = _sigmoid(bits.astype(np.float64) @ self.weights + self.hidden_bias)
        return (act > 0.5).astype(np.uint8)

    def decode(self, hidden: np.ndarray) -> np.ndarray:
        act = _sigmoid(hidden.astype(np.float64) @ self.weights.T + self.visible_bias)
        return (act > 0.5).astype(np.uint8)


class RealSubspaceModel:
    """Single-hidden-layer denoising autoencoder with sigmoid units.

    Inputs are min-max normalized per variable over the fixed bounds
    [lower_i, upper_i] (known exactly from the pixel box constraint), so the
    normalization never drifts with the training set.
    """

    def __init__(
        self,
        encode_weights: np.ndarray,  # (d, K)
        decode_weights: np.ndarray,  # (K, d)
        encode_bias: np.ndarray,
        decode_bias: np.ndarray,
        lower: np.ndarray,
        upper: np.ndarray,
        loss_history: list[float],
    ):
        self.encode_weights = encode_weights
        self.decode_weights = decode_weights
        self.encode_bias = encode_bias
        self.decode_bias = decode_bias
        self.lower = lower
        self.upper = upper
        self.loss_history = loss_history

    @property
    def d(self) -> int:
        return self.encode_weights.shape[0]

    @property
    def k(self) -> int:
        return self.encode_weights.shape[1]

    def normalize(self, values: np.ndarray) -> np.ndarray:
        width = self.upper - self.lower
        safe = np.where(width > 0, width, 1.0)
        z = (values - self.lower) / safe
        return np.where(width > 0, z, 0.0)

    def denormalize(self, z: np.ndarray) -> np.ndarray:
        return self.lower + z * (self.upper - self.lower)

    @classmethod
    def train(
        cls,
        data: np.ndarray,  # (n, d) raw magnitudes
        k: int,
        lower: np.ndarray,
        upper: np.ndarray,
        hyper: PslHyper,
        rng: np.random.Generator,
    ) -> "RealSubspaceModel":
        data = np.asarray(data, dtype=np.float64)
        n, d = data.shape
        if k > d:
            raise ValueError(f"hidden size {k} exceeds input size {d}")
        we = rng.normal(0.0, 0.1, size=(d, k))
        wd = rng.normal(0.0, 0.1, size=(k, d))
        be = np.zeros(k)
        bd = np.zeros(d)
        model = cls(we, wd, be, bd, lower, upper, [])
        z = model.normalize(data)
        for _ in range(hyper.epochs):
            keep = rng.random(z.shape) >= hyper.noise_rate
            z_noisy = z * keep
            h = _sigmoid(z_noisy @ we + be)
            y = _sigmoid(h @ wd + bd)
            err = y - z
            model.loss_history.append(float((err**2).sum(axis=1).mean()))
            dy = (2.0 / n) * err * y * (1.0 - y)
            dh = (dy @ wd.T) * h * (1.0 - h)
            wd -= hyper.dae_lr * (h.T @ dy)
            bd -= hyper.dae_lr * dy.sum(axis=0)
            we -= hyper.dae_lr * (z_noisy.T @ dh)
            be -= hyper.dae_lr * dh.sum(axis=0)
        return model

    def encode(self, values: np.ndarray) -> np.ndarray:
        z = self.normalize(np.asarray(values, dtype=np.float64))
        return _sigmoid(z @ self.encode_weights + self.encode_bias)

    def decode(self, code: np.ndarray) -> np.ndarray:
        y = _sigmoid(np.asarray(code, dtype=np.float64) @ self.decode_weights + self.decode_bias)
        return self.denormalize(y)

    def reconstruction_error(self, values: np.ndarray) -> float:
        """Squared reconstruction error in the normalized space."""
        z = self.normalize(np.asarray(values, dtype=np.float64))
        h = _sigmoid(z @ self.encode_weights + self.encode_bias)
        y = _sigmoid(h @ self.decode_weights + self.decode_bias)
        return float(((y - z) ** 2).sum())


def train_models(
    solutions: list[SparseSolution],
    k: int,
    lower: np.ndarray,
    upper: np.ndarray,
    hyper: PslHyper,
    rng: np.random.Generator,
) -> tuple[BinarySubspaceModel, RealSubspaceModel]:
    """Retrain both subspace models from scratch on the given solutions."""
    if not solutions:
        raise ValueError("cannot train subspace models on an empty set")
    bits = np.vstack([s.bits for s in solutions]).astype(np.float64)
    values = np.vstack([s.values for s in solutions])
    rbm = BinarySubspaceModel.train(bits, k, hyper, rng)
    dae = RealSubspaceModel.train(values, k, lower, upper, hyper, rng)
    return rbm, dae


def reduce_solution(
    solution: SparseSolution, rbm: BinarySubspaceModel, dae: RealSubspaceModel
) -> tuple[np.ndarray, np.ndarray]:
    """Map a length-d solution to its (hidden bits, hidden reals) code pair."""
    return rbm.encode(solution.bits), dae.encode(solution.values)


def recover_solution(
    hidden_bits: np.ndarray,
    hidden_values: np.ndarray,
    rbm: BinarySubspaceModel,
    dae: RealSubspaceModel,
) -> SparseSolution:
    """Map a code pair back to the full space (caller repairs before use)."""
    return SparseSolution(rbm.decode(hidden_bits), dae.decode(hidden_values))


def adapt_params(
    stats: SurvivalStats,
    nondominated_bits: np.ndarray,
    current: PslParams,
    k_max: int = K_MAX,
) -> PslParams:
    """Steer rho toward the more successful variation route and K toward the
    population's current sparsity level.

    rho' is the model route's survival rate against the sum of both routes'
    rates (epsilon-regularized, clamped to [0.1, 0.9]); K' is the mean number
    of active bits among nondominated solutions divided by ceil(d / k_max),
    clamped to [1, k_max].
    """
    m_rate = stats.model_survived / max(stats.model_made, 1)
    g_rate = stats.genetic_survived / max(stats.genetic_made, 1)
    rho = (m_rate + _RHO_EPS) / (m_rate + g_rate + 2 * _RHO_EPS)
    rho = min(0.9, max(0.1, rho))

    bits = np.asarray(nondominated_bits, dtype=np.float64)
    if bits.ndim != 2 or bits.shape[0] == 0:
        raise ValueError("need a nonempty (n, d) bit matrix")
    d = bits.shape[1]
    mean_active = float(bits.sum(axis=1).mean())
    bucket = math.ceil(d / k_max)
    k = int(math.floor(mean_active / bucket + 0.5))
    k = min(k_max, max(1, k))
    return PslParams(rho=rho, k=k)
