import numpy as np
import pytest

from evoattack.core import ImageTensor
from evoattack.mask import binarize_map, full_mask
from evoattack.oracle import parse_toy_weights
from evoattack.problem import AttackInstance


def deterministic_image(height, width, channels, seed=7):
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, size=(height, width, channels), dtype=np.uint8)
    return ImageTensor(pixels)


def linear_weight_text(image, scale=4.0, margin01=2.0, margin02=3.0, seed=11):
    """3-class linear oracle where class 0 wins on the clean image.

    Class 1's weights are the negation of class 0's, so pushing pixels against
    the class-0 pattern flips the prediction; class 2 is a constant-logit
    bystander.  Margins are set on the clean image's logits.
    """
    d = image.pixels.size
    rng = np.random.default_rng(seed)
    pattern = rng.choice([-1.0, 1.0], size=d)
    w0 = scale * pattern
    w1 = -w0
    w2 = np.zeros(d)
    x0 = image.flat().astype(np.float64) / 255.0
    z_raw = np.array([w0 @ x0, w1 @ x0, w2 @ x0])
    # Biases place clean logits at (0, -margin01, -margin02).
    b = np.array([0.0, -margin01, -margin02]) - z_raw
    lines = ["3 %d" % d]
    for w, bias in zip((w0, w1, w2), b):
        lines.append(" ".join(repr(float(v)) for v in w) + " " + repr(float(bias)))
    return "\n".join(lines) + "\n"


def conv_image(seed=7):
    """Dark scene with a mid-valued 14x14 object plane on channel 0.

    Background pixels sit near zero, so the box constraint only lets them
    move upward — and the conv weights below make that direction strengthen
    the clean class.  Masking the background away therefore removes a trap,
    not just dead weight.
    """
    rng = np.random.default_rng(seed)
    px = rng.integers(0, 16, size=(16, 16, 3))
    px[1:15, 1:15, 0] = rng.integers(60, 200, size=(14, 14))
    return ImageTensor(px.astype(np.uint8))


def conv_weight_text(image, margin=6.0, gain=160.0, bg_gain=4.4):
    """2-class conv oracle whose top-quartile influence is channel 0's
    interior (196 of 768 positions).

    Filter 0 is a center-tap detector on channel 0; filter 1 pools channels
    1-2, and its head weights make brightening the background raise the
    clean class's logit.  Biases put the clean image's class-0 logit
    ``margin`` above class 1's.
    """
    h, w, c = image.shape
    k0 = np.zeros((3, 3, c))
    k0[1, 1, 0] = 1.0
    k1 = np.zeros((3, 3, c))
    k1[:, :, 1] = 1.0
    k1[:, :, 2] = 1.0
    head = np.array([[gain, bg_gain], [-gain, -bg_gain]])
    x = image.pixels.astype(np.float64) / 255.0
    win = np.lib.stride_tricks.sliding_window_view(x, (3, 3), axis=(0, 1))
    pooled = np.array(
        [np.einsum("hwcij,ijc->", win, k) for k in (k0, k1)]
    ) / ((h - 2) * (w - 2))
    z_raw = head @ pooled
    bias = np.array([0.0, -margin]) - z_raw
    lines = ["conv 2 2 %d" % c]
    for k in (k0, k1):
        lines.append(" ".join(repr(float(v)) for v in k.reshape(-1)))
    for row, b in zip(head, bias):
        lines.append(" ".join(repr(float(v)) for v in row) + " " + repr(float(b)))
    return "\n".join(lines) + "\n"


def high_weight_cut(influence):
    """Threshold between the top influence tier and everything below it."""
    tiers = np.unique(influence)
    return float((tiers[-1] + tiers[-2]) / 2.0)


def make_conv_instance(seed=7, margin=6.0, gain=160.0, bg_gain=4.4, masked=False):
    image = conv_image(seed=seed)
    oracle = parse_toy_weights(conv_weight_text(image, margin, gain, bg_gain), image.shape)
    if masked:
        influence = oracle.pixel_influence()
        mask = binarize_map(influence, high_weight_cut(influence))
    else:
        mask = full_mask(16, 16, 3)
    return AttackInstance(image=image, mask=mask, true_label=0, oracle=oracle)


@pytest.fixture
def small_image():
    return deterministic_image(16, 16, 3)


@pytest.fixture
def linear_instance(small_image):
    """16x16x3 toy-linear attack instance with a full mask."""
    oracle = parse_toy_weights(linear_weight_text(small_image), small_image.shape)
    mask = full_mask(16, 16, 3)
    return AttackInstance(image=small_image, mask=mask, true_label=0, oracle=oracle)


def make_linear_instance(seed=7, **weight_kwargs):
    image = deterministic_image(16, 16, 3, seed=seed)
    oracle = parse_toy_weights(linear_weight_text(image, **weight_kwargs), image.shape)
    return AttackInstance(image=image, mask=full_mask(16, 16, 3), true_label=0, oracle=oracle)
