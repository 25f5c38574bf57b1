"""Black-box classifier access.

Every backend is reached through :class:`Oracle.classify`, which validates
the probability contract and bumps the query counter — no other code path
may talk to a model.  Built-in toy backends keep tests hermetic; external
models attach over a newline-delimited JSON protocol on stdio:

    parent -> child   {"type": "hello", "shape": [H, W, C]}
    child  -> parent  {"type": "ready", "classes": m}
    parent -> child   {"type": "query", "id": n, "pixels": "<base64 raw row-major bytes>"}
    child  -> parent  {"type": "probs", "id": n, "probs": [...]}

Ids are strictly increasing and replies must come back in order.  A
record/replay cache (JSON lines keyed by pixel hash) lets regression tests
run with zero live model calls.
"""

from __future__ import annotations

import base64
import hashlib
import json
import queue
import shlex
import subprocess
import threading
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .core import EvoAttackError, ImageTensor
from .imagefiles import PathLike

PROB_SUM_TOL = 1e-6
DEFAULT_QUERY_TIMEOUT = 30.0


class OracleError(EvoAttackError):
    """Any failure raised on the classify path."""


class OracleShapeError(OracleError):
    """Image shape does not match the oracle's declared input shape."""


class OracleContractError(OracleError):
    """Backend returned something that is not a probability vector."""


class OracleTransportError(OracleError):
    """Subprocess backend died, timed out, or broke protocol."""

    def __init__(self, message: str, query_id: Optional[int] = None):
        super().__init__(message)
        self.query_id = query_id


class WeightFileError(EvoAttackError):
    """Malformed toy-oracle weight file."""


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


class Oracle:
    """Base class: shape check, probability validation, query accounting."""

    backend = "abstract"
    concurrency_safe = False

    def __init__(self, class_count: int, shape: tuple[int, int, int]):
        if class_count < 2:
            raise ValueError(f"need at least 2 classes, got {class_count}")
        self.class_count = class_count
        self.shape = tuple(shape)
        self._lock = threading.Lock()
        self._total = 0
        self._since_reset = 0

    def classify(self, image: ImageTensor) -> np.ndarray:
        if image.shape != self.shape:
            # Shape errors do not consume query budget.
            raise OracleShapeError(
                f"image shape {image.shape} does not match oracle shape {self.shape}"
            )
        probs = np.asarray(self._classify(image), dtype=np.float64)
        self._validate(probs)
        with self._lock:
            self._total += 1
            self._since_reset += 1
        return probs

    def _validate(self, probs: np.ndarray) -> None:
        if probs.shape != (self.class_count,):
            raise OracleContractError(
                f"backend returned {probs.shape} probabilities, expected ({self.class_count},)"
            )
        if np.any(probs < 0) or not np.isfinite(probs).all():
            raise OracleContractError("probabilities must be finite and nonnegative")
        if abs(float(probs.sum()) - 1.0) > PROB_SUM_TOL:
            raise OracleContractError(
                f"probabilities sum to {probs.sum():.9f}, not 1 within {PROB_SUM_TOL}"
            )

    def _classify(self, image: ImageTensor) -> np.ndarray:
        raise NotImplementedError

    def query_stats(self) -> tuple[int, int]:
        with self._lock:
            return self._total, self._since_reset

    def reset_stats(self) -> None:
        with self._lock:
            self._since_reset = 0

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class ToyLinearOracle(Oracle):
    """softmax(W @ (pixels/255) + b) over row-major flattened pixels."""

    backend = "toy_linear"
    concurrency_safe = True

    def __init__(self, weights: np.ndarray, bias: np.ndarray, shape: tuple[int, int, int]):
        weights = np.asarray(weights, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        h, w, c = shape
        if weights.ndim != 2 or weights.shape[1] != h * w * c:
            raise WeightFileError(
                f"weight matrix {weights.shape} does not match image shape {shape}"
            )
        if bias.shape != (weights.shape[0],):
            raise WeightFileError("bias length does not match class count")
        super().__init__(weights.shape[0], shape)
        self.weights = weights
        self.bias = bias

    def _classify(self, image: ImageTensor) -> np.ndarray:
        x = image.flat().astype(np.float64) / 255.0
        return softmax(self.weights @ x + self.bias)


class ToyConvOracle(Oracle):
    """Fixed 3x3 convolution (valid), global average pool, linear softmax.

    The spatial structure of the kernels decides which pixels matter, which
    makes attention masks meaningful in tests.
    """

    backend = "toy_conv"
    concurrency_safe = True

    def __init__(
        self,
        kernels: np.ndarray,  # (F, 3, 3, C)
        head: np.ndarray,     # (m, F)
        bias: np.ndarray,     # (m,)
        shape: tuple[int, int, int],
    ):
        kernels = np.asarray(kernels, dtype=np.float64)
        head = np.asarray(head, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        h, w, c = shape
        if h < 3 or w < 3:
            raise WeightFileError("conv oracle needs at least a 3x3 image")
        if kernels.ndim != 4 or kernels.shape[1:] != (3, 3, c):
            raise WeightFileError(f"kernels {kernels.shape} do not match shape {shape}")
        if head.ndim != 2 or head.shape[1] != kernels.shape[0]:
            raise WeightFileError("head width does not match filter count")
        if bias.shape != (head.shape[0],):
            raise WeightFileError("bias length does not match class count")
        super().__init__(head.shape[0], shape)
        self.kernels = kernels
        self.head = head
        self.bias = bias

    def _classify(self, image: ImageTensor) -> np.ndarray:
        x = image.pixels.astype(np.float64) / 255.0
        # (H-2, W-2, C, 3, 3) windows against (F, 3, 3, C) kernels.
        win = np.lib.stride_tricks.sliding_window_view(x, (3, 3), axis=(0, 1))
        feat = np.einsum("hwcij,fijc->hwf", win, self.kernels)
        pooled = feat.mean(axis=(0, 1))
        return softmax(self.head @ pooled + self.bias)

    def pixel_influence(self) -> np.ndarray:
        """Per-position gradient magnitude of the logit spread (H, W, C).

        The conv + pool + head stack is affine in the pixels, so the
        influence of each position is exact, not an estimate.
        """
        h, w, c = self.shape
        n_pos = (h - 2) * (w - 2)
        # d(pooled_f)/d(pixel[y,x,ch]) = sum of kernel taps of f that cover the pixel.
        grad = np.zeros((self.kernels.shape[0], h, w, c))
        for i in range(3):
            for j in range(3):
                grad[:, i : i + h - 2, j : j + w - 2, :] += self.kernels[
                    :, i, j, :
                ][:, None, None, :]
        grad /= n_pos
        # Spread of per-class logit sensitivities, summed over class pairs.
        logit_grad = np.einsum("mf,fhwc->mhwc", self.head, grad)
        return logit_grad.max(axis=0) - logit_grad.min(axis=0)


def _parse_floats(line: str, n: int, where: str) -> np.ndarray:
    parts = line.split()
    if len(parts) != n:
        raise WeightFileError(f"{where}: expected {n} numbers, got {len(parts)}")
    try:
        return np.array([float(p) for p in parts], dtype=np.float64)
    except ValueError as exc:
        raise WeightFileError(f"{where}: {exc}") from exc


def parse_toy_weights(text: str, shape: tuple[int, int, int]) -> Oracle:
    """Parse a flat-text weight file and build the matching toy backend.

    Linear format: first line ``m d``, then m rows of d+1 reals (weights then
    bias).  Conv format: first line ``conv m F C``, then F rows of 9*C reals
    (a 3x3xC kernel in row-major order), then m rows of F+1 reals (head
    weights then bias).
    """
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise WeightFileError("empty weight file")
    header = lines[0].split()
    h, w, c = shape
    if header[0] == "conv":
        if len(header) != 4:
            raise WeightFileError("conv header must be 'conv m F C'")
        try:
            m, n_filters, c_decl = int(header[1]), int(header[2]), int(header[3])
        except ValueError as exc:
            raise WeightFileError(f"bad conv header: {exc}") from exc
        if c_decl != c:
            raise WeightFileError(f"weight file declares {c_decl} channels, image has {c}")
        if len(lines) != 1 + n_filters + m:
            raise WeightFileError(
                f"conv file needs {1 + n_filters + m} lines, got {len(lines)}"
            )
        kernels = np.stack(
            [
                _parse_floats(lines[1 + f], 9 * c, f"kernel {f}").reshape(3, 3, c)
                for f in range(n_filters)
            ]
        )
        rows = [
            _parse_floats(lines[1 + n_filters + k], n_filters + 1, f"head row {k}")
            for k in range(m)
        ]
        head = np.stack([r[:-1] for r in rows])
        bias = np.array([r[-1] for r in rows])
        return ToyConvOracle(kernels, head, bias, shape)

    if len(header) != 2:
        raise WeightFileError("linear header must be 'm d'")
    try:
        m, d = int(header[0]), int(header[1])
    except ValueError as exc:
        raise WeightFileError(f"bad linear header: {exc}") from exc
    if d != h * w * c:
        raise WeightFileError(f"weight file is for d={d}, image has {h * w * c} values")
    if len(lines) != 1 + m:
        raise WeightFileError(f"linear file needs {1 + m} lines, got {len(lines)}")
    rows = [_parse_floats(lines[1 + k], d + 1, f"row {k}") for k in range(m)]
    weights = np.stack([r[:-1] for r in rows])
    bias = np.array([r[-1] for r in rows])
    return ToyLinearOracle(weights, bias, shape)


def load_toy_oracle(path: PathLike, shape: tuple[int, int, int]) -> Oracle:
    return parse_toy_weights(Path(path).read_text(), shape)


def encode_pixels(image: ImageTensor) -> str:
    return base64.b64encode(image.pixels.tobytes()).decode("ascii")


def decode_pixels(data: str, shape: Sequence[int]) -> np.ndarray:
    raw = base64.b64decode(data.encode("ascii"), validate=True)
    h, w, c = shape
    if len(raw) != h * w * c:
        raise OracleContractError(
            f"pixel payload is {len(raw)} bytes, expected {h * w * c}"
        )
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w, c).copy()


class SubprocessOracle(Oracle):
    """External model spoken to over the stdio JSON-lines protocol.

    A single request is in flight at a time, so this backend is declared not
    concurrency-safe.  ``class_count=None`` adopts the count announced in the
    ready message; passing a value makes the handshake verify it.
    """

    backend = "subprocess"
    concurrency_safe = False

    def __init__(
        self,
        command: Union[str, Sequence[str]],
        shape: tuple[int, int, int],
        class_count: Optional[int] = None,
        timeout: float = DEFAULT_QUERY_TIMEOUT,
    ):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._next_id = 1
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise OracleTransportError(f"cannot launch oracle command {argv!r}: {exc}") from exc
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

        self._send({"type": "hello", "shape": list(shape)})
        ready = self._receive(expect="ready", query_id=None)
        announced = ready.get("classes")
        if not isinstance(announced, int) or announced < 2:
            raise OracleTransportError(f"bad ready message: {ready!r}")
        if class_count is not None and announced != class_count:
            raise OracleTransportError(
                f"oracle announced {announced} classes, expected {class_count}"
            )
        super().__init__(announced, shape)

    def _pump(self):
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF sentinel

    def _send(self, obj: dict) -> None:
        assert self._proc.stdin is not None
        try:
            self._proc.stdin.write(json.dumps(obj) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise OracleTransportError(
                f"oracle process is gone: {exc}", query_id=obj.get("id")
            ) from exc

    def _receive(self, expect: str, query_id: Optional[int]) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise OracleTransportError(
                f"oracle reply timed out after {self.timeout}s", query_id=query_id
            ) from None
        if line is None:
            raise OracleTransportError("oracle process closed its stdout", query_id=query_id)
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise OracleTransportError(
                f"malformed oracle reply {line!r}", query_id=query_id
            ) from exc
        if msg.get("type") != expect:
            raise OracleTransportError(
                f"expected {expect!r} reply, got {msg!r}", query_id=query_id
            )
        if query_id is not None and msg.get("id") != query_id:
            raise OracleTransportError(
                f"reply id {msg.get('id')!r} does not match query id {query_id}",
                query_id=query_id,
            )
        return msg

    def _classify(self, image: ImageTensor) -> np.ndarray:
        qid = self._next_id
        self._next_id += 1
        self._send({"type": "query", "id": qid, "pixels": encode_pixels(image)})
        msg = self._receive(expect="probs", query_id=qid)
        probs = msg.get("probs")
        if not isinstance(probs, list):
            raise OracleTransportError(f"probs reply carries no list: {msg!r}", query_id=qid)
        return np.asarray(probs, dtype=np.float64)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                if self._proc.stdin is not None:
                    self._proc.stdin.close()
                self._proc.wait(timeout=2.0)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
                self._proc.wait()


def _pixel_key(image: ImageTensor) -> str:
    return hashlib.sha256(image.pixels.tobytes()).hexdigest()


class RecordingOracle(Oracle):
    """Pass-through wrapper that appends query/response pairs to a JSONL file."""

    backend = "recording"

    def __init__(self, inner: Oracle, path: PathLike):
        super().__init__(inner.class_count, inner.shape)
        self.concurrency_safe = False  # single append stream
        self.inner = inner
        self._fh = open(path, "a", encoding="utf-8")
        self._fh.write(
            json.dumps(
                {"type": "meta", "shape": list(inner.shape), "classes": inner.class_count}
            )
            + "\n"
        )

    def _classify(self, image: ImageTensor) -> np.ndarray:
        probs = self.inner.classify(image)
        self._fh.write(
            json.dumps({"key": _pixel_key(image), "probs": [float(p) for p in probs]})
            + "\n"
        )
        return probs

    def close(self) -> None:
        self._fh.close()
        self.inner.close()


class ReplayOracle(Oracle):
    """Serve cached responses recorded by :class:`RecordingOracle`.

    A query whose pixels were never recorded is an error — replay runs must
    be exact re-runs.
    """

    backend = "replay"
    concurrency_safe = True

    def __init__(self, text: str, shape: Optional[tuple[int, int, int]] = None):
        cache: dict[str, np.ndarray] = {}
        meta_shape = None
        meta_classes = None
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise OracleContractError(f"replay line {lineno} is not JSON: {exc}") from exc
            if obj.get("type") == "meta":
                meta_shape = tuple(obj["shape"])
                meta_classes = int(obj["classes"])
            else:
                cache[obj["key"]] = np.asarray(obj["probs"], dtype=np.float64)
        if meta_shape is None or meta_classes is None:
            raise OracleContractError("replay file carries no meta line")
        if shape is not None and tuple(shape) != meta_shape:
            raise OracleShapeError(f"replay was recorded for shape {meta_shape}, not {shape}")
        super().__init__(meta_classes, meta_shape)
        self._cache = cache

    @classmethod
    def from_file(cls, path: PathLike, shape: Optional[tuple[int, int, int]] = None) -> "ReplayOracle":
        return cls(Path(path).read_text(), shape)

    def _classify(self, image: ImageTensor) -> np.ndarray:
        key = _pixel_key(image)
        if key not in self._cache:
            raise OracleError(f"replay cache has no entry for pixels {key[:12]}…")
        return self._cache[key]
