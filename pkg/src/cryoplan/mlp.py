"""Dense Q-value network: plain numpy forward/backward and Adam.

The network maps one state-action feature vector to one scalar value
(single output node), with rectifier hidden layers sized 128, 256, 128.
Training runs in float32 for speed; float64 is the default elsewhere so
gradient checks stay sharp.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
DEFAULT_HIDDEN = (128, 256, 128)


class ModelFormatError(ValueError):
    """Raised when a stored model container cannot be used."""


class Mlp:
    """Fully connected net with ReLU hidden layers and a linear scalar output."""

    def __init__(self, layer_sizes: list[int], seed: int = 0, dtype=np.float64):
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output layer sizes")
        if layer_sizes[-1] != 1:
            raise ValueError("the value network has a single output node")
        self.layer_sizes = list(layer_sizes)
        self.seed = seed
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
            limit = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            self.weights.append(w.astype(self.dtype))
            self.biases.append(np.zeros(fan_out, dtype=self.dtype))

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @staticmethod
    def for_input(input_dim: int, seed: int = 0, dtype=np.float64) -> "Mlp":
        return Mlp([input_dim, *DEFAULT_HIDDEN, 1], seed=seed, dtype=dtype)

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ValueError(f"expected input of width {self.input_dim}, got shape {x.shape}")
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Q-value per input row, shape (n,)."""
        a = self._check_input(x)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w + b
            if i < last:
                np.maximum(a, 0.0, out=a)
        return a[:, 0]

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Forward pass keeping post-activation values for backprop."""
        a = self._check_input(x)
        activations = [a]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w + b
            if i < last:
                np.maximum(a, 0.0, out=a)
            activations.append(a)
        return a[:, 0], activations

    def backward(
        self, activations: list[np.ndarray], dloss_dout: np.ndarray
    ) -> list[tuple[np.ndarray, np.ndarray]]:
        """Parameter gradients given d(loss)/d(output) per row.

        Returns [(dW, db), ...] in layer order.
        """
        delta = np.asarray(dloss_dout, dtype=self.dtype).reshape(-1, 1)
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.weights)  # type: ignore[list-item]
        for i in range(len(self.weights) - 1, -1, -1):
            a_in = activations[i]
            grads[i] = (a_in.T @ delta, delta.sum(axis=0))
            if i > 0:
                delta = (delta @ self.weights[i].T) * (activations[i] > 0)
        return grads

    def clone(self) -> "Mlp":
        other = Mlp.__new__(Mlp)
        other.layer_sizes = list(self.layer_sizes)
        other.seed = self.seed
        other.dtype = self.dtype
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def copy_from(self, other: "Mlp") -> None:
        for w, ow in zip(self.weights, other.weights):
            np.copyto(w, ow)
        for b, ob in zip(self.biases, other.biases):
            np.copyto(b, ob)

    def parameters_equal(self, other: "Mlp") -> bool:
        return self.layer_sizes == other.layer_sizes and all(
            np.array_equal(a, b)
            for a, b in zip(self.weights + self.biases, other.weights + other.biases)
        )


@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @staticmethod
    def for_net(net: Mlp, lr: float = 0.01) -> "AdamState":
        params = net.weights + net.biases
        return AdamState(
            lr=lr,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(net: Mlp, grads: list[tuple[np.ndarray, np.ndarray]], st: AdamState) -> None:
    """Standard bias-corrected Adam update, in place."""
    st.t += 1
    flat_grads = [g for g, _ in grads] + [g for _, g in grads]
    params = net.weights + net.biases
    bc1 = 1.0 - st.beta1**st.t
    bc2 = 1.0 - st.beta2**st.t
    for p, g, m, v in zip(params, flat_grads, st.m, st.v):
        g = g.astype(p.dtype, copy=False)
        m *= st.beta1
        m += (1.0 - st.beta1) * g
        v *= st.beta2
        v += (1.0 - st.beta2) * np.square(g)
        p -= st.lr * (m / bc1) / (np.sqrt(v / bc2) + st.eps)


MAGIC = b"CRYOPLAN-NET\n"


def write_container(path: str | Path, magic: bytes, header: dict, arrays: list[np.ndarray]) -> None:
    """Deterministic binary container: magic, length-prefixed json header, then
    the arrays' raw row-major bytes in order.  Byte-identical for identical
    parameters (no archive timestamps)."""
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for a in arrays:
            fh.write(np.ascontiguousarray(a).tobytes())


def read_container(path: str | Path, magic: bytes) -> tuple[dict, bytes]:
    with open(path, "rb") as fh:
        got = fh.read(len(magic))
        if got != magic:
            raise ModelFormatError(f"{path}: not a {magic[:-1].decode()} container")
        raw = fh.read(8)
        if len(raw) != 8:
            raise ModelFormatError(f"{path}: truncated header length")
        n = int.from_bytes(raw, "little")
        blob = fh.read(n)
        if len(blob) != n:
            raise ModelFormatError(f"{path}: truncated header")
        try:
            header = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ModelFormatError(f"{path}: corrupt header: {e}") from e
        return header, fh.read()


def take_params(
    payload: bytes, sizes: list[int], dtype: np.dtype, path: str | Path
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Split a payload into per-layer weights and biases, validating length."""
    weights: list[np.ndarray] = []
    biases: list[np.ndarray] = []
    offset = 0
    item = dtype.itemsize
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        for shape in ((fan_in, fan_out), (fan_out,)):
            count = int(np.prod(shape))
            end = offset + count * item
            if end > len(payload):
                raise ModelFormatError(f"{path}: truncated parameter block")
            arr = np.frombuffer(payload[offset:end], dtype=dtype).reshape(shape).copy()
            (weights if len(shape) == 2 else biases).append(arr)
            offset = end
    if offset != len(payload):
        raise ModelFormatError(f"{path}: trailing bytes after parameters")
    return weights, biases


def save(net: Mlp, path: str | Path) -> None:
    """Versioned container: json header plus parameters in layer order."""
    header = {
        "format_version": FORMAT_VERSION,
        "layer_sizes": net.layer_sizes,
        "seed": net.seed,
        "dtype": net.dtype.name,
    }
    arrays: list[np.ndarray] = []
    for w, b in zip(net.weights, net.biases):
        arrays.extend([w, b])
    write_container(path, MAGIC, header, arrays)


def load(path: str | Path, expected_input_dim: int | None = None) -> Mlp:
    header, payload = read_container(path, MAGIC)
    if header.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {header.get('format_version')!r}")
    try:
        sizes = [int(s) for s in header["layer_sizes"]]
        dtype = np.dtype(header["dtype"])
        seed = int(header["seed"])
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"{path}: malformed header: {e}") from e
    if expected_input_dim is not None and sizes[0] != expected_input_dim:
        raise ModelFormatError(
            f"model input width {sizes[0]} does not match expected {expected_input_dim}"
        )
    weights, biases = take_params(payload, sizes, dtype, path)
    net = Mlp.__new__(Mlp)
    net.layer_sizes = sizes
    net.seed = seed
    net.dtype = dtype
    net.weights = weights
    net.biases = biases
    return net
