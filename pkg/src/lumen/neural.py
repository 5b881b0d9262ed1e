"""Minimal dense / 1D-convolutional network stack with analytic gradients.

Everything is float64 numpy. A layer caches its last forward pass;
backward consumes that cache, accumulates parameter gradients, and
returns the input gradient (the actor update needs dQ/da). Networks are
plain layer lists with flat parameter views, so the Adam optimizer,
soft target updates, and binary checkpointing all operate on one
canonical parameter list.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ACTIVATIONS = ("linear", "relu", "tanh", "sigmoid")


def _apply_activation(name: str, z: np.ndarray) -> np.ndarray:
    if name == "linear":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    raise ValueError(f"unknown activation {name!r}")


def _activation_grad(name: str, z: np.ndarray, out: np.ndarray) -> np.ndarray:
    if name == "linear":
        return np.ones_like(z)
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "tanh":
        return 1.0 - out * out
    if name == "sigmoid":
        return out * (1.0 - out)
    raise ValueError(f"unknown activation {name!r}")


class Dense:
    """Fully connected layer with a fused activation."""

    def __init__(self, rng: np.random.Generator, n_in: int, n_out: int,
                 activation: str = "linear"):
        bound = 1.0 / math.sqrt(n_in)
        self.w = rng.uniform(-bound, bound, (n_in, n_out))
        self.b = rng.uniform(-bound, bound, n_out)
        self.activation = activation
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._x = None
        self._z = None
        self._out = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.w.shape[0]:
            raise ValueError(
                f"input width {x.shape[-1]} != layer width {self.w.shape[0]}")
        self._x = x
        self._z = x @ self.w + self.b
        self._out = _apply_activation(self.activation, self._z)
        return self._out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise RuntimeError("backward before forward")
        gz = grad_out * _activation_grad(self.activation, self._z, self._out)
        self.gw += self._x.T @ gz
        self.gb += gz.sum(axis=0)
        return gz @ self.w.T

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.gw, self.gb]


class Conv1d:
    """1D convolution over (batch, length, channels), stride 1.

    'Same' zero padding with an even kernel pads (k-1)//2 on the left and
    the remainder on the right, so the output length equals the input
    length for any input at least one sample long.
    """

    def __init__(self, rng: np.random.Generator, c_in: int, c_out: int,
                 kernel: int = 4, activation: str = "relu"):
        bound = 1.0 / math.sqrt(c_in * kernel)
        self.w = rng.uniform(-bound, bound, (kernel, c_in, c_out))
        self.b = rng.uniform(-bound, bound, c_out)
        self.kernel = kernel
        self.pad_left = (kernel - 1) // 2
        self.pad_right = kernel - 1 - self.pad_left
        self.activation = activation
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._cols = None
        self._z = None
        self._out = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[2] != self.w.shape[1]:
            raise ValueError(f"expected (B, L, {self.w.shape[1]}), got {x.shape}")
        b, l, c = x.shape
        xp = np.pad(x, ((0, 0), (self.pad_left, self.pad_right), (0, 0)))
        win = np.lib.stride_tricks.sliding_window_view(xp, self.kernel, axis=1)
        # im2col: (B, L, C, k) -> (B*L, k*C); one gemm against (k*C, F)
        self._cols = np.ascontiguousarray(
            win.transpose(0, 1, 3, 2)).reshape(b * l, self.kernel * c)
        z = self._cols @ self.w.reshape(-1, self.w.shape[2]) + self.b
        self._z = z.reshape(b, l, -1)
        self._out = _apply_activation(self.activation, self._z)
        return self._out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cols is None:
            raise RuntimeError("backward before forward")
        b, l, f = grad_out.shape
        gz = grad_out * _activation_grad(self.activation, self._z, self._out)
        gz2 = gz.reshape(b * l, f)
        self.gw += (self._cols.T @ gz2).reshape(self.w.shape)
        self.gb += gz2.sum(axis=0)
        # Input gradient: full correlation of gz with the kernel flipped
        # along its tap axis, padding swapped relative to forward.
        gzp = np.pad(gz, ((0, 0), (self.pad_right, self.pad_left), (0, 0)))
        gwin = np.lib.stride_tricks.sliding_window_view(gzp, self.kernel, axis=1)
        gcols = np.ascontiguousarray(
            gwin.transpose(0, 1, 3, 2)).reshape(b * l, self.kernel * f)
        w_flip = self.w[::-1]  # (k, C_in, C_out)
        wt = np.ascontiguousarray(w_flip.transpose(0, 2, 1)).reshape(
            self.kernel * f, -1)
        return (gcols @ wt).reshape(b, l, -1)

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.gw, self.gb]


class Mlp:
    """Stack of Dense layers: `sizes` hidden widths, then the output layer."""

    def __init__(self, rng: np.random.Generator, n_in: int, sizes: list[int],
                 n_out: int, hidden_activation: str = "relu",
                 out_activation: str = "linear"):
        self.layers = []
        prev = n_in
        for width in sizes:
            self.layers.append(Dense(rng, prev, width, hidden_activation))
            prev = width
        self.layers.append(Dense(rng, prev, n_out, out_activation))

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def grads(self):
        return [g for layer in self.layers for g in layer.grads()]


class Conv1dEncoder:
    """Conv stack over (B, L, C) followed by flatten, the shared trunk of
    the image-observation actor/critic models."""

    def __init__(self, rng: np.random.Generator, c_in: int, filters: int,
                 n_layers: int, kernel: int = 4, activation: str = "relu"):
        self.layers = []
        prev = c_in
        for _ in range(n_layers):
            self.layers.append(Conv1d(rng, prev, filters, kernel, activation))
            prev = filters
        self._shape = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        grad = grad_out.reshape(self._shape)
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def out_dim(self, length: int) -> int:
        return length * self.layers[-1].w.shape[2]

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def grads(self):
        return [g for layer in self.layers for g in layer.grads()]


def zero_grads(net) -> None:
    for g in net.grads():
        g[...] = 0.0


@dataclass
class Adam:
    """Standard Adam over a fixed parameter list (beta1 0.9, beta2 0.999)."""

    params: list
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0

    def step(self, grads: list) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def adam_step(params: list, grads: list, lr: float, state: Adam | None) -> Adam:
    """Functional wrapper: one Adam step, creating the state on first use."""
    if state is None:
        state = Adam(params=params, lr=lr)
    state.lr = lr
    state.step(grads)
    return state


def soft_update(target_params: list, source_params: list, tau: float) -> None:
    """theta_target <- tau * theta + (1 - tau) * theta_target, in place."""
    for tp, sp in zip(target_params, source_params):
        tp *= 1.0 - tau
        tp += tau * sp


def copy_params(dst_params: list, src_params: list) -> None:
    for d, s in zip(dst_params, src_params):
        d[...] = s


def save_params(path: str | Path, named_nets: dict) -> None:
    """Flat little-endian float64 binary plus a JSON shape manifest."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {}
    chunks = []
    offset = 0
    for name, net in named_nets.items():
        shapes = []
        for p in net.params():
            shapes.append({"shape": list(p.shape), "offset": offset})
            arr = np.ascontiguousarray(p, dtype="<f8")
            chunks.append(arr.tobytes())
            offset += p.size
        manifest[name] = shapes
    (path / "params.bin").write_bytes(b"".join(chunks))
    (path / "manifest.json").write_text(
        json.dumps({"nets": manifest, "n_values": offset}, indent=1,
                   sort_keys=True))


def load_params(path: str | Path, named_nets: dict) -> None:
    """Load a save_params checkpoint into nets of matching shapes."""
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    flat = np.frombuffer((path / "params.bin").read_bytes(), dtype="<f8")
    for name, net in named_nets.items():
        if name not in manifest["nets"]:
            raise KeyError(f"checkpoint has no net named {name!r}")
        records = manifest["nets"][name]
        params = net.params()
        if len(records) != len(params):
            raise ValueError(f"parameter count mismatch for {name!r}")
        for rec, p in zip(records, params):
            if list(p.shape) != rec["shape"]:
                raise ValueError(
                    f"shape mismatch for {name!r}: {rec['shape']} vs {p.shape}")
            start = rec["offset"]
            p[...] = flat[start:start + p.size].reshape(p.shape)
