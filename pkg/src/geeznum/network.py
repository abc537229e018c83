"""Fully connected feed-forward network with squared-error backpropagation.

Parameters live in one flat float64 vector, all weight matrices first (row-major,
layer by layer) followed by all bias vectors. ``NetworkParams`` is a thin view
over that vector so the optimizer and the network share one representation.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .dataset import ENCODING_WIDTH, ENCODINGS, ONEHOT
from .errors import DimensionError, FormatError

DEFAULT_LAYER_SIZES = (1800, 20, 15, 10, 20)

TANH = "tanh"
LOGISTIC = "logistic"
ACTIVATIONS = (TANH, LOGISTIC)


def logistic(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(name, z):
    return np.tanh(z) if name == TANH else logistic(z)


def _derivative_from_output(name, a):
    return 1.0 - a * a if name == TANH else a * (1.0 - a)


@dataclass(frozen=True)
class Architecture:
    layer_sizes: tuple[int, ...] = DEFAULT_LAYER_SIZES
    hidden_activation: str = LOGISTIC
    output_activation: str = LOGISTIC
    target_encoding: str = ONEHOT

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 3:
            raise ValueError("architecture needs an input layer, at least one hidden layer and an output layer")
        if min(sizes) < 1:
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        for act in (self.hidden_activation, self.output_activation):
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}; expected one of {ACTIVATIONS}")
        if self.target_encoding not in ENCODINGS:
            raise ValueError(f"unknown target encoding {self.target_encoding!r}")

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def shapes(self) -> list[tuple[int, int]]:
        """``(fan_out, fan_in)`` of each weight matrix."""
        s = self.layer_sizes
        return [(s[i + 1], s[i]) for i in range(self.n_layers)]

    @property
    def activations(self) -> list[str]:
        return [self.hidden_activation] * (self.n_layers - 1) + [self.output_activation]

    @property
    def n_params(self) -> int:
        return sum(r * c + r for r, c in self.shapes)

    def check_encoding(self):
        width = ENCODING_WIDTH[self.target_encoding]
        if self.layer_sizes[-1] != width:
            raise DimensionError(
                f"{self.target_encoding} targets need {width} outputs, architecture has {self.layer_sizes[-1]}"
            )

    def describe(self) -> str:
        return (
            f"layers={','.join(map(str, self.layer_sizes))} hidden_activation={self.hidden_activation} "
            f"output_activation={self.output_activation} encoding={self.target_encoding}"
        )


def unpack(arch: Architecture, theta: np.ndarray):
    """Weight and bias views into a flat parameter vector."""
    theta = np.asarray(theta)
    if theta.shape != (arch.n_params,):
        raise DimensionError(f"parameter vector must have length {arch.n_params}, got shape {theta.shape}")
    weights, biases, pos = [], [], 0
    for r, c in arch.shapes:
        weights.append(theta[pos:pos + r * c].reshape(r, c))
        pos += r * c
    for r, _ in arch.shapes:
        biases.append(theta[pos:pos + r])
        pos += r
    return weights, biases


class NetworkParams:
    """Weights ``W[l]`` of shape ``(fan_out, fan_in)`` and biases ``b[l]``."""

    def __init__(self, arch: Architecture, theta):
        theta = np.array(theta, dtype=np.float64)
        self.weights, self.biases = unpack(arch, theta)
        if not np.isfinite(theta).all():
            raise ValueError("network parameters must be finite")
        theta.setflags(write=False)
        self.arch = arch
        self._theta = theta

    @classmethod
    def from_layers(cls, arch: Architecture, weights, biases) -> "NetworkParams":
        parts = [np.asarray(w, dtype=np.float64).ravel() for w in weights]
        parts += [np.asarray(b, dtype=np.float64).ravel() for b in biases]
        return cls(arch, np.concatenate(parts))

    def to_vector(self) -> np.ndarray:
        return self._theta.copy()

    def __eq__(self, other):
        if not isinstance(other, NetworkParams):
            return NotImplemented
        return self.arch == other.arch and np.array_equal(self._theta, other._theta)


def init_network(arch: Architecture, seed: int = 0) -> NetworkParams:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    weights = []
    for fan_out, fan_in in arch.shapes:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
    biases = [np.zeros(r) for r, _ in arch.shapes]
    return NetworkParams.from_layers(arch, weights, biases)


def _as_batch(arch, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != arch.layer_sizes[0]:
        raise DimensionError(f"input must have {arch.layer_sizes[0]} features, got shape {x.shape}")
    return X, single


def _forward(arch, weights, biases, X):
    acts, pre = [X], []
    for W, b, name in zip(weights, biases, arch.activations):
        z = acts[-1] @ W.T + b
        pre.append(z)
        acts.append(_activate(name, z))
    return acts, pre


def forward(params: NetworkParams, x):
    """Forward pass for one sample or a batch of row samples.

    Returns the output and a cache ``{"a": activations, "z": pre-activations}``
    where ``a[0]`` is the input.
    """
    X, single = _as_batch(params.arch, x)
    acts, pre = _forward(params.arch, params.weights, params.biases, X)
    if single:
        acts = [a[0] for a in acts]
        pre = [z[0] for z in pre]
    return acts[-1], {"a": acts, "z": pre}


def loss_mse(outputs, targets) -> float:
    """``sum ||y - t||^2 / (2 N d)`` over a batch of ``N`` rows of width ``d``."""
    Y = np.atleast_2d(np.asarray(outputs, dtype=np.float64))
    T = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if Y.shape != T.shape:
        raise DimensionError(f"outputs {Y.shape} and targets {T.shape} differ in shape")
    if Y.shape[0] == 0:
        raise ValueError("loss of an empty batch")
    n, d = Y.shape
    r = Y - T
    return float(np.sum(r * r) / (2.0 * n * d))


def _check_targets(arch, X, T):
    T = np.atleast_2d(np.asarray(T, dtype=np.float64))
    if T.shape != (X.shape[0], arch.layer_sizes[-1]):
        raise DimensionError(f"targets must have shape {(X.shape[0], arch.layer_sizes[-1])}, got {T.shape}")
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    return T


def loss_and_gradient(arch: Architecture, theta, X, T):
    """Batch MSE and its exact gradient with respect to the flat parameters."""
    weights, biases = unpack(arch, theta)
    X, _ = _as_batch(arch, X)
    T = _check_targets(arch, X, T)
    acts, _ = _forward(arch, weights, biases, X)
    n, d = T.shape
    resid = acts[-1] - T
    loss = float(np.sum(resid * resid) / (2.0 * n * d))

    grads_w = [None] * arch.n_layers
    grads_b = [None] * arch.n_layers
    delta = resid * _derivative_from_output(arch.output_activation, acts[-1]) / (n * d)
    for l in range(arch.n_layers - 1, -1, -1):
        grads_w[l] = delta.T @ acts[l]
        grads_b[l] = delta.sum(axis=0)
        if l:
            delta = (delta @ weights[l]) * _derivative_from_output(arch.activations[l - 1], acts[l])
    grad = np.concatenate([g.ravel() for g in grads_w] + grads_b)
    return loss, grad


def backprop_gradient(params: NetworkParams, X, T) -> np.ndarray:
    return loss_and_gradient(params.arch, params.to_vector(), X, T)[1]


def batch_loss(params: NetworkParams, X, T) -> float:
    out, _ = forward(params, np.atleast_2d(X))
    return loss_mse(out, T)


def central_difference(fun, theta, eps: float = 1e-5) -> np.ndarray:
    """``(f(θ + εe_k) - f(θ - εe_k)) / 2ε`` for every coordinate ``k``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    theta = np.array(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    for k in range(theta.size):
        orig = theta[k]
        theta[k] = orig + eps
        f_plus = fun(theta)
        theta[k] = orig - eps
        f_minus = fun(theta)
        theta[k] = orig
        grad[k] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def numerical_gradient(params: NetworkParams, X, T, eps: float = 1e-5) -> np.ndarray:
    arch = params.arch

    def fun(theta):
        return batch_loss(NetworkParams(arch, theta), X, T)

    return central_difference(fun, params.to_vector(), eps)


class MSEObjective:
    """Full-batch training loss as a ``theta -> (loss, gradient)`` callable."""

    def __init__(self, arch: Architecture, X, T):
        self.arch = arch
        self.X, _ = _as_batch(arch, X)
        self.T = _check_targets(arch, self.X, T)
        self.n_evals = 0

    def __call__(self, theta):
        self.n_evals += 1
        return loss_and_gradient(self.arch, theta, self.X, self.T)


# -- GEEZMLP1 model file -------------------------------------------------------

MAGIC = b"GEEZMLP\x01"
_ACT_CODES = {TANH: 0, LOGISTIC: 1}
_ENC_CODES = {"onehot": 0, "binary5": 1}


def dump_params(params: NetworkParams) -> bytes:
    arch = params.arch
    out = [MAGIC, struct.pack("<I", arch.n_layers)]
    out += [struct.pack("<II", r, c) for r, c in arch.shapes]
    out += [struct.pack("<B", _ACT_CODES[a]) for a in arch.activations]
    out.append(struct.pack("<B", _ENC_CODES[arch.target_encoding]))
    for W, b in zip(params.weights, params.biases):
        out.append(W.astype("<f8").tobytes())
        out.append(b.astype("<f8").tobytes())
    return b"".join(out)


def load_params(data: bytes) -> NetworkParams:
    """Parse a GEEZMLP1 model; every failure names the byte offset."""
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise FormatError("bad magic: not a GEEZMLP1 model file", 0)
    pos = len(MAGIC)

    def take(n, what):
        nonlocal pos
        if pos + n > len(data):
            raise FormatError(f"truncated {what}: expected {n} bytes, found {len(data) - pos}", pos)
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    (n_layers,) = struct.unpack("<I", take(4, "layer count"))
    if n_layers < 2:
        raise FormatError(f"layer count {n_layers} too small", pos - 4)
    shapes = []
    for l in range(n_layers):
        r, c = struct.unpack("<II", take(8, f"layer {l} shape"))
        if r < 1 or c < 1:
            raise FormatError(f"layer {l} has empty shape {r}x{c}", pos - 8)
        if shapes and c != shapes[-1][0]:
            raise FormatError(f"layer {l} fan-in {c} does not match previous fan-out {shapes[-1][0]}", pos - 8)
        shapes.append((r, c))

    inv_act = {v: k for k, v in _ACT_CODES.items()}
    acts = []
    for l in range(n_layers):
        code = take(1, f"layer {l} activation")[0]
        if code not in inv_act:
            raise FormatError(f"unknown activation code {code}", pos - 1)
        acts.append(inv_act[code])
    if len(set(acts[:-1])) != 1:
        raise FormatError("hidden layers must share one activation", pos - 1)
    code = take(1, "encoding code")[0]
    inv_enc = {v: k for k, v in _ENC_CODES.items()}
    if code not in inv_enc:
        raise FormatError(f"unknown encoding code {code}", pos - 1)

    need = sum(r * c + r for r, c in shapes) * 8
    if len(data) - pos != need:
        raise FormatError(
            f"weight block length mismatch: expected {need} bytes, found {len(data) - pos}", pos
        )
    arch = Architecture(
        layer_sizes=(shapes[0][1],) + tuple(r for r, _ in shapes),
        hidden_activation=acts[0],
        output_activation=acts[-1],
        target_encoding=inv_enc[code],
    )
    weights, biases = [], []
    for r, c in shapes:
        weights.append(np.frombuffer(take(r * c * 8, "weights"), dtype="<f8").reshape(r, c))
        biases.append(np.frombuffer(take(r * 8, "biases"), dtype="<f8"))
    return NetworkParams.from_layers(arch, weights, biases)
