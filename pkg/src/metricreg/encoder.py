"""Small MLP encoder with hand-written backprop, a linear head, and Adam."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidStateError, NonFiniteGradientError

ACTIVATIONS = ("tanh", "relu")


def make_rng(seed: int) -> np.random.Generator:
    """All randomness in the package goes through PCG64 seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass
class EncoderParams:
    layer_sizes: list
    weights: list
    biases: list
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise InvalidInputError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise InvalidInputError("layer count mismatch")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (self.layer_sizes[l + 1], self.layer_sizes[l]) or b.shape != (self.layer_sizes[l + 1],):
                raise InvalidInputError(f"layer {l} has shape {W.shape}/{b.shape}")

    @classmethod
    def init(cls, layer_sizes, seed, activation="tanh"):
        """Glorot-uniform weights, zero biases, drawn layer by layer from PCG64(seed)."""
        rng = make_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(list(layer_sizes), weights, biases, activation)

    @classmethod
    def zeros(cls, layer_sizes, activation="tanh"):
        return cls(
            list(layer_sizes),
            [np.zeros((o, i)) for i, o in zip(layer_sizes[:-1], layer_sizes[1:])],
            [np.zeros(o) for o in layer_sizes[1:]],
            activation,
        )

    def arrays(self):
        """Parameters in optimizer order: W0, b0, W1, b1, ..."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self):
        return EncoderParams(
            list(self.layer_sizes),
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
        )


@dataclass
class EncoderGrads:
    weights: list
    biases: list

    def arrays(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out


@dataclass
class ForwardCache:
    X: np.ndarray
    pre: list       # pre-activations of every layer
    post: list      # inputs to every layer (post[0] is X)
    activation: str
    shapes: tuple


def _act(z, kind):
    if kind == "tanh":
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _act_grad(z, a, kind):
    if kind == "tanh":
        return 1.0 - a * a
    # subgradient 0 at exactly 0
    return (z > 0.0).astype(np.float64)


def encoder_forward(params: EncoderParams, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.layer_sizes[0]:
        raise InvalidInputError(
            f"expected input with {params.layer_sizes[0]} columns, got shape {X.shape}")
    h = X
    pre, post = [], []
    last = len(params.weights) - 1
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        post.append(h)
        z = h @ W.T + b
        pre.append(z)
        h = z if l == last else _act(z, params.activation)
    shapes = tuple(W.shape for W in params.weights)
    return h, ForwardCache(X, pre, post, params.activation, shapes)


def encoder_backward(params: EncoderParams, cache: ForwardCache, dL_dF) -> EncoderGrads:
    dL_dF = np.asarray(dL_dF, dtype=np.float64)
    if cache.shapes != tuple(W.shape for W in params.weights):
        raise InvalidStateError("cache does not match parameter shapes")
    if dL_dF.shape != cache.pre[-1].shape:
        raise InvalidStateError(
            f"upstream gradient shape {dL_dF.shape} != output shape {cache.pre[-1].shape}")
    n_layers = len(params.weights)
    gW = [None] * n_layers
    gb = [None] * n_layers
    delta = dL_dF
    for l in range(n_layers - 1, -1, -1):
        gW[l] = delta.T @ cache.post[l]
        gb[l] = delta.sum(axis=0)
        if l > 0:
            delta = delta @ params.weights[l]
            z = cache.pre[l - 1]
            a = cache.post[l]
            delta = delta * _act_grad(z, a, cache.activation)
    return EncoderGrads(gW, gb)


@dataclass
class HeadParams:
    weight: np.ndarray  # d_y x d_f
    bias: np.ndarray

    @classmethod
    def init(cls, d_f, d_y, seed):
        rng = make_rng(seed)
        limit = np.sqrt(6.0 / (d_f + d_y))
        return cls(rng.uniform(-limit, limit, size=(d_y, d_f)), np.zeros(d_y))

    def arrays(self):
        return [self.weight, self.bias]

    def copy(self):
        return HeadParams(self.weight.copy(), self.bias.copy())


def head_forward(head: HeadParams, F):
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2 or F.shape[1] != head.weight.shape[1]:
        raise InvalidInputError(f"head expects {head.weight.shape[1]} features, got {F.shape}")
    return F @ head.weight.T + head.bias


def head_backward(head: HeadParams, F, dL_dY):
    """Returns ``(dL_dF, dL_dweight, dL_dbias)``."""
    F = np.asarray(F, dtype=np.float64)
    dL_dY = np.asarray(dL_dY, dtype=np.float64)
    return dL_dY @ head.weight, dL_dY.T @ F, dL_dY.sum(axis=0)


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, arrays, lr=1e-4):
        return cls(lr=lr, m=[np.zeros_like(a) for a in arrays], v=[np.zeros_like(a) for a in arrays])

    def copy(self):
        return AdamState(self.lr, self.beta1, self.beta2, self.eps, self.step,
                         [a.copy() for a in self.m], [a.copy() for a in self.v])


def adam_step(arrays, grads, state: AdamState):
    """Bias-corrected Adam, in place on ``arrays`` and ``state``.

    Every gradient is checked before any update so a NaN leaves the
    parameters untouched.
    """
    if len(arrays) != len(grads) or len(arrays) != len(state.m):
        raise InvalidInputError("parameter / gradient / moment counts differ")
    for i, (p, g) in enumerate(zip(arrays, grads)):
        if np.shape(p) != np.shape(g):
            raise InvalidInputError(f"gradient {i} shape {np.shape(g)} != parameter {np.shape(p)}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(i)
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(arrays, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return arrays, state
