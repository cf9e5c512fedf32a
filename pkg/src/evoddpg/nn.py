"""Dense feed-forward networks with hand-written backprop and Adam.

Everything runs in float64. Inputs may be a single vector of shape
``(n_in,)`` or a batch of shape ``(batch, n_in)``; outputs follow the same
rank. Gradients of a batch are summed over the batch, so callers that want
a mean loss scale ``output_grad`` by ``1 / batch``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .errors import NumericError

HIDDEN_ACTIVATIONS = ("relu", "tanh")
OUTPUT_ACTIVATIONS = ("identity", "tanh")


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_grad(name, z, a, upstream):
    # relu'(0) is taken as 0
    if name == "relu":
        return upstream * (z > 0.0)
    if name == "tanh":
        return upstream * (1.0 - a * a)
    return upstream


@dataclass
class Mlp:
    layer_sizes: List[int]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    hidden_activation: str = "relu"
    output_activation: str = "identity"
    # bumped on every in-place parameter change; used to reject stale caches
    version: int = field(default=0, compare=False)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def activation(self, layer: int) -> str:
        return self.output_activation if layer == self.n_layers - 1 else self.hidden_activation

    def get_flat(self) -> np.ndarray:
        """All parameters as one vector, layer by layer, weights (row-major) then biases."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {flat.shape}")
        i = 0
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[k] = flat[i:i + w.size].reshape(w.shape).copy()
            i += w.size
            self.biases[k] = flat[i:i + b.size].copy()
            i += b.size
        self.version += 1

    def copy(self) -> "Mlp":
        return Mlp(list(self.layer_sizes), [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases], self.hidden_activation,
                   self.output_activation)


@dataclass
class ForwardCache:
    """Per-layer inputs and pre-activations recorded by :func:`mlp_forward`."""

    net: Mlp
    version: int
    batched: bool
    inputs: List[np.ndarray]
    preacts: List[np.ndarray]
    outputs: List[np.ndarray]


@dataclass
class Gradients:
    weights: Optional[List[np.ndarray]]
    biases: Optional[List[np.ndarray]]
    # d loss / d input, same rank as the forward input
    input: Optional[np.ndarray] = None

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, net: Mlp, flat: np.ndarray) -> "Gradients":
        ws, bs, i = [], [], 0
        for w, b in zip(net.weights, net.biases):
            ws.append(flat[i:i + w.size].reshape(w.shape).copy())
            i += w.size
            bs.append(flat[i:i + b.size].copy())
            i += b.size
        return cls(ws, bs)


def param_count(layer_sizes) -> int:
    return sum(a * b + b for a, b in zip(layer_sizes[:-1], layer_sizes[1:]))


def mlp_init(layer_sizes, hidden_activation="relu", output_activation="identity", seed=0) -> Mlp:
    """Build a network with fan-in scaled uniform weights and zero biases.

    Layer ``k`` weights are drawn from ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``
    where ``fan_in = layer_sizes[k]``.
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError(f"layer_sizes needs >= 2 positive entries, got {layer_sizes!r}")
    if hidden_activation not in HIDDEN_ACTIVATIONS:
        raise ValueError(f"unknown hidden activation {hidden_activation!r}")
    if output_activation not in OUTPUT_ACTIVATIONS:
        raise ValueError(f"unknown output activation {output_activation!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(sizes, weights, biases, hidden_activation, output_activation)


def mlp_forward(net: Mlp, x):
    """Return ``(output, cache)`` for a vector or a batch of row vectors."""
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    if x.ndim not in (1, 2) or x.shape[-1] != net.layer_sizes[0]:
        raise ValueError(f"input width {x.shape[-1] if x.ndim else 0} != {net.layer_sizes[0]}")
    h = x if batched else x[None, :]
    inputs, preacts, outputs = [], [], []
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(h)
        z = h @ w.T + b
        h = _act(net.activation(k), z)
        preacts.append(z)
        outputs.append(h)
    cache = ForwardCache(net, net.version, batched, inputs, preacts, outputs)
    return (h if batched else h[0]), cache


def mlp_backward(net: Mlp, cache: ForwardCache, output_grad, param_grads=True,
                 input_grad=True) -> Gradients:
    """Backpropagate ``output_grad`` (d loss / d output) through ``net``.

    With ``param_grads=False`` only the input gradient is produced, which is
    what the actor update needs when differentiating through the critic.
    """
    if cache.net is not net or cache.version != net.version:
        raise ValueError("forward cache is stale or belongs to another network")
    g = np.asarray(output_grad, dtype=np.float64)
    if not cache.batched:
        g = g[None, :]
    if g.shape != cache.outputs[-1].shape:
        raise ValueError(f"output_grad shape {g.shape} != output shape {cache.outputs[-1].shape}")
    dws: List[np.ndarray] = [None] * net.n_layers
    dbs: List[np.ndarray] = [None] * net.n_layers
    dx = None
    for k in range(net.n_layers - 1, -1, -1):
        dz = _act_grad(net.activation(k), cache.preacts[k], cache.outputs[k], g)
        if param_grads:
            dws[k] = dz.T @ cache.inputs[k]
            dbs[k] = dz.sum(axis=0)
        if k > 0 or input_grad:
            g = dz @ net.weights[k]
    if input_grad:
        dx = g if cache.batched else g[0]
    if not param_grads:
        return Gradients(None, None, dx)
    return Gradients(dws, dbs, dx)


def finite_diff_grad(net: Mlp, loss_fn: Callable[[Mlp], float], h: float = 1e-5) -> Gradients:
    """Central-difference gradient of ``loss_fn(net)`` w.r.t. every parameter."""
    if h <= 0:
        raise ValueError("h must be positive")
    theta = net.get_flat()
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + h
        net.set_flat(theta)
        up = loss_fn(net)
        theta[i] = orig - h
        net.set_flat(theta)
        down = loss_fn(net)
        theta[i] = orig
        grad[i] = (up - down) / (2.0 * h)
    net.set_flat(theta)
    return Gradients.from_flat(net, grad)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8

    @classmethod
    def for_net(cls, net: Mlp, beta1=0.9, beta2=0.999, eps_hat=1e-8) -> "AdamState":
        if not (0 < beta1 < 1 and 0 < beta2 < 1) or eps_hat <= 0:
            raise ValueError("beta1, beta2 must lie in (0, 1) and eps_hat > 0")
        n = net.n_params
        return cls(np.zeros(n), np.zeros(n), 0, beta1, beta2, eps_hat)


def adam_step(net: Mlp, grads: Gradients, state: AdamState, lr: float):
    """Apply one bias-corrected Adam update in place and return ``(net, state)``.

    Uses the folded form ``lr_t = lr * sqrt(1 - b2^t) / (1 - b1^t)`` with
    ``eps_hat`` added to ``sqrt(v)``, so the first step moves every parameter
    with a non-zero gradient by almost exactly ``lr``.
    """
    if lr <= 0:
        raise ValueError("lr must be positive")
    g = grads.flat() if isinstance(grads, Gradients) else np.asarray(grads, dtype=np.float64)
    if g.shape != state.m.shape or g.size != net.n_params:
        raise ValueError(f"gradient length {g.size} does not match network ({net.n_params})")
    if not np.all(np.isfinite(g)):
        raise NumericError("non-finite gradient entries")
    state.step_count += 1
    t = state.step_count
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * g
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * g * g
    lr_t = lr * np.sqrt(1.0 - state.beta2 ** t) / (1.0 - state.beta1 ** t)
    step = lr_t * state.m / (np.sqrt(state.v) + state.eps_hat)
    i = 0
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        w -= step[i:i + w.size].reshape(w.shape)
        i += w.size
        b -= step[i:i + b.size]
        i += b.size
    net.version += 1
    return net, state
