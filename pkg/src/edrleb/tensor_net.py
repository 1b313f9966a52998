"""Dense networks in plain NumPy: init, forward, manual backprop, Adam.

All parameters of a network live in one contiguous float64 vector.  The
per-layer weight matrices and bias vectors are views into that vector, so
flattening is a copy and the genetic operators can splice actors directly.

Flattening order is layer-major; within a layer the weight matrix comes
first (shape ``(fan_in, fan_out)``, row-major), followed by the bias.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

HIDDEN_ACTIVATIONS = ("relu", "tanh")
OUTPUT_ACTIVATIONS = ("tanh", "identity")


@dataclass(frozen=True)
class MLPSpec:
    """Shape and activations of a multilayer perceptron.

    ``final_init`` replaces the fan-in rule on the last layer with a small
    uniform range (``None`` keeps the fan-in rule).
    """

    layer_sizes: tuple[int, ...]
    hidden_activation: str = "relu"
    output_activation: str = "identity"
    final_init: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise ValueError("an MLP needs at least an input and an output layer")
        if any(n < 1 for n in self.layer_sizes):
            raise ValueError(f"layer sizes must be >= 1, got {self.layer_sizes}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @cached_property
    def layout(self) -> tuple[LayoutEntry, ...]:
        entries = []
        for i, (fan_in, fan_out) in enumerate(zip(self.layer_sizes[:-1], self.layer_sizes[1:])):
            entries.append(LayoutEntry(i, "weight", (fan_in, fan_out)))
            entries.append(LayoutEntry(i, "bias", (fan_out,)))
        return tuple(entries)

    @cached_property
    def n_params(self) -> int:
        return sum(e.size for e in self.layout)

    @cached_property
    def offsets(self) -> tuple[tuple[int, int, int], ...]:
        """(weight start, bias start, bias end) of each layer in the flat vector."""
        out, offset = [], 0
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            b_off = offset + fan_in * fan_out
            out.append((offset, b_off, b_off + fan_out))
            offset = b_off + fan_out
        return tuple(out)


class LayoutEntry(NamedTuple):
    layer: int
    kind: str
    shape: tuple[int, ...]

    @property
    def size(self) -> int:
        return math.prod(self.shape)


@dataclass
class FlatParams:
    """A flat parameter (or gradient) vector plus the layout it follows."""

    values: np.ndarray
    layout: tuple[LayoutEntry, ...]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not self.layout:
            raise ValueError("empty layout")
        expected = _layout_size(self.layout)
        if self.values.shape != (expected,):
            raise ValueError(f"flat vector has shape {self.values.shape}, layout needs ({expected},)")

    def __len__(self) -> int:
        return self.values.size


def _layout_size(layout) -> int:
    return sum(math.prod(e.shape) for e in layout)


class MLP:
    """Network state: a spec plus one flat parameter vector.

    ``weights[i]`` and ``biases[i]`` are views into ``params``; write into
    ``params`` in place (or use :meth:`assign`) to keep them in sync.
    """

    def __init__(self, spec: MLPSpec, params: np.ndarray | None = None):
        self.spec = spec
        if params is None:
            params = np.zeros(spec.n_params)
        params = np.array(params, dtype=np.float64)
        if params.shape != (spec.n_params,):
            raise ValueError(f"expected {spec.n_params} parameters, got shape {params.shape}")
        self.params = params
        self.version = 0
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        offset = 0
        for entry in spec.layout:
            view = self.params[offset:offset + entry.size].reshape(entry.shape)
            (self.weights if entry.kind == "weight" else self.biases).append(view)
            offset += entry.size

    def assign(self, values: np.ndarray) -> None:
        self.params[:] = values
        self.version += 1

    def copy(self) -> MLP:
        return MLP(self.spec, self.params.copy())

    def __repr__(self):
        return f"MLP({list(self.spec.layer_sizes)}, n_params={self.params.size})"


@dataclass
class ForwardCache:
    owner: int
    version: int
    inputs: list[np.ndarray]  # input to each layer
    outputs: list[np.ndarray]  # post-activation output of each layer
    squeeze: bool


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.first_moment.shape != self.second_moment.shape:
            raise ValueError("moment vectors differ in length")

    @classmethod
    def zeros(cls, n: int, **kwargs) -> AdamState:
        return cls(np.zeros(n), np.zeros(n), **kwargs)

    def copy(self) -> AdamState:
        return AdamState(self.first_moment.copy(), self.second_moment.copy(), self.step,
                         self.beta1, self.beta2, self.epsilon)


def mlp_init(spec: MLPSpec, seed: int | np.random.Generator) -> MLP:
    """Fan-in uniform initialization, optionally with a small final layer.

    Weights and biases of each layer are drawn from
    ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``.  If ``spec.final_init`` is set,
    the last layer uses ``U(-final_init, final_init)`` instead.
    """
    rng = np.random.default_rng(seed)
    net = MLP(spec)
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        bound = 1.0 / np.sqrt(w.shape[0])
        if i == spec.n_layers - 1 and spec.final_init is not None:
            bound = spec.final_init
        w[:] = rng.uniform(-bound, bound, size=w.shape)
        b[:] = rng.uniform(-bound, bound, size=b.shape)
    return net


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(out: np.ndarray, kind: str) -> np.ndarray | None:
    # derivative expressed through the post-activation value
    if kind == "relu":
        return (out > 0.0).astype(np.float64)
    if kind == "tanh":
        return 1.0 - out * out
    return None


def mlp_forward(net: MLP, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Run the network on one input vector or a batch of row vectors."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.spec.layer_sizes[0]:
        raise ValueError(f"input shape {x.shape} does not match input size {net.spec.layer_sizes[0]}")
    inputs, outputs = [], []
    h = x
    last = net.spec.n_layers - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(h)
        kind = net.spec.output_activation if i == last else net.spec.hidden_activation
        h = _activate(h @ w + b, kind)
        outputs.append(h)
    cache = ForwardCache(id(net), net.version, inputs, outputs, squeeze)
    return (h[0] if squeeze else h), cache


def mlp_backward(net: MLP, cache: ForwardCache, output_grad: np.ndarray) -> tuple[FlatParams, np.ndarray]:
    """Backpropagate ``output_grad`` through the cached forward pass.

    Gradients are summed over the batch.

    Returns:
        The parameter gradient in ``flatten_params`` layout, and the
        gradient with respect to the network input (same shape as the
        input passed to :func:`mlp_forward`).
    """
    if cache.owner != id(net) or cache.version != net.version or len(cache.inputs) != net.spec.n_layers:
        raise ValueError("forward cache does not belong to this network state")
    g = np.asarray(output_grad, dtype=np.float64)
    if cache.squeeze:
        g = g[None, :]
    if g.shape != cache.outputs[-1].shape:
        raise ValueError(f"output gradient shape {g.shape} != output shape {cache.outputs[-1].shape}")

    grad = np.empty(net.spec.n_params)
    offsets = net.spec.offsets
    last = net.spec.n_layers - 1
    for i in range(last, -1, -1):
        kind = net.spec.output_activation if i == last else net.spec.hidden_activation
        d = _activation_grad(cache.outputs[i], kind)
        if d is not None:
            g = g * d
        w_off, b_off, b_end = offsets[i]
        grad[w_off:b_off] = (cache.inputs[i].T @ g).ravel()
        grad[b_off:b_end] = g.sum(axis=0)
        g = g @ net.weights[i].T
    input_grad = g[0] if cache.squeeze else g
    return FlatParams(grad, net.spec.layout), input_grad


def flatten_params(net: MLP) -> FlatParams:
    return FlatParams(net.params.copy(), net.spec.layout)


def unflatten_params(flat: FlatParams, spec: MLPSpec) -> MLP:
    if tuple(flat.layout) != spec.layout:
        raise ValueError("flat parameter layout does not match the network spec")
    return MLP(spec, flat.values)


def adam_step(params: FlatParams, grads: FlatParams, opt: AdamState, lr: float) -> tuple[FlatParams, AdamState]:
    """One bias-corrected Adam step (descending ``grads``)."""
    if len(params) != len(grads) or len(params) != opt.first_moment.size:
        raise ValueError("parameter, gradient and moment lengths differ")
    g = grads.values
    step = opt.step + 1
    m = opt.beta1 * opt.first_moment + (1.0 - opt.beta1) * g
    v = opt.beta2 * opt.second_moment + (1.0 - opt.beta2) * g * g
    m_hat = m / (1.0 - opt.beta1 ** step)
    v_hat = v / (1.0 - opt.beta2 ** step)
    new_values = params.values - lr * m_hat / (np.sqrt(v_hat) + opt.epsilon)
    new_opt = AdamState(m, v, step, opt.beta1, opt.beta2, opt.epsilon)
    return FlatParams(new_values, params.layout), new_opt


def apply_adam(net: MLP, grad: FlatParams, opt: AdamState, lr: float) -> AdamState:
    """In-place convenience wrapper used by the agents."""
    new, opt = adam_step(flatten_params(net), grad, opt, lr)
    net.assign(new.values)
    return opt


def soft_update(target: MLP, online: MLP, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target."""
    if target.spec != online.spec:
        raise ValueError("target and online networks differ in shape")
    target.assign(tau * online.params + (1.0 - tau) * target.params)


def mlp(sizes: Sequence[int], hidden: str = "relu", output: str = "identity",
        final_init: float | None = None) -> MLPSpec:
    return MLPSpec(tuple(sizes), hidden, output, final_init)
