"""Minimal dense neural-network engine.

Plain NumPy substrate: float64 matrices, analytic backpropagation, inverted
dropout and the Adam optimizer. Batches are row-major ``(n_samples, n_features)``
arrays; layer weights are ``(out, in)`` so a layer computes
``act(x @ W.T + b)``.

There is no autodiff here. ``forward`` records exactly what ``backward`` needs
(layer inputs, pre-activations, dropout masks) and ``backward`` replays the
chain rule for any scalar loss whose gradient w.r.t. the network outputs is
supplied by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, InputError, ShapeError, StateError
from .rng import stream


class Mode(Enum):
    TRAIN = "train"
    INFER = "infer"


RELU = "relu"
IDENTITY = "identity"
_ACTIVATIONS = (RELU, IDENTITY)


@dataclass
class DenseLayer:
    """One fully connected layer. Dropout, if any, follows the activation."""

    weights: np.ndarray  # (out, in)
    biases: np.ndarray  # (out,)
    activation: str = RELU
    dropout_rate: float = 0.0

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ShapeError("layer weights must be 2-D (out, in)")
        if self.biases.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"bias shape {self.biases.shape} does not match "
                f"{self.weights.shape[0]} output units"
            )
        if self.activation not in _ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def parameter_count(self) -> int:
        return self.weights.size + self.biases.size

    def copy(self) -> "DenseLayer":
        return DenseLayer(
            self.weights.copy(), self.biases.copy(), self.activation, self.dropout_rate
        )


class MlpNetwork:
    """Ordered stack of dense layers.

    A network built from a single layer-size entry (e.g. ``[3]``) has no
    layers and acts as the identity map; this degenerate form is used to
    express architectures whose trunk is empty.
    """

    def __init__(self, layers: list[DenseLayer], input_dim: int | None = None):
        self.layers = list(layers)
        if self.layers:
            self._input_dim = self.layers[0].in_dim
            for left, right in zip(self.layers, self.layers[1:]):
                if left.out_dim != right.in_dim:
                    raise ShapeError(
                        f"layer chain broken: {left.out_dim} -> {right.in_dim}"
                    )
        else:
            if input_dim is None:
                raise ConfigError("empty network needs an explicit input_dim")
            self._input_dim = int(input_dim)

    @property
    def input_dim(self) -> int:
        return self._input_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim if self.layers else self._input_dim

    def parameter_count(self) -> int:
        return sum(layer.parameter_count() for layer in self.layers)

    def parameters(self) -> list[np.ndarray]:
        """Live parameter arrays, interleaved (W0, b0, W1, b1, ...)."""
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.biases)
        return out

    def copy(self) -> "MlpNetwork":
        return MlpNetwork([layer.copy() for layer in self.layers], self._input_dim)

    def layer_sizes(self) -> list[int]:
        sizes = [self._input_dim]
        sizes.extend(layer.out_dim for layer in self.layers)
        return sizes


@dataclass
class ForwardCache:
    """Everything ``backward`` needs to replay one forward pass."""

    net: MlpNetwork
    mode: Mode
    inputs: list[np.ndarray] = field(default_factory=list)
    pre_acts: list[np.ndarray] = field(default_factory=list)
    masks: list[np.ndarray | None] = field(default_factory=list)


def init_network(
    layer_sizes: list[int] | tuple[int, ...],
    activations: list[str] | None = None,
    dropout_rate: float = 0.0,
    seed: int = 0,
) -> MlpNetwork:
    """Build a network with He-uniform (ReLU) / Glorot-uniform (identity) weights.

    Biases start at zero. Hidden layers default to ReLU with the given dropout
    rate; the output layer is identity with no dropout. Deterministic in
    ``seed`` and independent of any dropout stream.
    """
    sizes = [int(s) for s in layer_sizes]
    if not sizes:
        raise ConfigError("layer_sizes must be non-empty")
    if any(s <= 0 for s in sizes):
        raise ConfigError(f"layer sizes must be positive, got {sizes}")

    n_layers = len(sizes) - 1
    if activations is None:
        activations = [RELU] * max(0, n_layers - 1) + ([IDENTITY] if n_layers else [])
    if len(activations) != n_layers:
        raise ConfigError(
            f"{len(activations)} activations for {n_layers} layers"
        )

    rng = stream(seed, "init")
    layers: list[DenseLayer] = []
    for i in range(n_layers):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        if activations[i] == RELU:
            bound = np.sqrt(6.0 / fan_in)
        else:
            bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        rate = dropout_rate if i < n_layers - 1 else 0.0
        layers.append(
            DenseLayer(weights, np.zeros(fan_out), activations[i], rate)
        )
    return MlpNetwork(layers, input_dim=sizes[0])


def forward(
    net: MlpNetwork,
    batch: np.ndarray,
    mode: Mode = Mode.INFER,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Run a batch through the network.

    In TRAIN mode each layer with ``dropout_rate > 0`` zeroes units with that
    probability and scales survivors by ``1/(1-rate)`` (inverted dropout), so
    INFER mode needs no rescaling.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("batch must be 2-D (n_samples, n_features)")
    if x.shape[1] != net.input_dim:
        raise ShapeError(
            f"batch has {x.shape[1]} features, network expects {net.input_dim}"
        )
    if not np.all(np.isfinite(x)):
        raise InputError("batch contains non-finite values")
    if mode is Mode.TRAIN and rng is None and any(
        layer.dropout_rate > 0 for layer in net.layers
    ):
        raise InputError("TRAIN mode with dropout requires an rng")

    cache = ForwardCache(net=net, mode=mode)
    for layer in net.layers:
        cache.inputs.append(x)
        z = x @ layer.weights.T + layer.biases
        cache.pre_acts.append(z)
        a = np.maximum(z, 0.0) if layer.activation == RELU else z
        if mode is Mode.TRAIN and layer.dropout_rate > 0.0:
            keep = 1.0 - layer.dropout_rate
            mask = (rng.random(a.shape) < keep) / keep
            cache.masks.append(mask)
            x = a * mask
        else:
            cache.masks.append(None)
            x = a
    return x, cache


def backward(
    net: MlpNetwork,
    cache: ForwardCache,
    output_grad: np.ndarray,
) -> tuple[list[np.ndarray], np.ndarray]:
    """Backpropagate ``d loss / d outputs`` through the cached forward pass.

    Returns ``(param_grads, input_grad)`` where ``param_grads`` is aligned
    with ``net.parameters()``. Any batch-mean factor in the loss must already
    be folded into ``output_grad``; dropout masks recorded by the paired
    forward pass are reapplied here.
    """
    if cache.net is not net:
        raise StateError("cache was produced by a different network")
    if len(cache.inputs) != len(net.layers):
        raise StateError("cache depth does not match the network")
    grad = np.asarray(output_grad, dtype=np.float64)
    expected = (cache.inputs[0].shape[0] if net.layers else grad.shape[0], net.output_dim)
    if grad.shape != expected:
        raise ShapeError(f"output_grad shape {grad.shape}, expected {expected}")

    param_grads: list[np.ndarray] = [None] * (2 * len(net.layers))  # type: ignore[list-item]
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        mask = cache.masks[i]
        if mask is not None:
            grad = grad * mask
        if layer.activation == RELU:
            grad = grad * (cache.pre_acts[i] > 0.0)
        param_grads[2 * i] = grad.T @ cache.inputs[i]
        param_grads[2 * i + 1] = grad.sum(axis=0)
        grad = grad @ layer.weights
    return param_grads, grad


@dataclass
class AdamState:
    """Per-parameter Adam accumulators with bias correction."""

    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int = 0
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(
        cls,
        params: list[np.ndarray],
        learning_rate: float = 0.01,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ) -> "AdamState":
        if learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not (0 < beta1 < 1 and 0 < beta2 < 1):
            raise ConfigError("beta1/beta2 must lie in (0, 1)")
        return cls(
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
            learning_rate=learning_rate,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
) -> None:
    """One in-place Adam update over a flat list of parameter arrays."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ShapeError("params/grads/state lengths differ")
    for p, g, m in zip(params, grads, state.first_moment):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError("params/grads/state shapes differ")

    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1**t
    bias2 = 1.0 - b2**t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= state.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + state.epsilon)
