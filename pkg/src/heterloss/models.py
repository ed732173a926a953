"""Mean/variance network architectures trained with Gaussian NLL.

Three ways of organizing the parameters that map features to a predictive
Normal distribution per link:

* ``SHARED`` — one network with a two-unit output head: ``[mu, s]``.
* ``PARTIAL`` — a shared trunk feeding two separate heads, one per output.
* ``INDEPENDENT`` — two disjoint networks, one per output.

Networks emit ``s = log(variance)``; the variance is ``exp(s)`` with ``s``
clamped to [-10, 10] so the loss stays finite for any weights. Clamped
samples contribute zero gradient to the variance path, matching the true
derivative of the clamped map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from .errors import ConfigError, InputError, NumericError, ShapeError
from .nn import Mode, MlpNetwork, backward, forward, init_network
from .rng import child_seed

if TYPE_CHECKING:
    from .data import NormStats

LOG_VAR_MIN = -10.0
LOG_VAR_MAX = 10.0

# Default layer widths chosen so all three variants land near 4,500 parameters
# at three input features (4,546 / 4,412 / 4,592).
SHARED_HIDDEN = 64
SPLIT_HIDDEN = 45


class ArchitectureKind(str, Enum):
    SHARED = "shared"
    PARTIAL = "partial"
    INDEPENDENT = "independent"


@dataclass(frozen=True)
class GaussianBatch:
    """Per-sample predictive Normal distributions (arrays aligned by row)."""

    mean: np.ndarray
    variance: np.ndarray

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(self.variance)


_NET_ORDER = {
    ArchitectureKind.SHARED: ("net",),
    ArchitectureKind.PARTIAL: ("trunk", "mean_head", "var_head"),
    ArchitectureKind.INDEPENDENT: ("mean_net", "var_net"),
}


class HeteroModel:
    """A heteroscedastic predictor: features -> (mean dB, variance dB^2)."""

    def __init__(
        self,
        kind: ArchitectureKind,
        networks: dict[str, MlpNetwork],
        normalizer: "NormStats | None" = None,
    ):
        kind = ArchitectureKind(kind)
        expected = _NET_ORDER[kind]
        if set(networks) != set(expected):
            raise ConfigError(
                f"{kind.value} architecture needs networks {expected}, "
                f"got {tuple(networks)}"
            )
        self.kind = kind
        self.networks = networks
        self.normalizer = normalizer

    @property
    def net_order(self) -> tuple[str, ...]:
        return _NET_ORDER[self.kind]

    @property
    def input_dim(self) -> int:
        return self.networks[self.net_order[0]].input_dim

    def parameter_count(self) -> int:
        return sum(net.parameter_count() for net in self.networks.values())

    def parameters(self) -> list[np.ndarray]:
        """All live parameter arrays in a fixed architecture-defined order."""
        out: list[np.ndarray] = []
        for name in self.net_order:
            out.extend(self.networks[name].parameters())
        return out

    def copy(self) -> "HeteroModel":
        return HeteroModel(
            self.kind,
            {name: net.copy() for name, net in self.networks.items()},
            self.normalizer,
        )

    def _forward(
        self,
        features: np.ndarray,
        mode: Mode,
        rng: np.random.Generator | None,
    ):
        """Raw (mu, s) outputs plus per-network caches."""
        caches = {}
        if self.kind is ArchitectureKind.SHARED:
            out, caches["net"] = forward(self.networks["net"], features, mode, rng)
            mu, s_raw = out[:, 0], out[:, 1]
        elif self.kind is ArchitectureKind.PARTIAL:
            trunk_out, caches["trunk"] = forward(
                self.networks["trunk"], features, mode, rng
            )
            mu_out, caches["mean_head"] = forward(
                self.networks["mean_head"], trunk_out, mode, rng
            )
            s_out, caches["var_head"] = forward(
                self.networks["var_head"], trunk_out, mode, rng
            )
            mu, s_raw = mu_out[:, 0], s_out[:, 0]
        else:
            mu_out, caches["mean_net"] = forward(
                self.networks["mean_net"], features, mode, rng
            )
            s_out, caches["var_net"] = forward(
                self.networks["var_net"], features, mode, rng
            )
            mu, s_raw = mu_out[:, 0], s_out[:, 0]
        return mu, s_raw, caches

    def predict(
        self,
        features: np.ndarray,
        mode: Mode = Mode.INFER,
        rng: np.random.Generator | None = None,
    ) -> GaussianBatch:
        """Predict per-row Normal distributions from normalized features."""
        mu, s_raw, _ = self._forward(np.asarray(features, float), mode, rng)
        s = np.clip(s_raw, LOG_VAR_MIN, LOG_VAR_MAX)
        return GaussianBatch(mean=mu, variance=np.exp(s))

    def predict_links(self, freq_mhz, dist_m, obs_m) -> tuple[np.ndarray, np.ndarray]:
        """Predict (mean dB, SD dB) from raw link features, normalizing internally."""
        if self.normalizer is None:
            raise ConfigError("model has no feature normalizer attached")
        feats = self.normalizer.apply_links(freq_mhz, dist_m, obs_m)
        batch = self.predict(feats)
        return batch.mean, batch.sd


def build_default(
    kind: ArchitectureKind | str,
    input_dim: int = 3,
    seed: int = 0,
    dropout_rate: float = 0.25,
) -> HeteroModel:
    """Default near-4,500-parameter configuration of each architecture.

    At ``input_dim=3``: shared 4,546 / partial 4,412 / independent 4,592
    parameters, all two hidden layers deep on the mean path.
    """
    if input_dim < 1:
        raise ConfigError("input_dim must be >= 1")
    kind = ArchitectureKind(kind)
    h, hs = SHARED_HIDDEN, SPLIT_HIDDEN
    if kind is ArchitectureKind.SHARED:
        nets = {
            "net": init_network(
                [input_dim, h, h, 2], dropout_rate=dropout_rate, seed=child_seed(seed, "net")
            )
        }
    elif kind is ArchitectureKind.PARTIAL:
        nets = {
            "trunk": init_network(
                [input_dim, hs],
                activations=["relu"],
                dropout_rate=dropout_rate,
                seed=child_seed(seed, "trunk"),
            ),
            "mean_head": init_network(
                [hs, hs, 1], dropout_rate=dropout_rate, seed=child_seed(seed, "mean_head")
            ),
            "var_head": init_network(
                [hs, hs, 1], dropout_rate=dropout_rate, seed=child_seed(seed, "var_head")
            ),
        }
        # the trunk's ReLU output is dropout-masked like any other hidden layer
        nets["trunk"].layers[-1].dropout_rate = dropout_rate
    else:
        nets = {
            "mean_net": init_network(
                [input_dim, hs, hs, 1], dropout_rate=dropout_rate, seed=child_seed(seed, "mean_net")
            ),
            "var_net": init_network(
                [input_dim, hs, hs, 1], dropout_rate=dropout_rate, seed=child_seed(seed, "var_net")
            ),
        }
    return HeteroModel(kind, nets)


def nll_loss_value(mu: np.ndarray, var: np.ndarray, targets: np.ndarray) -> float:
    terms = 0.5 * np.log(2.0 * math.pi * var) + np.square(targets - mu) / (2.0 * var)
    return float(np.mean(terms))


def warm_start_output_biases(
    model: HeteroModel, target_mean: float, target_log_var: float
) -> None:
    """Seed the output biases with the training targets' mean and log variance.

    Raw dB targets sit far from a fresh network's near-zero outputs; starting
    the heads at the homoscedastic optimum removes that transient, which
    otherwise drives the log-variance output into its clamp while the mean
    catches up.
    """
    target_log_var = float(np.clip(target_log_var, LOG_VAR_MIN, LOG_VAR_MAX))
    if model.kind is ArchitectureKind.SHARED:
        model.networks["net"].layers[-1].biases[:] = (target_mean, target_log_var)
    elif model.kind is ArchitectureKind.PARTIAL:
        model.networks["mean_head"].layers[-1].biases[:] = target_mean
        model.networks["var_head"].layers[-1].biases[:] = target_log_var
    else:
        model.networks["mean_net"].layers[-1].biases[:] = target_mean
        model.networks["var_net"].layers[-1].biases[:] = target_log_var


def nll_gradients(
    model: HeteroModel,
    features: np.ndarray,
    targets: np.ndarray,
    rng: np.random.Generator | None = None,
    mode: Mode = Mode.TRAIN,
    var_grad_scale: float = 1.0,
) -> tuple[float, list[np.ndarray]]:
    """Batch Gaussian NLL and its gradient w.r.t. every model parameter.

    Gradients are aligned with ``model.parameters()``. ``var_grad_scale``
    multiplies the gradient flowing into the log-variance path only; the
    training harness uses it to damp the variance head during the first few
    epochs. For the INDEPENDENT architecture the mean-path gradient treats
    the other net's variances as constants of the batch, and vice versa.
    """
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    features = np.asarray(features, dtype=np.float64)
    if len(targets) != features.shape[0]:
        raise ShapeError("targets length must equal the number of feature rows")
    if not np.all(np.isfinite(targets)):
        raise InputError("targets contain non-finite values")

    mu, s_raw, caches = model._forward(features, mode, rng)
    s = np.clip(s_raw, LOG_VAR_MIN, LOG_VAR_MAX)
    var = np.exp(s)
    n = len(targets)

    with np.errstate(over="ignore", invalid="ignore"):
        loss = nll_loss_value(mu, var, targets)
        resid = mu - targets
        d_mu = resid / (var * n)
        d_s = 0.5 * (1.0 - np.square(resid) / var) / n
    if not math.isfinite(loss):
        raise NumericError(f"non-finite NLL loss ({loss})")
    d_s = d_s * ((s_raw > LOG_VAR_MIN) & (s_raw < LOG_VAR_MAX))
    d_s = d_s * var_grad_scale

    grads: dict[str, list[np.ndarray]] = {}
    if model.kind is ArchitectureKind.SHARED:
        out_grad = np.stack([d_mu, d_s], axis=1)
        grads["net"], _ = backward(model.networks["net"], caches["net"], out_grad)
    elif model.kind is ArchitectureKind.PARTIAL:
        grads["mean_head"], d_trunk_mu = backward(
            model.networks["mean_head"], caches["mean_head"], d_mu[:, None]
        )
        grads["var_head"], d_trunk_s = backward(
            model.networks["var_head"], caches["var_head"], d_s[:, None]
        )
        grads["trunk"], _ = backward(
            model.networks["trunk"], caches["trunk"], d_trunk_mu + d_trunk_s
        )
    else:
        grads["mean_net"], _ = backward(
            model.networks["mean_net"], caches["mean_net"], d_mu[:, None]
        )
        grads["var_net"], _ = backward(
            model.networks["var_net"], caches["var_net"], d_s[:, None]
        )

    flat: list[np.ndarray] = []
    for name in model.net_order:
        flat.extend(grads[name])
    return loss, flat
