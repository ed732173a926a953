"""Homoscedastic reference models.

Two baselines with constant predicted SD:

* ``HomoscedasticMseModel`` — an MLP trained on mean squared error under the
  same protocol as the heteroscedastic models, with its SD fitted once from
  validation residuals.
* The 3GPP TR 38.901 urban-macro (UMa) empirical model with the standard's
  fixed shadow-fading SDs (6 dB NLOS, 4 dB LOS).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset, fit_normalizer, NormStats
from .errors import DomainError, InputError
from .metrics import PredictionSet
from .nn import Mode, MlpNetwork, backward, forward, init_network
from .rng import child_seed, stream
from .training import TrainConfig, TrainingHistory, fit, split_train_val


@dataclass(frozen=True)
class UmaParams:
    """Geometry and shadow-fading constants of the TR 38.901 UMa model."""

    base_station_height_m: float = 25.0
    terminal_height_m: float = 1.5
    sd_nlos_db: float = 6.0
    sd_los_db: float = 4.0

    def __post_init__(self) -> None:
        if self.base_station_height_m <= 0 or self.terminal_height_m <= 0:
            raise DomainError("antenna heights must be positive")
        if self.sd_nlos_db <= 0 or self.sd_los_db <= 0:
            raise DomainError("shadow-fading SDs must be positive")


_UMA_ENV_HEIGHT_M = 1.0  # h_E, the UMa effective environment height
_PROPAGATION_C = 3.0e8


def uma_nlos_pathloss(
    freq_ghz,
    dist2d_m,
    params: UmaParams = UmaParams(),
) -> np.ndarray | float:
    """TR 38.901 Table 7.4.1-1 UMa NLOS path loss in dB.

    ``max(PL_LOS, PL'_NLOS)`` with the dual-slope LOS model (breakpoint from
    the effective antenna heights) and

        PL'_NLOS = 13.54 + 39.08 log10(d3D) + 20 log10(f_GHz) - 0.6 (h_UT - 1.5)

    Inputs outside the standard's validity range (0.5-100 GHz, 10 m-5 km)
    are evaluated anyway but trigger a warning.
    """
    f = np.asarray(freq_ghz, dtype=np.float64)
    d2d = np.asarray(dist2d_m, dtype=np.float64)
    scalar = f.ndim == 0 and d2d.ndim == 0
    f, d2d = np.atleast_1d(f), np.atleast_1d(d2d)
    f, d2d = np.broadcast_arrays(f, d2d)
    if np.any(f <= 0) or np.any(d2d <= 0):
        raise DomainError("frequency and distance must be positive")
    if np.any(f < 0.5) or np.any(f > 100.0) or np.any(d2d < 10.0) or np.any(d2d > 5000.0):
        warnings.warn(
            "inputs outside the UMa validity range (0.5-100 GHz, 10 m-5 km)",
            stacklevel=2,
        )

    h_bs = params.base_station_height_m
    h_ut = params.terminal_height_m
    d3d = np.sqrt(d2d**2 + (h_bs - h_ut) ** 2)
    d_bp = 4.0 * (h_bs - _UMA_ENV_HEIGHT_M) * (h_ut - _UMA_ENV_HEIGHT_M) * (f * 1e9) / _PROPAGATION_C

    pl1 = 28.0 + 22.0 * np.log10(d3d) + 20.0 * np.log10(f)
    pl2 = (
        28.0
        + 40.0 * np.log10(d3d)
        + 20.0 * np.log10(f)
        - 9.0 * np.log10(d_bp**2 + (h_bs - h_ut) ** 2)
    )
    pl_los = np.where(d2d <= d_bp, pl1, pl2)
    pl_nlos = 13.54 + 39.08 * np.log10(d3d) + 20.0 * np.log10(f) - 0.6 * (h_ut - 1.5)
    out = np.maximum(pl_los, pl_nlos)
    return float(out[0]) if scalar else out


def uma_prediction_set(
    dataset: Dataset,
    params: UmaParams = UmaParams(),
    indices: np.ndarray | None = None,
    los_proxy: bool = False,
) -> PredictionSet:
    """Evaluate the UMa model over dataset links as a constant-SD predictor.

    By default every link uses the NLOS branch with ``sd_nlos_db`` (drive-test
    data carries no LOS labels). With ``los_proxy`` links whose obstruction
    depth is zero are treated as LOS: dual-slope LOS mean and ``sd_los_db``.
    """
    rows = dataset if indices is None else dataset.subset(indices)
    if len(rows) == 0:
        raise InputError("no rows to evaluate")
    mu = uma_nlos_pathloss(rows.freq_mhz / 1000.0, rows.dist_m, params)
    sigma = np.full(len(rows), params.sd_nlos_db)
    if los_proxy:
        los = rows.obs_m == 0.0
        if np.any(los):
            h_bs, h_ut = params.base_station_height_m, params.terminal_height_m
            f = rows.freq_mhz[los] / 1000.0
            d2d = rows.dist_m[los]
            d3d = np.sqrt(d2d**2 + (h_bs - h_ut) ** 2)
            d_bp = 4.0 * (h_bs - _UMA_ENV_HEIGHT_M) * (h_ut - _UMA_ENV_HEIGHT_M) * (f * 1e9) / _PROPAGATION_C
            pl1 = 28.0 + 22.0 * np.log10(d3d) + 20.0 * np.log10(f)
            pl2 = (
                28.0
                + 40.0 * np.log10(d3d)
                + 20.0 * np.log10(f)
                - 9.0 * np.log10(d_bp**2 + (h_bs - h_ut) ** 2)
            )
            mu = np.asarray(mu, dtype=np.float64)
            mu[los] = np.where(d2d <= d_bp, pl1, pl2)
            sigma[los] = params.sd_los_db
    return PredictionSet(rows.pl_db, mu, sigma)


class HomoscedasticMseModel:
    """MSE-trained mean predictor with a single validation-residual SD."""

    def __init__(self, net: MlpNetwork, residual_sd: float, normalizer: NormStats):
        if residual_sd <= 0:
            raise DomainError("residual_sd must be positive")
        self.net = net
        self.residual_sd = float(residual_sd)
        self.normalizer = normalizer

    def predict_mean(self, features: np.ndarray) -> np.ndarray:
        out, _ = forward(self.net, features, Mode.INFER)
        return out[:, 0]

    def predict_links(self, freq_mhz, dist_m, obs_m) -> tuple[np.ndarray, np.ndarray]:
        feats = self.normalizer.apply_links(freq_mhz, dist_m, obs_m)
        mu = self.predict_mean(feats)
        return mu, np.full(len(mu), self.residual_sd)

    def parameter_count(self) -> int:
        return self.net.parameter_count()


def mse_loss_and_grads(
    net: MlpNetwork,
    features: np.ndarray,
    targets: np.ndarray,
    rng: np.random.Generator | None = None,
    mode: Mode = Mode.TRAIN,
) -> tuple[float, list[np.ndarray]]:
    """Mean squared error over a batch and its parameter gradients."""
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    out, cache = forward(net, features, mode, rng)
    resid = out[:, 0] - targets
    loss = float(np.mean(np.square(resid)))
    out_grad = (2.0 * resid / len(targets))[:, None]
    grads, _ = backward(net, cache, out_grad)
    return loss, grads


def train_mse(
    dataset: Dataset,
    train_indices: np.ndarray,
    config: TrainConfig,
    seed: int = 0,
    hidden: int = 64,
) -> tuple[HomoscedasticMseModel, TrainingHistory]:
    """Train the MSE baseline under the standard protocol.

    The training rows are split 80/20 internally (derived from ``seed``); the
    network matches the heteroscedastic models' depth and width with a single
    output. The constant SD is the population SD of the residuals on the same
    validation split used for early stopping, evaluated at the best epoch.
    """
    train_indices = np.asarray(train_indices)
    if len(train_indices) < 2:
        raise InputError("need at least two training rows")
    fit_idx, val_idx = split_train_val(train_indices, config.val_fraction, seed)

    norm = fit_normalizer(dataset, fit_idx)
    x_fit = norm.apply(dataset.subset(fit_idx).raw_features())
    y_fit = dataset.pl_db[fit_idx]
    x_val = norm.apply(dataset.subset(val_idx).raw_features())
    y_val = dataset.pl_db[val_idx]

    net = init_network(
        [3, hidden, hidden, 1],
        dropout_rate=config.dropout,
        seed=child_seed(seed, "init"),
    )
    if config.output_prior_init:
        net.layers[-1].biases[:] = float(np.mean(y_fit))
    dropout_rng = stream(seed, "dropout")

    def batch_grad(idx: np.ndarray, epoch: int) -> tuple[float, list[np.ndarray]]:
        return mse_loss_and_grads(net, x_fit[idx], y_fit[idx], dropout_rng, Mode.TRAIN)

    def val_loss() -> float:
        out, _ = forward(net, x_val, Mode.INFER)
        return float(np.mean(np.square(out[:, 0] - y_val)))

    history = fit(
        net.parameters(), batch_grad, val_loss, len(fit_idx), config, stream(seed, "batches")
    )
    if history.failed:
        return HomoscedasticMseModel(net, 1.0, norm), history

    mu_val = forward(net, x_val, Mode.INFER)[0][:, 0]
    residual_sd = float(np.std(y_val - mu_val))
    if residual_sd == 0.0:
        residual_sd = 1e-9  # realizable noiseless targets; keep SD positive
    return HomoscedasticMseModel(net, residual_sd, norm), history


def mse_prediction_set(
    model: HomoscedasticMseModel,
    dataset: Dataset,
    indices: np.ndarray | None = None,
) -> PredictionSet:
    """Constant-SD prediction set for the MSE baseline over dataset rows."""
    rows = dataset if indices is None else dataset.subset(indices)
    if len(rows) == 0:
        raise InputError("no rows to evaluate")
    mu, sigma = model.predict_links(rows.freq_mhz, rows.dist_m, rows.obs_m)
    return PredictionSet(rows.pl_db, mu, sigma)
