"""Model persistence: a single JSON document per trained model.

Format ``heterloss-model-v1``: layer sizes, activations, dropout rates and
row-major weight arrays per network block, the fitted feature normalization
statistics, and an architecture tag (``shared``/``partial``/``independent``
for heteroscedastic models, ``mse`` for the homoscedastic baseline, which
adds its constant ``residual_sd``).
"""

from __future__ import annotations

import json

import numpy as np

from .baselines import HomoscedasticMseModel
from .data import NormStats
from .errors import InputError
from .models import ArchitectureKind, HeteroModel
from .nn import DenseLayer, MlpNetwork

FORMAT_TAG = "heterloss-model-v1"


def _network_to_dict(net: MlpNetwork) -> dict:
    return {
        "layer_sizes": net.layer_sizes(),
        "activations": [layer.activation for layer in net.layers],
        "dropout_rates": [layer.dropout_rate for layer in net.layers],
        "weights": [layer.weights.ravel().tolist() for layer in net.layers],
        "biases": [layer.biases.tolist() for layer in net.layers],
    }


def _network_from_dict(doc: dict) -> MlpNetwork:
    sizes = doc["layer_sizes"]
    layers = []
    for i, (act, rate, w, b) in enumerate(
        zip(doc["activations"], doc["dropout_rates"], doc["weights"], doc["biases"])
    ):
        weights = np.array(w, dtype=np.float64).reshape(sizes[i + 1], sizes[i])
        layers.append(DenseLayer(weights, np.array(b, dtype=np.float64), act, rate))
    return MlpNetwork(layers, input_dim=sizes[0])


def _normalizer_to_dict(norm: NormStats | None) -> dict | None:
    if norm is None:
        return None
    return {
        "feature_names": list(norm.feature_names),
        "transforms": list(norm.transforms),
        "means": norm.means.tolist(),
        "sds": norm.sds.tolist(),
    }


def _normalizer_from_dict(doc: dict | None) -> NormStats | None:
    if doc is None:
        return None
    return NormStats(
        transforms=tuple(doc["transforms"]),
        means=np.array(doc["means"], dtype=np.float64),
        sds=np.array(doc["sds"], dtype=np.float64),
        feature_names=tuple(doc["feature_names"]),
    )


def model_to_dict(model: HeteroModel | HomoscedasticMseModel) -> dict:
    if isinstance(model, HeteroModel):
        return {
            "format": FORMAT_TAG,
            "architecture": model.kind.value,
            "input_dim": model.input_dim,
            "networks": {
                name: _network_to_dict(net) for name, net in model.networks.items()
            },
            "normalizer": _normalizer_to_dict(model.normalizer),
        }
    if isinstance(model, HomoscedasticMseModel):
        return {
            "format": FORMAT_TAG,
            "architecture": "mse",
            "input_dim": model.net.input_dim,
            "networks": {"net": _network_to_dict(model.net)},
            "normalizer": _normalizer_to_dict(model.normalizer),
            "residual_sd": model.residual_sd,
        }
    raise InputError(f"cannot serialize {type(model).__name__}")


def model_from_dict(doc: dict) -> HeteroModel | HomoscedasticMseModel:
    if doc.get("format") != FORMAT_TAG:
        raise InputError(f"unsupported model format {doc.get('format')!r}")
    norm = _normalizer_from_dict(doc.get("normalizer"))
    arch = doc.get("architecture")
    nets = {name: _network_from_dict(d) for name, d in doc["networks"].items()}
    if arch == "mse":
        if norm is None:
            raise InputError("mse model document lacks a normalizer")
        return HomoscedasticMseModel(nets["net"], doc["residual_sd"], norm)
    return HeteroModel(ArchitectureKind(arch), nets, norm)


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> HeteroModel | HomoscedasticMseModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not a valid model file ({exc})") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{path}: not a valid model file")
    return model_from_dict(doc)
