"""Leave-one-group-out experiment orchestration.

Protocol: one fold per measurement group; within each fold the remaining
groups are split 80/20 into training and validation, repeated with fresh
splits and initializations; training runs minibatch Adam with early stopping
under a 100-epoch cap; test metrics come from the best-validation weights on
the untouched holdout group.

Runs are paired across architectures: the train/validation split for (fold,
run) is derived without the architecture in the seed chain, so paired t-tests
compare models trained on identical data partitions.

The homoscedastic MSE baseline can be scheduled alongside the heteroscedastic
architectures under the kind name ``"mse"``; its curve values are MSE rather
than NLL and are labelled by the shared column names.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import baselines, serialize
from .data import Dataset, fit_normalizer
from .errors import ConfigError, InputError
from .metrics import (
    MetricsRow,
    PredictionSet,
    TTestResult,
    bonferroni,
    evaluate_predictions,
    paired_t_test,
)
from .models import (
    ArchitectureKind,
    Mode,
    build_default,
    nll_gradients,
    nll_loss_value,
    warm_start_output_biases,
)
from .rng import child_seed, stream
from .training import TrainConfig, TrainingHistory, fit, split_train_val

NLL_KINDS = tuple(k.value for k in ArchitectureKind)
MSE_KIND = "mse"
ALL_KINDS = NLL_KINDS + (MSE_KIND,)


@dataclass(frozen=True)
class LogoFold:
    """One leave-one-group-out fold."""

    holdout: str
    train_groups: tuple[str, ...]


def logo_folds(dataset: Dataset) -> list[LogoFold]:
    """One fold per group, each group held out exactly once."""
    groups = dataset.group_names()
    if len(groups) < 2:
        raise ConfigError("leave-one-group-out needs at least 2 groups")
    return [
        LogoFold(holdout=g, train_groups=tuple(x for x in groups if x != g))
        for g in groups
    ]


@dataclass
class FoldResult:
    """Outcome of one (kind, fold, run) training."""

    kind: str
    fold: str
    run: int
    history: TrainingHistory
    metrics: MetricsRow | None
    model: object | None = None
    model_path: str | None = None

    @property
    def failed(self) -> bool:
        return self.history.failed

    def best_train_loss(self) -> float:
        return self.history.train_curve[self.history.best_epoch]

    def best_val_loss(self) -> float:
        return self.history.val_curve[self.history.best_epoch]


def _run_seeds(config: TrainConfig, kind: str, fold: LogoFold, run: int) -> tuple[int, int]:
    """(split seed shared across kinds, kind-specific model seed)."""
    split_seed = child_seed(config.seed, "run", fold.holdout, run)
    model_seed = child_seed(config.seed, "run", fold.holdout, run, kind)
    return split_seed, model_seed


def train_one(
    kind: str,
    dataset: Dataset,
    fold: LogoFold,
    config: TrainConfig,
    run: int = 0,
) -> FoldResult:
    """Train one model on one fold and evaluate it on the holdout group.

    Fully deterministic in (kind, dataset, fold, config, run). Holdout rows
    never reach normalization, batching or early stopping; they are read only
    once training has finished.
    """
    if kind not in ALL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}")
    holdout_idx = dataset.group_indices(fold.holdout)
    train_mask = dataset.group != fold.holdout
    train_idx = np.flatnonzero(train_mask)
    if len(train_idx) == 0:
        raise InputError(f"fold {fold.holdout}: no training rows")

    split_seed, model_seed = _run_seeds(config, kind, fold, run)

    if kind == MSE_KIND:
        model, history = baselines.train_mse(dataset, train_idx, config, seed=split_seed)
        metrics = None
        if not history.failed:
            pset = baselines.mse_prediction_set(model, dataset, holdout_idx)
            metrics = evaluate_predictions(pset, config.confidence)
        return FoldResult(kind, fold.holdout, run, history, metrics, model)

    fit_idx, val_idx = split_train_val(train_idx, config.val_fraction, split_seed)
    norm = fit_normalizer(dataset, fit_idx)
    x_fit = norm.apply(dataset.subset(fit_idx).raw_features())
    y_fit = dataset.pl_db[fit_idx]
    x_val = norm.apply(dataset.subset(val_idx).raw_features())
    y_val = dataset.pl_db[val_idx]

    model = build_default(kind, input_dim=3, seed=model_seed, dropout_rate=config.dropout)
    model.normalizer = norm
    if config.output_prior_init:
        warm_start_output_biases(
            model, float(np.mean(y_fit)), float(np.log(max(np.var(y_fit), 1e-12)))
        )
    dropout_rng = stream(model_seed, "dropout")

    def batch_grad(idx: np.ndarray, epoch: int):
        scale = (
            config.var_warmup_scale if epoch < config.var_warmup_epochs else 1.0
        )
        return nll_gradients(
            model, x_fit[idx], y_fit[idx], dropout_rng, Mode.TRAIN, var_grad_scale=scale
        )

    def val_loss() -> float:
        batch = model.predict(x_val, Mode.INFER)
        return nll_loss_value(batch.mean, batch.variance, y_val)

    history = fit(
        model.parameters(),
        batch_grad,
        val_loss,
        len(fit_idx),
        config,
        stream(model_seed, "batches"),
    )

    metrics = None
    if not history.failed:
        rows = dataset.subset(holdout_idx)
        mu, sigma = model.predict_links(rows.freq_mhz, rows.dist_m, rows.obs_m)
        metrics = evaluate_predictions(
            PredictionSet(rows.pl_db, mu, sigma), config.confidence
        )
    return FoldResult(kind, fold.holdout, run, history, metrics, model)


@dataclass(frozen=True)
class Comparison:
    kind_a: str
    kind_b: str
    metric: str
    t: float
    p_value: float
    dof: int
    degenerate: bool
    significant: bool


@dataclass
class ComparisonReport:
    """Aggregates and pairwise tests over all (kind, fold, run) results."""

    aggregates: dict[str, dict[str, float]]
    comparisons: list[Comparison]
    alpha: float
    corrected_alpha: float
    pairing: str
    n_folds: int
    repeats: int
    failures: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "aggregates": self.aggregates,
            "comparisons": [dataclasses.asdict(c) for c in self.comparisons],
            "alpha": self.alpha,
            "corrected_alpha": self.corrected_alpha,
            "pairing": self.pairing,
            "n_folds": self.n_folds,
            "repeats": self.repeats,
            "failures": self.failures,
        }


@dataclass
class ExperimentResult:
    results: list[FoldResult]
    report: ComparisonReport


def _population_sd(values: np.ndarray) -> float:
    return float(np.std(values))


def aggregate_metrics(results: list[FoldResult]) -> dict[str, dict[str, float]]:
    """Per-kind mean/SD (and max magnitude for normality metrics).

    Failed runs are excluded from the statistics but counted.
    """
    out: dict[str, dict[str, float]] = {}
    kinds = []
    for r in results:
        if r.kind not in kinds:
            kinds.append(r.kind)
    for kind in kinds:
        rows = [r for r in results if r.kind == kind]
        ok = [r for r in rows if not r.failed]
        agg: dict[str, float] = {
            "n_runs": float(len(rows)),
            "n_failed": float(len(rows) - len(ok)),
        }
        if ok:
            for name in MetricsRow.FIELDS:
                vals = np.array([getattr(r.metrics, name) for r in ok])
                agg[f"{name}_mean"] = float(np.mean(vals))
                agg[f"{name}_sd"] = _population_sd(vals)
                if name in ("kurtosis", "skewness"):
                    agg[f"{name}_max_abs"] = float(np.max(np.abs(vals)))
            train = np.array([r.best_train_loss() for r in ok])
            val = np.array([r.best_val_loss() for r in ok])
            agg["train_loss_mean"] = float(np.mean(train))
            agg["train_loss_sd"] = _population_sd(train)
            agg["val_loss_mean"] = float(np.mean(val))
            agg["val_loss_sd"] = _population_sd(val)
        out[kind] = agg
    return out


COMPARED_METRICS = ("rmse", "picp", "mpiw")


def compare_kinds(
    results: list[FoldResult],
    alpha: float = 0.05,
    pairing: str = "runs",
) -> tuple[list[Comparison], float]:
    """Paired t-tests between adjacently ranked kinds on each table metric.

    Kinds are ranked by mean RMSE; each adjacent pair is tested on RMSE, PICP
    and MPIW with a Bonferroni-corrected threshold over the number of pairs.
    ``pairing="runs"`` pairs all (fold, run) points; ``"fold_means"`` pairs
    per-fold means.
    """
    if pairing not in ("runs", "fold_means"):
        raise ConfigError(f"unknown pairing {pairing!r}")
    ok = [r for r in results if not r.failed]
    by_kind: dict[str, dict[tuple[str, int], MetricsRow]] = {}
    for r in ok:
        by_kind.setdefault(r.kind, {})[(r.fold, r.run)] = r.metrics
    ranked = sorted(
        by_kind,
        key=lambda k: float(np.mean([m.rmse for m in by_kind[k].values()])),
    )
    n_pairs = max(1, len(ranked) - 1)
    corrected = bonferroni(alpha, n_pairs)

    comparisons: list[Comparison] = []
    for a, b in zip(ranked, ranked[1:]):
        shared = sorted(set(by_kind[a]) & set(by_kind[b]))
        if len(shared) < 2:
            continue
        for metric in COMPARED_METRICS:
            va = np.array([getattr(by_kind[a][key], metric) for key in shared])
            vb = np.array([getattr(by_kind[b][key], metric) for key in shared])
            if pairing == "fold_means":
                folds = sorted({key[0] for key in shared})
                va = np.array(
                    [np.mean([getattr(by_kind[a][k], metric) for k in shared if k[0] == f]) for f in folds]
                )
                vb = np.array(
                    [np.mean([getattr(by_kind[b][k], metric) for k in shared if k[0] == f]) for f in folds]
                )
                if len(folds) < 2:
                    continue
            res: TTestResult = paired_t_test(va, vb)
            comparisons.append(
                Comparison(
                    kind_a=a,
                    kind_b=b,
                    metric=metric,
                    t=res.t,
                    p_value=res.p_value,
                    dof=res.dof,
                    degenerate=res.degenerate,
                    significant=bool(res.p_value < corrected and not res.degenerate),
                )
            )
    return comparisons, corrected


def run_experiment(
    dataset: Dataset,
    kinds: list[str] | tuple[str, ...],
    config: TrainConfig,
    out_dir: str | None = None,
    save_models: bool = True,
    alpha: float = 0.05,
    pairing: str = "runs",
) -> ExperimentResult:
    """kinds x folds x repeats training runs plus aggregation and t-tests.

    Per-run failures (diverged training) are recorded in the report without
    aborting the experiment. With ``out_dir`` the standard output files are
    written: runs.csv, curves.csv, aggregate.csv, report.json and one model
    JSON per successful run.
    """
    for kind in kinds:
        if kind not in ALL_KINDS:
            raise ConfigError(f"unknown model kind {kind!r}")
    folds = logo_folds(dataset)
    results: list[FoldResult] = []
    for kind in kinds:
        for fold in folds:
            for run in range(config.repeats):
                results.append(train_one(kind, dataset, fold, config, run))

    comparisons, corrected = compare_kinds(results, alpha, pairing)
    report = ComparisonReport(
        aggregates=aggregate_metrics(results),
        comparisons=comparisons,
        alpha=alpha,
        corrected_alpha=corrected,
        pairing=pairing,
        n_folds=len(folds),
        repeats=config.repeats,
        failures=[
            {"kind": r.kind, "fold": r.fold, "run": r.run, "reason": r.history.failure_reason}
            for r in results
            if r.failed
        ],
    )

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_runs_csv(results, os.path.join(out_dir, "runs.csv"))
        write_curves_csv(results, os.path.join(out_dir, "curves.csv"))
        write_aggregate_csv(report, os.path.join(out_dir, "aggregate.csv"))
        with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
            json.dump(report.as_dict(), fh, indent=2)
        if save_models:
            model_dir = os.path.join(out_dir, "models")
            os.makedirs(model_dir, exist_ok=True)
            for r in results:
                if r.failed or r.model is None:
                    continue
                path = os.path.join(model_dir, f"{r.kind}_{r.fold}_{r.run}.json")
                serialize.save_model(r.model, path)
                r.model_path = path
    return ExperimentResult(results=results, report=report)


@dataclass
class CurveSummary:
    """Epoch-aligned mean/SD loss curves for one architecture."""

    train_mean: np.ndarray
    train_sd: np.ndarray
    val_mean: np.ndarray
    val_sd: np.ndarray
    padded_counts: np.ndarray  # per epoch: curves extended by carrying their last value
    n_curves: int


def mean_sd_curves(results: list[FoldResult]) -> CurveSummary:
    """Aggregate loss curves across runs of one architecture.

    Early-stopped (shorter) curves are padded by carrying their final value;
    the padding is reported per epoch so plots can flag it.
    """
    ok = [r for r in results if not r.failed and r.history.val_curve]
    if not ok:
        raise InputError("no successful runs to aggregate")
    n_epochs = max(r.history.epochs_run for r in ok)

    def padded(curve: list[float]) -> np.ndarray:
        arr = np.empty(n_epochs)
        arr[: len(curve)] = curve
        arr[len(curve) :] = curve[-1]
        return arr

    train = np.stack([padded(r.history.train_curve[: r.history.epochs_run]) for r in ok])
    val = np.stack([padded(r.history.val_curve) for r in ok])
    padded_counts = np.array(
        [sum(1 for r in ok if r.history.epochs_run <= e) for e in range(n_epochs)]
    )
    return CurveSummary(
        train_mean=train.mean(axis=0),
        train_sd=train.std(axis=0),
        val_mean=val.mean(axis=0),
        val_sd=val.std(axis=0),
        padded_counts=padded_counts,
        n_curves=len(ok),
    )


def write_runs_csv(results: list[FoldResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["architecture", "fold", "run", *MetricsRow.FIELDS])
        for r in results:
            if r.failed or r.metrics is None:
                continue
            writer.writerow(
                [r.kind, r.fold, r.run]
                + [repr(getattr(r.metrics, f)) for f in MetricsRow.FIELDS]
            )


def write_curves_csv(results: list[FoldResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["architecture", "fold", "run", "epoch", "train_nll", "val_nll"])
        for r in results:
            for epoch, (t, v) in enumerate(zip(r.history.train_curve, r.history.val_curve)):
                writer.writerow([r.kind, r.fold, r.run, epoch, repr(t), repr(v)])


AGGREGATE_COLUMNS = (
    "n_runs",
    "n_failed",
    "rmse_mean",
    "rmse_sd",
    "nll_mean",
    "nll_sd",
    "picp_mean",
    "picp_sd",
    "mpiw_mean",
    "mpiw_sd",
    "kurtosis_mean",
    "kurtosis_sd",
    "kurtosis_max_abs",
    "skewness_mean",
    "skewness_sd",
    "skewness_max_abs",
    "train_loss_mean",
    "train_loss_sd",
    "val_loss_mean",
    "val_loss_sd",
)


def write_aggregate_csv(report: ComparisonReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["architecture", *AGGREGATE_COLUMNS])
        for kind, agg in report.aggregates.items():
            writer.writerow(
                [kind] + [repr(agg[c]) if c in agg else "" for c in AGGREGATE_COLUMNS]
            )
