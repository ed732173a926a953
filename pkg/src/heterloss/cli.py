"""Command-line front end.

Subcommands: ``synth`` (generate synthetic drive-test data), ``train`` (run
the cross-validation experiment), ``evaluate`` (score a saved model or the
UMa baseline on a CSV), ``predict`` (one link), ``heatmap`` (interval-width
rasters over a height grid).

Configuration values can come from an INI-style file of ``key = value``
sections passed with ``--config``; explicit flags win over the file. The
``HETERLOSS_SEED`` environment variable supplies a global seed fallback.

Exit codes: 0 success, 2 usage/configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys

import numpy as np

from . import __version__
from .baselines import UmaParams, uma_prediction_set
from .data import (
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    write_csv,
)
from .errors import (
    ConfigError,
    DomainError,
    HeterlossError,
    InputError,
    ShapeError,
)
from .harness import NLL_KINDS, MSE_KIND, run_experiment
from .heatmap import HeatmapJob, render_heatmap
from .metrics import MetricsRow, PredictionSet, evaluate_predictions, z_critical
from .serialize import load_model
from .terrain import load_demo_heightmap, read_ascii_grid, write_ascii_grid, write_pgm
from .training import TrainConfig

ENV_SEED = "HETERLOSS_SEED"


class _Config:
    """Layered option lookup: flag > config file section > default."""

    def __init__(self, path: str | None):
        self.parser = configparser.ConfigParser()
        if path is not None:
            if not os.path.exists(path):
                raise ConfigError(f"config file not found: {path}")
            self.parser.read(path)

    def get(self, section: str, key: str, flag_value, default, cast=float):
        if flag_value is not None:
            return flag_value
        if self.parser.has_option(section, key):
            raw = self.parser.get(section, key)
            try:
                return cast(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from exc
        return default

    def seed(self, section: str, flag_value) -> int:
        if flag_value is not None:
            return flag_value
        if self.parser.has_option(section, "seed"):
            return self.parser.getint(section, "seed")
        env = os.environ.get(ENV_SEED)
        if env is not None:
            try:
                return int(env)
            except ValueError as exc:
                raise ConfigError(f"{ENV_SEED} must be an integer, got {env!r}") from exc
        return 0


def _parse_columns(spec: str | None) -> dict[str, str] | None:
    if not spec:
        return None
    mapping = {}
    for part in spec.split(","):
        if "=" not in part:
            raise ConfigError(f"--columns entries must be name=header, got {part!r}")
        k, v = part.split("=", 1)
        mapping[k.strip()] = v.strip()
    return mapping


def _load_dataset(path: str, columns: str | None, with_oracle: bool = False):
    if not os.path.exists(path):
        raise InputError(f"data file not found: {path}")
    result = load_csv(path, _parse_columns(columns), with_oracle=with_oracle)
    for line_no, reason in result.rejected:
        print(f"warning: {path}:{line_no}: rejected row: {reason}", file=sys.stderr)
    return result.dataset


def _load_grid(value: str, which: str):
    if value == "demo":
        surface, ground = load_demo_heightmap()
        return surface if which == "surface" else ground
    if not os.path.exists(value):
        raise InputError(f"{which} grid not found: {value}")
    return read_ascii_grid(value)


# --- subcommand handlers -------------------------------------------------------


def _cmd_synth(args: argparse.Namespace, cfg: _Config) -> int:
    seed = cfg.seed("synth", args.seed)
    spec = SyntheticSpec.default(
        rows_per_group=int(cfg.get("synth", "rows_per_group", args.rows_per_group, 120_000, int)),
        seed=seed,
        beta_db_per_m=cfg.get("synth", "beta_db_per_m", None, 0.35),
        obs_saturation_m=cfg.get("synth", "obs_saturation_m", None, 50.0),
        sigma_min_db=cfg.get("synth", "sigma_min_db", None, 2.0),
        sigma_gain_db=cfg.get("synth", "sigma_gain_db", None, 8.0),
        obs_sigma_scale_m=cfg.get("synth", "obs_sigma_scale_m", None, 30.0),
        noiseless=bool(args.noiseless),
    )
    dataset = generate_synthetic(spec)
    write_csv(dataset, args.out, oracle=args.oracle)
    print(f"wrote {len(dataset)} rows to {args.out}")
    return 0


def _cmd_train(args: argparse.Namespace, cfg: _Config) -> int:
    if args.folds != "logo":
        raise ConfigError(f"unsupported fold scheme {args.folds!r}")
    kinds: list[str] = []
    for token in args.arch.split(","):
        token = token.strip()
        if token == "all":
            kinds.extend(k for k in NLL_KINDS if k not in kinds)
        elif token in NLL_KINDS + (MSE_KIND,):
            if token not in kinds:
                kinds.append(token)
        else:
            raise ConfigError(f"unknown architecture {token!r}")
    if args.mse_baseline and MSE_KIND not in kinds:
        kinds.append(MSE_KIND)

    patience: int | None
    raw_patience = cfg.get("train", "patience", args.patience, "10", str)
    patience = None if str(raw_patience).lower() in ("none", "inf") else int(raw_patience)

    config = TrainConfig(
        batch_size=int(cfg.get("train", "batch_size", args.batch_size, 1024, int)),
        learning_rate=cfg.get("train", "learning_rate", args.learning_rate, 0.01),
        dropout=cfg.get("train", "dropout", args.dropout, 0.25),
        max_epochs=int(cfg.get("train", "max_epochs", args.max_epochs, 100, int)),
        patience=patience,
        min_delta=cfg.get("train", "min_delta", args.min_delta, 1e-3),
        repeats=int(cfg.get("train", "repeats", args.repeats, 10, int)),
        val_fraction=cfg.get("train", "val_fraction", args.val_fraction, 0.2),
        confidence=cfg.get("train", "confidence", args.confidence, 0.95),
        seed=cfg.seed("train", args.seed),
        var_warmup_epochs=0 if args.no_warmup else 5,
    )

    dataset = _load_dataset(args.data, args.columns)
    result = run_experiment(
        dataset,
        kinds,
        config,
        out_dir=args.out,
        save_models=not args.no_save_models,
        pairing=args.ttest_pairing,
    )
    n_failed = len(result.report.failures)
    print(
        f"completed {len(result.results)} runs "
        f"({n_failed} failed); outputs in {args.out}"
    )
    return 0


def _evaluate_rows(label: str, pset: PredictionSet, confidence: float) -> str:
    row = evaluate_predictions(pset, confidence)
    fields = ",".join(f"{getattr(row, f):.6g}" for f in row.FIELDS)
    return f"{label},{len(pset)},{fields}"


def _cmd_evaluate(args: argparse.Namespace, cfg: _Config) -> int:
    confidence = cfg.get("evaluate", "confidence", args.confidence, 0.95)
    dataset = _load_dataset(args.data, args.columns)
    if args.uma:
        params = UmaParams(
            base_station_height_m=cfg.get("uma", "base_station_height_m", args.uma_h_bs, 25.0),
            terminal_height_m=cfg.get("uma", "terminal_height_m", args.uma_h_ut, 1.5),
            sd_nlos_db=cfg.get("uma", "sd_nlos_db", args.uma_sd_nlos, 6.0),
            sd_los_db=cfg.get("uma", "sd_los_db", args.uma_sd_los, 4.0),
        )

        def predict(rows):
            return uma_prediction_set(rows, params, los_proxy=args.los_proxy)

        label = "uma"
    else:
        if args.model is None:
            raise ConfigError("evaluate needs --model or --uma")
        model = load_model(args.model)

        def predict(rows):
            mu, sigma = model.predict_links(rows.freq_mhz, rows.dist_m, rows.obs_m)
            return PredictionSet(rows.pl_db, mu, sigma)

        label = os.path.basename(args.model)

    print("label,n," + ",".join(MetricsRow.FIELDS))
    if args.per_group:
        for name in dataset.group_names():
            rows = dataset.subset(dataset.group_indices(name))
            print(_evaluate_rows(f"{label}:{name}", predict(rows), confidence))
    else:
        print(_evaluate_rows(label, predict(dataset), confidence))
    return 0


def _cmd_predict(args: argparse.Namespace, cfg: _Config) -> int:
    confidence = cfg.get("predict", "confidence", args.confidence, 0.95)
    if not os.path.exists(args.model):
        raise InputError(f"model file not found: {args.model}")
    model = load_model(args.model)
    mu, sigma = model.predict_links([args.freq], [args.dist], [args.obs])
    z = z_critical(confidence)
    lower = mu[0] - z * sigma[0]
    upper = mu[0] + z * sigma[0]
    print(f"{mu[0]:.6f},{sigma[0]:.6f},{lower:.6f},{upper:.6f}")
    return 0


def _cmd_heatmap(args: argparse.Namespace, cfg: _Config) -> int:
    if not os.path.exists(args.model):
        raise InputError(f"model file not found: {args.model}")
    model = load_model(args.model)
    surface = _load_grid(args.surface, "surface")
    ground = _load_grid(args.ground, "ground") if args.ground else None
    job = HeatmapJob(
        surface=surface,
        ground=ground,
        tx_row=int(cfg.get("heatmap", "tx_row", args.tx_row, -1, int)),
        tx_col=int(cfg.get("heatmap", "tx_col", args.tx_col, -1, int)),
        tx_height_agl_m=cfg.get("heatmap", "tx_height_agl_m", args.tx_height, 20.0),
        rx_height_agl_m=cfg.get("heatmap", "rx_height_agl_m", args.rx_height, 1.5),
        frequency_mhz=cfg.get("heatmap", "frequency_mhz", args.freq, 3500.0),
        confidence=cfg.get("heatmap", "confidence", args.confidence, 0.95),
        indoor_clutter_threshold_m=cfg.get(
            "heatmap", "indoor_clutter_threshold_m", args.indoor_threshold, 2.0
        ),
        use_effective_earth=not args.no_effective_earth,
    )
    result = render_heatmap(model, job)
    paths = []
    for name, grid in (("width", result.width), ("mean", result.mean), ("sd", result.sd)):
        path = f"{args.out_prefix}_{name}.asc"
        write_ascii_grid(grid, path)
        paths.append(path)
        if args.pgm:
            write_pgm(grid, f"{args.out_prefix}_{name}.pgm")
    print("wrote " + ", ".join(paths))
    return 0


# --- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heterloss",
        description="Heteroscedastic neural path loss models with "
        "link-specific prediction intervals.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="INI-style configuration file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic drive-test CSV")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--rows-per-group", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--noiseless", action="store_true", help="emit the noise-free ground truth")
    p.add_argument("--oracle", action="store_true", help="include true_mu/true_sigma columns")
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("train", help="run the cross-validation experiment")
    p.add_argument("--data", required=True, help="input CSV")
    p.add_argument("--out", required=True, help="results directory")
    p.add_argument(
        "--arch",
        default="all",
        help="comma list of shared,partial,independent,mse or 'all'",
    )
    p.add_argument("--folds", default="logo", choices=["logo"])
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--patience", default=None, help="epochs, or 'none' to disable")
    p.add_argument("--min-delta", type=float, default=None)
    p.add_argument("--val-fraction", type=float, default=None)
    p.add_argument("--confidence", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-warmup", action="store_true", help="disable variance-head warm-up")
    p.add_argument("--mse-baseline", action="store_true", help="also train the MSE baseline")
    p.add_argument("--no-save-models", action="store_true")
    p.add_argument("--ttest-pairing", default="runs", choices=["runs", "fold_means"])
    p.add_argument("--columns", default=None, help="schema mapping name=header,...")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("evaluate", help="score a model (or the UMa baseline) on a CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--model", default=None, help="model JSON path")
    p.add_argument("--uma", action="store_true", help="evaluate the UMa empirical baseline")
    p.add_argument("--los-proxy", action="store_true", help="treat o=0 links as LOS")
    p.add_argument("--uma-h-bs", type=float, default=None)
    p.add_argument("--uma-h-ut", type=float, default=None)
    p.add_argument("--uma-sd-nlos", type=float, default=None)
    p.add_argument("--uma-sd-los", type=float, default=None)
    p.add_argument("--confidence", type=float, default=None)
    p.add_argument("--per-group", action="store_true")
    p.add_argument("--columns", default=None)
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("predict", help="predict one link")
    p.add_argument("--model", required=True)
    p.add_argument("--freq", type=float, required=True, help="MHz")
    p.add_argument("--dist", type=float, required=True, help="m")
    p.add_argument("--obs", type=float, required=True, help="m")
    p.add_argument("--confidence", type=float, default=None)
    p.set_defaults(handler=_cmd_predict)

    p = sub.add_parser("heatmap", help="render interval-width rasters")
    p.add_argument("--model", required=True)
    p.add_argument("--surface", required=True, help="surface grid path, or 'demo'")
    p.add_argument("--ground", default=None, help="ground grid path, or 'demo'")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--tx-row", type=int, default=None)
    p.add_argument("--tx-col", type=int, default=None)
    p.add_argument("--tx-height", type=float, default=None, help="m AGL")
    p.add_argument("--rx-height", type=float, default=None, help="m AGL")
    p.add_argument("--freq", type=float, default=None, help="MHz")
    p.add_argument("--confidence", type=float, default=None)
    p.add_argument("--indoor-threshold", type=float, default=None, help="clutter m")
    p.add_argument("--no-effective-earth", action="store_true")
    p.add_argument("--pgm", action="store_true", help="also write quick-look PGMs")
    p.set_defaults(handler=_cmd_heatmap)

    return parser


_USAGE_ERRORS = (ConfigError, InputError, DomainError, ShapeError, FileNotFoundError)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _Config(args.config)
        return args.handler(args, cfg)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HeterlossError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
