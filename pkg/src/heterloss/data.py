"""Dataset schema, CSV ingestion, feature normalization, synthetic data.

A dataset is a flat table of radio links. Each row carries the three model
features — carrier frequency (MHz), link distance (m), total obstruction
depth (m) — a group label identifying the measurement campaign the row came
from, and the measured path loss (dB). Group labels drive leave-one-group-out
cross-validation.

The synthetic generator produces drive-test-shaped data with a *known*
heteroscedastic ground truth, so calibration claims can be checked against an
oracle instead of unavailable measurement data. Its mean is free-space path
loss plus a saturating obstruction penalty; its noise SD grows with
obstruction depth:

    mean(f, d, o)  = 32.45 + 20*log10(d_km) + 20*log10(f_MHz) + beta * o/(1 + o/o_sat)
    sigma(o)       = sigma_min + sigma_gain * (1 - exp(-o / o_sigma_scale))
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, InputError
from .rng import stream

#: Carrier frequencies (MHz) used by the bundled drive-test campaigns.
DRIVE_TEST_FREQUENCIES_MHZ = (449.0, 915.0, 1802.0, 2695.0, 3602.0, 5850.0)

DEFAULT_COLUMNS = {
    "freq_mhz": "freq_mhz",
    "dist_m": "dist_m",
    "obs_m": "obs_m",
    "group": "group",
    "pl_db": "pl_db",
}
ORACLE_COLUMNS = ("true_mu", "true_sigma")


def drive_test_frequencies() -> list[float]:
    """The six standard drive-test carrier frequencies in MHz, ascending."""
    return list(DRIVE_TEST_FREQUENCIES_MHZ)


@dataclass(frozen=True)
class LinkRecord:
    """One measured radio link."""

    freq_mhz: float
    dist_m: float
    obs_m: float
    group: str
    pl_db: float

    def validate(self) -> str | None:
        """Return a reason string if the record violates an invariant."""
        if not np.isfinite(self.freq_mhz) or self.freq_mhz <= 0:
            return f"frequency must be positive, got {self.freq_mhz}"
        if not np.isfinite(self.dist_m) or self.dist_m <= 0:
            return f"distance must be positive, got {self.dist_m}"
        if not np.isfinite(self.obs_m) or self.obs_m < 0:
            return f"obstruction depth must be >= 0, got {self.obs_m}"
        if not np.isfinite(self.pl_db):
            return f"path loss must be finite, got {self.pl_db}"
        if not self.group:
            return "group label is empty"
        return None


@dataclass
class Dataset:
    """Column-oriented table of links, optionally with oracle columns."""

    freq_mhz: np.ndarray
    dist_m: np.ndarray
    obs_m: np.ndarray
    group: np.ndarray  # dtype=object, str entries
    pl_db: np.ndarray
    true_mu: np.ndarray | None = None
    true_sigma: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.freq_mhz = np.asarray(self.freq_mhz, dtype=np.float64)
        self.dist_m = np.asarray(self.dist_m, dtype=np.float64)
        self.obs_m = np.asarray(self.obs_m, dtype=np.float64)
        self.pl_db = np.asarray(self.pl_db, dtype=np.float64)
        self.group = np.asarray(self.group, dtype=object)
        n = len(self.freq_mhz)
        for name in ("dist_m", "obs_m", "group", "pl_db"):
            if len(getattr(self, name)) != n:
                raise InputError(f"column {name} length differs from freq_mhz")
        if self.true_mu is not None:
            self.true_mu = np.asarray(self.true_mu, dtype=np.float64)
        if self.true_sigma is not None:
            self.true_sigma = np.asarray(self.true_sigma, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.freq_mhz)

    def group_names(self) -> list[str]:
        return sorted(set(self.group.tolist()))

    def group_indices(self, name: str) -> np.ndarray:
        return np.flatnonzero(self.group == name)

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(
            self.freq_mhz[indices],
            self.dist_m[indices],
            self.obs_m[indices],
            self.group[indices],
            self.pl_db[indices],
            None if self.true_mu is None else self.true_mu[indices],
            None if self.true_sigma is None else self.true_sigma[indices],
        )

    def raw_features(self) -> np.ndarray:
        """Untransformed (N, 3) feature matrix in (f, d, o) order."""
        return np.column_stack([self.freq_mhz, self.dist_m, self.obs_m])


@dataclass(frozen=True)
class NormStats:
    """Frozen per-feature transforms fitted on training rows only.

    Frequency and distance are log10-transformed before z-scoring; the
    obstruction depth is zero-inflated so it is z-scored linearly.
    """

    transforms: tuple[str, ...]
    means: np.ndarray
    sds: np.ndarray
    feature_names: tuple[str, ...] = ("freq_mhz", "dist_m", "obs_m")

    def _pre(self, raw: np.ndarray) -> np.ndarray:
        cols = []
        for j, tf in enumerate(self.transforms):
            col = raw[:, j]
            if tf == "log10":
                if np.any(col <= 0):
                    raise InputError(
                        f"feature {self.feature_names[j]} must be positive for log10"
                    )
                cols.append(np.log10(col))
            else:
                cols.append(col.astype(np.float64))
        return np.column_stack(cols)

    def apply(self, raw: np.ndarray) -> np.ndarray:
        """Normalize an (N, 3) raw feature matrix."""
        raw = np.asarray(raw, dtype=np.float64)
        if raw.ndim != 2 or raw.shape[1] != len(self.transforms):
            raise InputError(f"expected (N, {len(self.transforms)}) features")
        return (self._pre(raw) - self.means) / self.sds

    def apply_links(self, freq_mhz, dist_m, obs_m) -> np.ndarray:
        f = np.atleast_1d(np.asarray(freq_mhz, dtype=np.float64))
        d = np.atleast_1d(np.asarray(dist_m, dtype=np.float64))
        o = np.atleast_1d(np.asarray(obs_m, dtype=np.float64))
        f, d, o = np.broadcast_arrays(f, d, o)
        return self.apply(np.column_stack([f, d, o]))

    def invert(self, normalized: np.ndarray) -> np.ndarray:
        """Undo ``apply``: map z-scored features back to raw units."""
        z = np.asarray(normalized, dtype=np.float64) * self.sds + self.means
        cols = []
        for j, tf in enumerate(self.transforms):
            cols.append(10.0 ** z[:, j] if tf == "log10" else z[:, j])
        return np.column_stack(cols)


def fit_normalizer(dataset: Dataset, indices: np.ndarray | None = None) -> NormStats:
    """Fit feature normalization statistics on the given training rows."""
    rows = dataset if indices is None else dataset.subset(indices)
    if len(rows) == 0:
        raise InputError("cannot fit a normalizer on zero rows")
    transforms = ("log10", "log10", "linear")
    stats = NormStats(transforms, np.zeros(3), np.ones(3))
    pre = stats._pre(rows.raw_features())
    means = pre.mean(axis=0)
    sds = pre.std(axis=0)
    for j, sd in enumerate(sds):
        if sd == 0.0:
            raise ConfigError(
                f"feature {stats.feature_names[j]} is constant on the training rows"
            )
    return NormStats(transforms, means, sds)


@dataclass(frozen=True)
class CsvLoadResult:
    dataset: Dataset
    rejected: list[tuple[int, str]]  # (1-based line number, reason)


def load_csv(
    path,
    columns: dict[str, str] | None = None,
    with_oracle: bool = False,
) -> CsvLoadResult:
    """Load a link CSV, rejecting invalid rows with line-numbered reasons.

    ``columns`` maps canonical names (freq_mhz, dist_m, obs_m, group, pl_db)
    to the header names used in the file.
    """
    mapping = dict(DEFAULT_COLUMNS)
    if columns:
        unknown = set(columns) - set(mapping)
        if unknown:
            raise ConfigError(f"unknown canonical columns: {sorted(unknown)}")
        mapping.update(columns)

    records: list[LinkRecord] = []
    oracle_mu: list[float] = []
    oracle_sigma: list[float] = []
    rejected: list[tuple[int, str]] = []

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise InputError(f"{path}: file is empty")
        missing = [v for v in mapping.values() if v not in reader.fieldnames]
        if missing:
            raise InputError(f"{path}: missing columns {missing}")
        has_oracle = with_oracle and all(
            c in reader.fieldnames for c in ORACLE_COLUMNS
        )
        if with_oracle and not has_oracle:
            raise InputError(f"{path}: oracle columns {ORACLE_COLUMNS} not present")

        for line_no, row in enumerate(reader, start=2):
            try:
                rec = LinkRecord(
                    freq_mhz=float(row[mapping["freq_mhz"]]),
                    dist_m=float(row[mapping["dist_m"]]),
                    obs_m=float(row[mapping["obs_m"]]),
                    group=str(row[mapping["group"]]).strip(),
                    pl_db=float(row[mapping["pl_db"]]),
                )
            except (TypeError, ValueError) as exc:
                rejected.append((line_no, f"unparsable row: {exc}"))
                continue
            reason = rec.validate()
            if reason is not None:
                rejected.append((line_no, reason))
                continue
            records.append(rec)
            if has_oracle:
                oracle_mu.append(float(row["true_mu"]))
                oracle_sigma.append(float(row["true_sigma"]))

    if not records:
        raise InputError(f"{path}: no valid rows")
    dataset = Dataset(
        np.array([r.freq_mhz for r in records]),
        np.array([r.dist_m for r in records]),
        np.array([r.obs_m for r in records]),
        np.array([r.group for r in records], dtype=object),
        np.array([r.pl_db for r in records]),
        np.array(oracle_mu) if has_oracle and oracle_mu else None,
        np.array(oracle_sigma) if has_oracle and oracle_sigma else None,
    )
    return CsvLoadResult(dataset=dataset, rejected=rejected)


def write_csv(dataset: Dataset, path, oracle: bool = False) -> None:
    """Write a dataset in the canonical CSV schema."""
    include_oracle = oracle and dataset.true_mu is not None
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(DEFAULT_COLUMNS)
        if include_oracle:
            header += list(ORACLE_COLUMNS)
        writer.writerow(header)
        for i in range(len(dataset)):
            row = [
                f"{dataset.freq_mhz[i]:g}",
                f"{dataset.dist_m[i]:.6g}",
                f"{dataset.obs_m[i]:.6g}",
                dataset.group[i],
                f"{dataset.pl_db[i]:.6f}",
            ]
            if include_oracle:
                row += [
                    f"{dataset.true_mu[i]:.6f}",
                    f"{dataset.true_sigma[i]:.6f}",
                ]
            writer.writerow(row)


# --- synthetic drive tests ---------------------------------------------------


@dataclass(frozen=True)
class GroupSpec:
    """Feature distribution of one synthetic measurement campaign."""

    name: str
    rows: int
    obs_zero_prob: float  # probability a link is fully line-of-sight (o = 0)
    obs_scale_m: float  # exponential scale of nonzero obstruction depths
    dist_range_m: tuple[float, float] = (10.0, 5000.0)

    def validate(self) -> None:
        if self.rows < 1:
            raise ConfigError(f"group {self.name}: rows must be >= 1")
        if not 0.0 <= self.obs_zero_prob <= 1.0:
            raise ConfigError(f"group {self.name}: obs_zero_prob must lie in [0, 1]")
        if self.obs_scale_m <= 0:
            raise ConfigError(f"group {self.name}: obs_scale_m must be positive")
        lo, hi = self.dist_range_m
        if not (0 < lo < hi):
            raise ConfigError(f"group {self.name}: bad distance range {self.dist_range_m}")


DEFAULT_GROUPS = (
    GroupSpec("dense_urban", 0, 0.05, 60.0),
    GroupSpec("urban", 0, 0.10, 40.0),
    GroupSpec("industrial", 0, 0.15, 30.0),
    GroupSpec("suburban", 0, 0.20, 20.0),
    GroupSpec("rural_hilly", 0, 0.30, 45.0),
    GroupSpec("rural_flat", 0, 0.60, 8.0),
)


@dataclass(frozen=True)
class SyntheticSpec:
    """Full recipe for a synthetic dataset with known ground truth."""

    groups: tuple[GroupSpec, ...]
    beta_db_per_m: float = 0.35
    obs_saturation_m: float = 50.0
    sigma_min_db: float = 2.0
    sigma_gain_db: float = 8.0
    obs_sigma_scale_m: float = 30.0
    frequencies_mhz: tuple[float, ...] = DRIVE_TEST_FREQUENCIES_MHZ
    noiseless: bool = False
    seed: int = 0

    def validate(self) -> None:
        if not self.groups:
            raise ConfigError("synthetic spec needs at least one group")
        names = [g.name for g in self.groups]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate group names in synthetic spec")
        for g in self.groups:
            g.validate()
        if self.sigma_min_db <= 0:
            raise ConfigError("sigma_min_db must be positive (SD function > 0)")
        if self.sigma_gain_db < 0:
            raise ConfigError("sigma_gain_db must be >= 0")
        if self.obs_saturation_m <= 0 or self.obs_sigma_scale_m <= 0:
            raise ConfigError("obstruction scale parameters must be positive")
        if not self.frequencies_mhz or any(f <= 0 for f in self.frequencies_mhz):
            raise ConfigError("frequencies must be positive")

    @classmethod
    def default(cls, rows_per_group: int = 120_000, seed: int = 0, **kwargs) -> "SyntheticSpec":
        groups = tuple(replace(g, rows=rows_per_group) for g in DEFAULT_GROUPS)
        return cls(groups=groups, seed=seed, **kwargs)


def free_space_path_loss(freq_mhz, dist_m) -> np.ndarray:
    """Friis free-space loss in dB for MHz/metre inputs."""
    f = np.asarray(freq_mhz, dtype=np.float64)
    d = np.asarray(dist_m, dtype=np.float64)
    return 32.45 + 20.0 * np.log10(d / 1000.0) + 20.0 * np.log10(f)


def synthetic_mean(spec: SyntheticSpec, freq_mhz, dist_m, obs_m) -> np.ndarray:
    o = np.asarray(obs_m, dtype=np.float64)
    penalty = spec.beta_db_per_m * o / (1.0 + o / spec.obs_saturation_m)
    return free_space_path_loss(freq_mhz, dist_m) + penalty


def synthetic_sigma(spec: SyntheticSpec, obs_m) -> np.ndarray:
    o = np.asarray(obs_m, dtype=np.float64)
    return spec.sigma_min_db + spec.sigma_gain_db * (1.0 - np.exp(-o / spec.obs_sigma_scale_m))


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Deterministically sample a dataset (with oracle columns) from a spec.

    Frequencies cycle through the six carriers so every (group, frequency)
    cell has near-equal counts, mirroring how drive-test campaigns are
    assembled. Distances are log-uniform; obstruction depths are zero-inflated
    exponential with per-group parameters.
    """
    spec.validate()
    freqs_list, dists_list, obs_list, groups_list = [], [], [], []
    for g in spec.groups:
        rng = stream(spec.seed, "synthetic", g.name)
        n = g.rows
        reps = int(np.ceil(n / len(spec.frequencies_mhz)))
        f = np.tile(np.asarray(spec.frequencies_mhz), reps)[:n]
        lo, hi = g.dist_range_m
        d = 10.0 ** rng.uniform(np.log10(lo), np.log10(hi), size=n)
        is_los = rng.random(n) < g.obs_zero_prob
        o = np.where(is_los, 0.0, rng.exponential(g.obs_scale_m, size=n))
        freqs_list.append(f)
        dists_list.append(d)
        obs_list.append(o)
        groups_list.append(np.full(n, g.name, dtype=object))

    freq = np.concatenate(freqs_list)
    dist = np.concatenate(dists_list)
    obs = np.concatenate(obs_list)
    group = np.concatenate(groups_list)

    true_mu = synthetic_mean(spec, freq, dist, obs)
    true_sigma = synthetic_sigma(spec, obs)
    if spec.noiseless:
        noise = np.zeros(len(freq))
    else:
        noise_rng = stream(spec.seed, "synthetic-noise")
        noise = noise_rng.standard_normal(len(freq)) * true_sigma
    return Dataset(freq, dist, obs, group, true_mu + noise, true_mu, true_sigma)
