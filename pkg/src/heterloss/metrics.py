"""Evaluation mathematics for probabilistic path loss predictions.

Accuracy (RMSE), probabilistic fit (Gaussian NLL), calibration (PICP),
sharpness (MPIW), normality diagnostics (skewness / excess kurtosis of
standardized residuals) and paired t-tests for comparing model variants.

Conventions
-----------
* Kurtosis is reported as *excess* kurtosis: a Normal distribution scores 0.
* Moments use population (``1/N``) denominators; at the sample sizes this
  package targets the bias correction is negligible.
* A ground-truth value exactly on an interval bound counts as covered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegenerateError, DomainError, InputError


def _as_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise InputError(f"{name} must be 1-D")
    return arr


@dataclass(frozen=True)
class PredictionSet:
    """Aligned ground truth, predicted means and predicted SDs (all dB)."""

    y: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "y", _as_vector(self.y, "y"))
        object.__setattr__(self, "mu", _as_vector(self.mu, "mu"))
        object.__setattr__(self, "sigma", _as_vector(self.sigma, "sigma"))
        n = len(self.y)
        if n == 0:
            raise InputError("prediction set is empty")
        if len(self.mu) != n or len(self.sigma) != n:
            raise InputError("y, mu and sigma must have equal lengths")
        if not (
            np.all(np.isfinite(self.y))
            and np.all(np.isfinite(self.mu))
            and np.all(np.isfinite(self.sigma))
        ):
            raise InputError("prediction set contains non-finite values")
        if np.any(self.sigma <= 0):
            raise DomainError("sigma entries must be positive")

    def __len__(self) -> int:
        return len(self.y)

    @classmethod
    def homoscedastic(cls, y, mu, sigma: float) -> "PredictionSet":
        y = _as_vector(y, "y")
        return cls(y, mu, np.full(len(y), float(sigma)))


@dataclass(frozen=True)
class Interval:
    """Elementwise prediction interval at a fixed confidence level."""

    lower: np.ndarray
    upper: np.ndarray
    confidence: float
    z: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "lower", _as_vector(self.lower, "lower"))
        object.__setattr__(self, "upper", _as_vector(self.upper, "upper"))
        if len(self.lower) != len(self.upper):
            raise InputError("lower/upper lengths differ")
        if np.any(self.upper < self.lower):
            raise InputError("upper bound below lower bound")
        if self.z < 0:
            raise DomainError("z must be non-negative")

    def __len__(self) -> int:
        return len(self.lower)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


@dataclass(frozen=True)
class MetricsRow:
    """One row of an evaluation table."""

    rmse: float
    nll: float
    picp: float
    mpiw: float
    kurtosis: float
    skewness: float

    FIELDS = ("rmse", "nll", "picp", "mpiw", "kurtosis", "skewness")

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in self.FIELDS}


def rmse(pred: PredictionSet) -> float:
    """Root mean squared error of the predicted means."""
    return float(np.sqrt(np.mean(np.square(pred.y - pred.mu))))


def gaussian_nll(pred: PredictionSet) -> float:
    """Mean Gaussian negative log-likelihood of the observations.

    Per sample: ``0.5*log(2*pi*sigma^2) + (y - mu)^2 / (2*sigma^2)``.
    """
    var = np.square(pred.sigma)
    terms = 0.5 * np.log(2.0 * math.pi * var) + np.square(pred.y - pred.mu) / (2.0 * var)
    return float(np.mean(terms))


def z_critical(confidence: float) -> float:
    """Two-sided standard-normal critical value for a central interval.

    ``z_critical(0.95)`` is 1.959964...; the familiar 1.96 is its rounding.
    """
    if not 0.0 < confidence < 1.0:
        raise DomainError("confidence must lie strictly between 0 and 1")
    return float(special.ndtri(0.5 * (1.0 + confidence)))


def intervals(pred: PredictionSet, confidence: float = 0.95) -> Interval:
    """Central Gaussian prediction intervals ``mu -/+ z*sigma``."""
    z = z_critical(confidence)
    return Interval(pred.mu - z * pred.sigma, pred.mu + z * pred.sigma, confidence, z)


def picp(y, interval: Interval) -> float:
    """Prediction Interval Coverage Probability.

    Fraction of samples whose ground truth falls inside the interval;
    boundary hits count as covered.
    """
    y = _as_vector(y, "y")
    if len(y) != len(interval):
        raise InputError("y and interval lengths differ")
    inside = (interval.lower <= y) & (y <= interval.upper)
    return float(np.mean(inside))


def mpiw(interval: Interval) -> float:
    """Mean Prediction Interval Width."""
    if len(interval) == 0:
        raise InputError("interval is empty")
    return float(np.mean(interval.width))


def standardized_moments(pred: PredictionSet) -> tuple[float, float]:
    """(excess kurtosis, skewness) of the standardized residuals.

    Residuals are ``(y - mu) / sigma``; both statistics vanish for perfectly
    Gaussian residuals. Population central moments throughout.
    """
    if len(pred) < 4:
        raise InputError("need at least 4 samples for fourth moments")
    r = (pred.y - pred.mu) / pred.sigma
    c = r - r.mean()
    m2 = float(np.mean(c**2))
    if m2 == 0.0:
        raise DegenerateError("standardized residuals have zero variance")
    m3 = float(np.mean(c**3))
    m4 = float(np.mean(c**4))
    skewness = m3 / m2**1.5
    kurtosis_excess = m4 / m2**2 - 3.0
    return kurtosis_excess, skewness


@dataclass(frozen=True)
class TTestResult:
    t: float
    p_value: float
    dof: int
    degenerate: bool = False


def student_t_cdf(t: float, dof: int) -> float:
    """CDF of Student's t distribution (incomplete-beta based)."""
    if dof < 1:
        raise DomainError("degrees of freedom must be >= 1")
    return float(special.stdtr(dof, t))


def paired_t_test(a, b) -> TTestResult:
    """Two-sided paired t-test on matched metric vectors.

    Pairs must be matched by construction (same fold and run). When the
    differences have zero variance the statistic is undefined; the result is
    flagged degenerate with ``t = 0, p = 1`` for identical vectors.
    """
    a = _as_vector(a, "a")
    b = _as_vector(b, "b")
    if len(a) != len(b):
        raise InputError("paired vectors must have equal lengths")
    if len(a) < 2:
        raise InputError("need at least two pairs")
    d = a - b
    n = len(d)
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    dof = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(t=0.0, p_value=1.0, dof=dof, degenerate=True)
        return TTestResult(
            t=math.copysign(math.inf, mean), p_value=0.0, dof=dof, degenerate=True
        )
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * student_t_cdf(-abs(t), dof)
    return TTestResult(t=t, p_value=p, dof=dof, degenerate=False)


def bonferroni(alpha: float, m: int) -> float:
    """Bonferroni-corrected per-comparison significance threshold."""
    if m < 1:
        raise DomainError("number of comparisons must be >= 1")
    return alpha / m


def evaluate_predictions(pred: PredictionSet, confidence: float = 0.95) -> MetricsRow:
    """All six table metrics for one prediction set."""
    iv = intervals(pred, confidence)
    kurt, skew = standardized_moments(pred)
    return MetricsRow(
        rmse=rmse(pred),
        nll=gaussian_nll(pred),
        picp=picp(pred.y, iv),
        mpiw=mpiw(iv),
        kurtosis=kurt,
        skewness=skew,
    )
