"""Heteroscedastic neural path loss models with link-specific uncertainty.

Dense networks jointly predict the mean and the per-link variance of radio
path loss by minimizing a Gaussian negative log-likelihood, are evaluated for
accuracy, calibration, sharpness and residual normality against homoscedastic
baselines, and render spatial prediction-interval heatmaps.
"""

__version__ = "0.1.0"

from .data import (
    Dataset,
    GroupSpec,
    NormStats,
    SyntheticSpec,
    drive_test_frequencies,
    fit_normalizer,
    generate_synthetic,
    load_csv,
    write_csv,
)
from .harness import (
    ComparisonReport,
    FoldResult,
    LogoFold,
    logo_folds,
    mean_sd_curves,
    run_experiment,
    train_one,
)
from .metrics import (
    Interval,
    MetricsRow,
    PredictionSet,
    bonferroni,
    evaluate_predictions,
    gaussian_nll,
    intervals,
    mpiw,
    paired_t_test,
    picp,
    rmse,
    standardized_moments,
    z_critical,
)
from .models import (
    ArchitectureKind,
    GaussianBatch,
    HeteroModel,
    build_default,
    nll_gradients,
)
from .baselines import (
    HomoscedasticMseModel,
    UmaParams,
    mse_prediction_set,
    train_mse,
    uma_nlos_pathloss,
    uma_prediction_set,
)
from .nn import AdamState, DenseLayer, Mode, MlpNetwork, adam_step, backward, forward, init_network
from .serialize import load_model, save_model
from .terrain import (
    AsciiGrid,
    HeightProfile,
    obstruction_depth,
    read_ascii_grid,
    write_ascii_grid,
)
from .training import TrainConfig
