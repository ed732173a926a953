"""Prediction-interval heatmaps over a height grid.

For every outdoor pixel the renderer extracts the straight-line surface
profile from the transmitter, derives the link features (frequency, 2-D
distance, total obstruction depth), queries the model for a predictive Normal
distribution, and writes the interval width ``2 z sigma`` plus companion
mean/SD rasters. Pixels whose clutter height (surface minus ground) exceeds a
threshold are treated as inside buildings and written as nodata.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError
from .metrics import z_critical
from .terrain import AsciiGrid, obstruction_depth, profile_between_cells


@dataclass
class HeatmapJob:
    """Inputs of one heatmap rendering."""

    surface: AsciiGrid
    ground: AsciiGrid | None = None  # without it no pixel is masked as indoor
    tx_row: int = -1  # -1 centres the transmitter
    tx_col: int = -1
    tx_height_agl_m: float = 20.0
    rx_height_agl_m: float = 1.5
    frequency_mhz: float = 3500.0
    confidence: float = 0.95
    indoor_clutter_threshold_m: float = 2.0
    use_effective_earth: bool = True

    def __post_init__(self) -> None:
        if self.tx_row < 0:
            self.tx_row = self.surface.nrows // 2
        if self.tx_col < 0:
            self.tx_col = self.surface.ncols // 2
        if not self.surface.in_bounds(self.tx_row, self.tx_col):
            raise ConfigError(
                f"transmitter cell ({self.tx_row}, {self.tx_col}) outside the grid"
            )
        if self.frequency_mhz <= 0:
            raise ConfigError("frequency must be positive")
        if self.ground is not None and self.ground.values.shape != self.surface.values.shape:
            raise InputError("surface and ground grids must have identical shapes")


@dataclass
class HeatmapResult:
    width: AsciiGrid
    mean: AsciiGrid
    sd: AsciiGrid


def pixel_features(job: HeatmapJob, row: int, col: int) -> tuple[float, float]:
    """(distance m, obstruction depth m) for one receiver pixel.

    Distances shorter than half a cell (in particular the transmitter's own
    pixel) are clamped so the log-distance feature stays finite. Only cells
    on the transmitter-receiver segment are read.
    """
    cellsize = job.surface.cellsize
    if (row, col) == (job.tx_row, job.tx_col):
        return 0.5 * cellsize, 0.0
    profile = profile_between_cells(
        job.surface,
        (job.tx_row, job.tx_col),
        (row, col),
        job.tx_height_agl_m,
        job.rx_height_agl_m,
    )
    obs = obstruction_depth(profile, job.use_effective_earth)
    dist = max(profile.length_m, 0.5 * cellsize)
    return dist, obs


def render_heatmap(model, job: HeatmapJob) -> HeatmapResult:
    """Render interval-width, mean and SD rasters for a link-level model.

    ``model`` needs a ``predict_links(freq_mhz, dist_m, obs_m)`` method
    returning per-link (mean dB, SD dB); both the heteroscedastic models and
    the homoscedastic baseline qualify.
    """
    surface = job.surface
    nodata = surface.nodata
    z = z_critical(job.confidence)

    if job.ground is not None:
        clutter = surface.values - job.ground.values
        indoor = clutter > job.indoor_clutter_threshold_m
    else:
        indoor = np.zeros(surface.values.shape, dtype=bool)
    if indoor[job.tx_row, job.tx_col]:
        raise ConfigError("transmitter cell lies inside a building")

    rows, cols = np.nonzero(~indoor)
    dists = np.empty(len(rows))
    obs = np.empty(len(rows))
    for i, (r, c) in enumerate(zip(rows, cols)):
        dists[i], obs[i] = pixel_features(job, int(r), int(c))

    mu, sigma = model.predict_links(
        np.full(len(rows), job.frequency_mhz), dists, obs
    )

    width_values = np.full(surface.values.shape, nodata)
    mean_values = np.full(surface.values.shape, nodata)
    sd_values = np.full(surface.values.shape, nodata)
    width_values[rows, cols] = 2.0 * z * sigma
    mean_values[rows, cols] = mu
    sd_values[rows, cols] = sigma

    def grid(values: np.ndarray) -> AsciiGrid:
        return AsciiGrid(
            values,
            cellsize=surface.cellsize,
            xllcorner=surface.xllcorner,
            yllcorner=surface.yllcorner,
            nodata=nodata,
        )

    return HeatmapResult(
        width=grid(width_values), mean=grid(mean_values), sd=grid(sd_values)
    )
