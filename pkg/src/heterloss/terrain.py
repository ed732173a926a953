"""Height grids, path profiles and obstruction-depth extraction.

Grids are planar ESRI-ASCII rasters (row 0 = northernmost row). A path
profile is the evenly spaced sequence of surface heights between two
antennas; the *total obstruction depth* of a link is the summed per-sample
penetration of the (optionally curvature-corrected) surface above the direct
line between the antennas. Earth curvature uses the effective-radius
convention with k = 4/3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ConfigError, InputError
from .rng import stream

EFFECTIVE_EARTH_K = 4.0 / 3.0
EARTH_RADIUS_M = 6_371_000.0


# --- ESRI ASCII grids ---------------------------------------------------------


@dataclass
class AsciiGrid:
    """In-memory ESRI-ASCII raster. ``values[0, :]`` is the northernmost row."""

    values: np.ndarray
    cellsize: float
    xllcorner: float = 0.0
    yllcorner: float = 0.0
    nodata: float = -9999.0

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise InputError("grid values must be 2-D")
        if self.cellsize <= 0:
            raise InputError("cellsize must be positive")

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.nrows and 0 <= col < self.ncols

    def is_nodata(self, row: int, col: int) -> bool:
        return self.values[row, col] == self.nodata


def read_ascii_grid(path) -> AsciiGrid:
    """Parse an ESRI ASCII grid file (5- or 6-line header)."""
    header: dict[str, float] = {}
    data_lines: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            key = parts[0].lower()
            if not data_lines and key in (
                "ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"
            ):
                if len(parts) != 2:
                    raise InputError(f"{path}: malformed header line {line!r}")
                header[key] = float(parts[1])
            else:
                data_lines.append(line)
    for required in ("ncols", "nrows", "cellsize"):
        if required not in header:
            raise InputError(f"{path}: missing header field {required}")
    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    values = np.array(" ".join(data_lines).split(), dtype=np.float64)
    if values.size != nrows * ncols:
        raise InputError(
            f"{path}: expected {nrows * ncols} cells, found {values.size}"
        )
    return AsciiGrid(
        values.reshape(nrows, ncols),
        cellsize=header["cellsize"],
        xllcorner=header.get("xllcorner", 0.0),
        yllcorner=header.get("yllcorner", 0.0),
        nodata=header.get("nodata_value", -9999.0),
    )


def write_ascii_grid(grid: AsciiGrid, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"ncols {grid.ncols}\n")
        fh.write(f"nrows {grid.nrows}\n")
        fh.write(f"xllcorner {grid.xllcorner:g}\n")
        fh.write(f"yllcorner {grid.yllcorner:g}\n")
        fh.write(f"cellsize {grid.cellsize:g}\n")
        fh.write(f"NODATA_value {grid.nodata:g}\n")
        for row in grid.values:
            fh.write(" ".join(f"{v:.4f}" for v in row))
            fh.write("\n")


def write_pgm(grid: AsciiGrid, path) -> None:
    """Quick-look PGM rendering: data scaled to 1..255, nodata black."""
    valid = grid.values != grid.nodata
    img = np.zeros(grid.values.shape, dtype=np.int64)
    if valid.any():
        vmin = grid.values[valid].min()
        vmax = grid.values[valid].max()
        span = vmax - vmin if vmax > vmin else 1.0
        img[valid] = 1 + np.round(254.0 * (grid.values[valid] - vmin) / span).astype(np.int64)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"P2\n{grid.ncols} {grid.nrows}\n255\n")
        for row in img:
            fh.write(" ".join(str(v) for v in row))
            fh.write("\n")


# --- profiles and obstruction depth -------------------------------------------


@dataclass(frozen=True)
class HeightProfile:
    """Evenly spaced surface heights (m ASL) from transmitter to receiver."""

    heights_asl_m: np.ndarray
    spacing_m: float
    tx_height_agl_m: float
    rx_height_agl_m: float

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "heights_asl_m", np.asarray(self.heights_asl_m, dtype=np.float64)
        )
        if self.heights_asl_m.ndim != 1 or len(self.heights_asl_m) < 2:
            raise InputError("profile needs at least 2 samples")
        if self.spacing_m <= 0:
            raise InputError("profile spacing must be positive")

    @property
    def length_m(self) -> float:
        return self.spacing_m * (len(self.heights_asl_m) - 1)


def earth_bulge(distances_m: np.ndarray, total_m: float, k: float = EFFECTIVE_EARTH_K) -> np.ndarray:
    """Effective-Earth height correction h(x) = x (D - x) / (2 k R)."""
    x = np.asarray(distances_m, dtype=np.float64)
    return x * (total_m - x) / (2.0 * k * EARTH_RADIUS_M)


def obstruction_depth(profile: HeightProfile, use_effective_earth: bool = True) -> float:
    """Total obstruction depth (m): summed penetration above the direct line.

    The line of sight runs from the transmit antenna (first sample height +
    tx AGL) to the receive antenna (last sample + rx AGL). Each profile
    sample whose (curvature-adjusted) height exceeds the line contributes its
    penetration depth in metres; unobstructed samples contribute zero.
    """
    heights = profile.heights_asl_m
    n = len(heights)
    x = np.arange(n) * profile.spacing_m
    total = profile.length_m
    if use_effective_earth:
        heights = heights + earth_bulge(x, total)  # zero at both endpoints
    tx = heights[0] + profile.tx_height_agl_m
    rx = heights[-1] + profile.rx_height_agl_m
    los = tx + (rx - tx) * (x / total)
    return float(np.sum(np.maximum(0.0, heights - los)))


def line_cells(r0: int, c0: int, r1: int, c1: int) -> tuple[np.ndarray, np.ndarray]:
    """Cells crossed by the segment (r0,c0)->(r1,c1), one per major step.

    Uniform sampling along the segment with max(|dr|, |dc|) + 1 points,
    rounded to the nearest cell — endpoints included.
    """
    steps = max(abs(r1 - r0), abs(c1 - c0)) + 1
    t = np.linspace(0.0, 1.0, steps)
    rows = np.rint(r0 + t * (r1 - r0)).astype(np.int64)
    cols = np.rint(c0 + t * (c1 - c0)).astype(np.int64)
    return rows, cols


def profile_between_cells(
    surface: AsciiGrid,
    tx_rc: tuple[int, int],
    rx_rc: tuple[int, int],
    tx_height_agl_m: float,
    rx_height_agl_m: float,
) -> HeightProfile:
    """Extract the straight-line surface profile between two grid cells.

    Reads only the cells the segment crosses. Samples are evenly spaced along
    the segment; heights come from the nearest crossed cell.
    """
    r0, c0 = tx_rc
    r1, c1 = rx_rc
    for r, c in (tx_rc, rx_rc):
        if not surface.in_bounds(r, c):
            raise InputError(f"cell ({r}, {c}) outside the grid")
    if tx_rc == rx_rc:
        raise InputError("transmitter and receiver share a cell")
    rows, cols = line_cells(r0, c0, r1, c1)
    heights = surface.values[rows, cols]
    dist = math.hypot(r1 - r0, c1 - c0) * surface.cellsize
    spacing = dist / (len(heights) - 1)
    return HeightProfile(heights, spacing, tx_height_agl_m, rx_height_agl_m)


# --- demo height map ------------------------------------------------------------

_DEMO_SIZE = 101
_DEMO_CELLSIZE = 10.0
_DEMO_SEED = 7


def generate_demo_heightmap(
    size: int = _DEMO_SIZE,
    cellsize: float = _DEMO_CELLSIZE,
    seed: int = _DEMO_SEED,
) -> tuple[AsciiGrid, AsciiGrid]:
    """Procedural (surface, ground) pair: rolling terrain plus city blocks.

    The ground raster is smoothed noise (gentle hills); the surface raster
    adds rectangular buildings on a street grid, leaving an open plaza at the
    centre so a transmitter placed there is outdoors. Deterministic in seed.
    """
    if size < 16:
        raise ConfigError("demo map needs at least 16 cells per side")
    rng = stream(seed, "demo-terrain")
    rough = rng.standard_normal((size, size))
    kernel = np.ones(9) / 9.0
    for _ in range(6):
        rough = np.apply_along_axis(
            lambda r: np.convolve(r, kernel, mode="same"), 0, rough
        )
        rough = np.apply_along_axis(
            lambda r: np.convolve(r, kernel, mode="same"), 1, rough
        )
    rough -= rough.min()
    peak = rough.max() if rough.max() > 0 else 1.0
    ground = 50.0 + 22.0 * rough / peak

    clutter = np.zeros((size, size))
    brng = stream(seed, "demo-buildings")
    block, street = 5, 4
    centre = size // 2
    for top in range(2, size - block, block + street):
        for left in range(2, size - block, block + street):
            if brng.random() >= 0.55:
                continue
            if abs(top + block / 2 - centre) < 8 and abs(left + block / 2 - centre) < 8:
                continue  # central plaza stays open
            height = brng.uniform(6.0, 18.0)
            clutter[top : top + block, left : left + block] = height

    surface = ground + clutter
    return (
        AsciiGrid(surface, cellsize=cellsize),
        AsciiGrid(ground, cellsize=cellsize),
    )


def load_demo_heightmap() -> tuple[AsciiGrid, AsciiGrid]:
    """The bundled demo (surface, ground) rasters."""
    pkg = resources.files("heterloss.assets")
    with resources.as_file(pkg / "demo_surface.asc") as p:
        surface = read_ascii_grid(p)
    with resources.as_file(pkg / "demo_ground.asc") as p:
        ground = read_ascii_grid(p)
    return surface, ground
