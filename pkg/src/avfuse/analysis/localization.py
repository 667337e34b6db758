"""
Sound-source localization: per-cell response alpha_t[h, w] = V_t[h, w, :] . zA_t,
a time average over a window centered on the middle step, and IoU/AUC
scoring of the averaged map against a box.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from avfuse.config import DEFAULT_WINDOW
from avfuse.exceptions import InvalidArgumentError
from avfuse.fusion.schemas import FeatureSequence
from avfuse.storage.files import atomic_write_bytes

logger = logging.getLogger(__name__)

IOU_THRESHOLD = 0.5
AUC_THRESHOLDS = np.round(np.arange(1, 20) * 0.05, 2)


@dataclass(frozen=True)
class SpatialFeatureMap:
    """T x H' x W' x D visual activation grids."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 4 or min(values.shape) < 1:
            raise InvalidArgumentError(f"spatial map must be T x H x W x D, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("spatial map contains non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_rows(cls, rows: np.ndarray, height: int, width: int) -> "SpatialFeatureMap":
        """From the on-disk layout: (T*H*W) x D rows in t, h, w order."""
        rows = np.asarray(rows)
        cells = height * width
        if cells < 1 or rows.ndim != 2 or rows.shape[0] % cells:
            raise InvalidArgumentError(f"{rows.shape} rows do not tile a {height}x{width} grid")
        return cls(rows.reshape(rows.shape[0] // cells, height, width, rows.shape[1]))

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def D(self) -> int:
        return self.values.shape[3]


@dataclass(frozen=True)
class LocalizationMap:
    per_step: np.ndarray  # (T, H', W')
    averaged: np.ndarray  # (H', W')


@dataclass(frozen=True)
class Box:
    """Half-open rectangle [top, bottom) x [left, right) in grid cells."""

    top: int
    left: int
    bottom: int
    right: int

    def check_within(self, height: int, width: int) -> None:
        if self.bottom <= self.top or self.right <= self.left:
            raise InvalidArgumentError(f"degenerate box {self}")
        if self.top < 0 or self.left < 0 or self.bottom > height or self.right > width:
            raise InvalidArgumentError(f"box {self} outside {height}x{width} grid")

    def mask(self, height: int, width: int) -> np.ndarray:
        self.check_within(height, width)
        m = np.zeros((height, width), dtype=bool)
        m[self.top : self.bottom, self.left : self.right] = True
        return m


def window_bounds(T: int, window: int, center: int | None = None) -> tuple[int, int]:
    """[start, end) of a window of `window` steps around center (default T // 2), shifted to fit."""
    if window < 1:
        raise InvalidArgumentError(f"window must be >= 1, got {window}")
    center = T // 2 if center is None else center
    if not 0 <= center < T:
        raise InvalidArgumentError(f"center {center} outside [0, {T})")
    window = min(window, T)
    start = min(max(center - window // 2, 0), T - window)
    return start, start + window


def time_average(per_step: np.ndarray, window: int = DEFAULT_WINDOW, center: int | None = None) -> np.ndarray:
    start, end = window_bounds(per_step.shape[0], window, center)
    return per_step[start:end].mean(axis=0)


def localization_map(vmap: SpatialFeatureMap, zA: FeatureSequence, window: int = DEFAULT_WINDOW) -> LocalizationMap:
    if vmap.D != zA.D:
        raise InvalidArgumentError(f"visual map width {vmap.D} does not match audio width {zA.D}")
    if vmap.T != zA.T:
        raise InvalidArgumentError(f"visual map has T={vmap.T} but audio has T={zA.T}")
    per_step = np.einsum("thwd,td->thw", vmap.values, zA.values)
    return LocalizationMap(per_step=per_step, averaged=time_average(per_step, window))


def iou_at(grid: np.ndarray, box: Box, tau: float) -> float:
    """IoU of {cells >= tau * max(grid)} with the box; a map without positive cells selects nothing."""
    gt = box.mask(*grid.shape)
    peak = float(grid.max())
    binary = grid >= tau * peak if peak > 0 else np.zeros_like(gt)
    union = np.count_nonzero(binary | gt)
    return np.count_nonzero(binary & gt) / union


def localization_eval(grid: np.ndarray, box: Box) -> tuple[float, float]:
    """(IoU at tau=0.5, mean IoU over tau = 0.05 ... 0.95)"""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2 or not np.all(np.isfinite(grid)):
        raise InvalidArgumentError(f"localization grid must be a finite 2-D array, got shape {grid.shape}")
    box.check_within(*grid.shape)
    iou = iou_at(grid, box, IOU_THRESHOLD)
    auc = float(np.mean([iou_at(grid, box, tau) for tau in AUC_THRESHOLDS]))
    return iou, auc


def write_pgm(grid: np.ndarray, path: str | Path) -> None:
    """8-bit binary PGM of the max-normalized map (negative responses clipped to 0)."""
    grid = np.asarray(grid, dtype=np.float64)
    peak = grid.max()
    scaled = np.clip(grid / peak, 0.0, 1.0) if peak > 0 else np.zeros_like(grid)
    pixels = np.round(scaled * 255).astype(np.uint8)
    header = f"P5\n{grid.shape[1]} {grid.shape[0]}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + pixels.tobytes())
    logger.debug(f"Wrote {grid.shape[0]}x{grid.shape[1]} PGM to {path}")
