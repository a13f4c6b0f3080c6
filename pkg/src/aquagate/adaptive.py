"""Degradation-guided adaptive processing: maps, per-tile depth, cost units.

The degradation map is the normalized absolute deviation of luma from its
local box mean; each tile's mean degradation sets an integer enhancement
depth, and depth times tile area is the unit of compute accounting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import PlanMismatchError, WindowTooLargeError
from .images import ImageBuf, LumaBuf, luma


@dataclass(frozen=True)
class AdaptiveParams:
    window: int = 15
    epsilon: float = 1e-6
    alpha: float = 8.0
    beta: float = 1.0
    d_max: int = 4
    tile: int = 64
    overlap: int = 16

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd >= 3, got {self.window}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.d_max < 1:
            raise ValueError("d_max must be >= 1")
        if self.tile < 1:
            raise ValueError("tile must be >= 1")
        if not 0 <= self.overlap < self.tile:
            raise ValueError("overlap must satisfy 0 <= overlap < tile")


@dataclass(frozen=True)
class DegradationMap:
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected HxW array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0:
            raise ValueError("degradation values must be finite and >= 0")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Tile:
    """Pixel rectangle [y0, y1) x [x0, x1) with its planned depth."""

    y0: int
    x0: int
    y1: int
    x1: int
    mean_degradation: float
    depth: int

    @property
    def area(self) -> int:
        return (self.y1 - self.y0) * (self.x1 - self.x0)


@dataclass(frozen=True)
class DepthPlan:
    height: int
    width: int
    tile_size: int
    overlap: int
    d_max: int
    tiles: tuple[Tile, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class CostUnits:
    units: float
    full_units: float

    def __post_init__(self):
        if self.units < 0 or self.units > self.full_units:
            raise ValueError("units must satisfy 0 <= units <= full_units")


def degradation_map(l: LumaBuf, params: AdaptiveParams) -> DegradationMap:
    """M = |l - local_mean| / (local_mean + epsilon), reflect-101 box mean."""
    h, w = l.height, l.width
    if params.window > 2 * min(h, w) - 1:
        raise WindowTooLargeError(
            f"window {params.window} exceeds 2*min(H,W)-1 = {2 * min(h, w) - 1}"
        )
    local = ndimage.uniform_filter(l.data, size=params.window, mode="mirror")
    # Windows with constant content must yield exactly zero; the moving-sum
    # filter leaves ~1e-16 residue there, so detect them by min==max (pure
    # selection, no arithmetic) and pin both deviation and mean.
    lo = ndimage.minimum_filter(l.data, size=params.window, mode="mirror")
    hi = ndimage.maximum_filter(l.data, size=params.window, mode="mirror")
    flat = lo == hi
    local = np.where(flat, l.data, local)
    m = np.abs(l.data - local) / (local + params.epsilon)
    return DegradationMap(m)


def dynamic_depth(mean_m: float, params: AdaptiveParams) -> int:
    """Affine depth rule: min(d_max, round-half-up(alpha*m + beta)), floor 0."""
    if mean_m < 0:
        raise ValueError(f"mean degradation must be >= 0, got {mean_m}")
    raw = int(np.floor(params.alpha * mean_m + params.beta + 0.5))
    return max(0, min(params.d_max, raw))


def plan(img: ImageBuf, params: AdaptiveParams) -> tuple[DepthPlan, CostUnits]:
    """Tile the image, assign per-tile depth from mean degradation."""
    m = degradation_map(luma(img), params)
    h, w = img.height, img.width
    tiles: list[Tile] = []
    units = 0
    for y0 in range(0, h, params.tile):
        y1 = min(y0 + params.tile, h)
        for x0 in range(0, w, params.tile):
            x1 = min(x0 + params.tile, w)
            mean_m = float(m.values[y0:y1, x0:x1].mean())
            depth = dynamic_depth(mean_m, params)
            tiles.append(Tile(y0, x0, y1, x1, mean_m, depth))
            units += depth * (y1 - y0) * (x1 - x0)
    depth_plan = DepthPlan(
        height=h,
        width=w,
        tile_size=params.tile,
        overlap=params.overlap,
        d_max=params.d_max,
        tiles=tuple(tiles),
    )
    return depth_plan, CostUnits(units=float(units), full_units=float(params.d_max * h * w))


def savings_fraction(c: CostUnits) -> float:
    """1 - units/full_units, the fraction of tile-unit compute avoided."""
    if c.full_units <= 0:
        raise ValueError("full_units must be positive")
    return 1.0 - c.units / c.full_units


def format_savings(fraction: float) -> str:
    """Render a savings fraction as a percent string, e.g. 0.1875 -> '18.75%'."""
    text = f"{fraction * 100:.2f}".rstrip("0").rstrip(".")
    return f"{text}%"


def plan_to_json(depth_plan: DepthPlan, cost: CostUnits) -> dict:
    """Debug-friendly JSON view of a plan."""
    return {
        "height": depth_plan.height,
        "width": depth_plan.width,
        "tile_size": depth_plan.tile_size,
        "overlap": depth_plan.overlap,
        "d_max": depth_plan.d_max,
        "units": cost.units,
        "full_units": cost.full_units,
        "savings": savings_fraction(cost),
        "tiles": [
            {
                "rect": [t.y0, t.x0, t.y1, t.x1],
                "mean_degradation": t.mean_degradation,
                "depth": t.depth,
            }
            for t in depth_plan.tiles
        ],
    }
