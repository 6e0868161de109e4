"""Procedural multi-factor image dataset.

Renders flat-colored scenes (wall, floor, one centered shape) whose factors of
variation are known exactly: floor hue, wall hue, object hue, object scale,
object shape, and horizontal object offset. Rendering is a pure function of
the factor values, so ground-truth labels are exact by construction.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

FLOOR_HUE = "floor-hue"
WALL_HUE = "wall-hue"
OBJECT_HUE = "object-hue"
OBJECT_SCALE = "object-scale"
OBJECT_SHAPE = "object-shape"
OBJECT_X_OFFSET = "object-x-offset"

SHAPE_NAMES = ("circle", "square", "triangle", "diamond")

# Object radius as a fraction of image height, across the scale factor range.
MIN_RADIUS_FRAC = 0.15
MAX_RADIUS_FRAC = 0.45
# Horizontal shift range of the shape center, as a fraction of image width.
X_SHIFT_FRAC = 0.4
# Wall and floor are pastel so the vivid object dominates the scene; adjacent
# backdrop hues then differ by small pixel margins instead of saturated jumps.
BACKDROP_SATURATION = 0.25


@dataclass(frozen=True)
class FactorSpec:
    """One discrete factor of variation: a name and how many values it takes."""

    name: str
    cardinality: int

    def __post_init__(self):
        if self.cardinality < 2:
            raise ValueError(f"factor '{self.name}' needs cardinality >= 2, got {self.cardinality}")


def default_factor_specs() -> list[FactorSpec]:
    """The six-factor layout used by the renderer (fresh list each call)."""
    return [
        FactorSpec(FLOOR_HUE, 10),
        FactorSpec(WALL_HUE, 10),
        FactorSpec(OBJECT_HUE, 10),
        FactorSpec(OBJECT_SCALE, 8),
        FactorSpec(OBJECT_SHAPE, 4),
        FactorSpec(OBJECT_X_OFFSET, 15),
    ]


DEFAULT_FACTOR_ORDER = tuple(f.name for f in default_factor_specs())


@dataclass
class Dataset:
    """Rendered images plus their exact factor labels.

    images: (n, H, W, 3) float32 in [0, 1]
    labels: (n, num_factors) int, labels[i, f] in [0, spec[f].cardinality)
    """

    images: np.ndarray
    labels: np.ndarray
    spec: list[FactorSpec]
    seed: int

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def resolution(self) -> int:
        return self.images.shape[1]

    def factor_index(self, name: str) -> int:
        for i, f in enumerate(self.spec):
            if f.name == name:
                return i
        raise KeyError(f"no factor named '{name}'")

    def flat_images(self) -> np.ndarray:
        """(n, H*W*3) float32 view used as model input."""
        return self.images.reshape(len(self), -1)


def validate_renderer_spec(spec: Sequence[FactorSpec]) -> None:
    """The renderer understands exactly the six default factor roles, in order.

    Cardinalities may differ from the defaults (shape is capped by the number
    of implemented shapes).
    """
    names = tuple(f.name for f in spec)
    if names != DEFAULT_FACTOR_ORDER:
        raise ValueError(f"renderer expects factors {list(DEFAULT_FACTOR_ORDER)}, got {list(names)}")
    shape_card = spec[4].cardinality
    if shape_card > len(SHAPE_NAMES):
        raise ValueError(f"factor '{OBJECT_SHAPE}' supports at most {len(SHAPE_NAMES)} values, got {shape_card}")


def validate_factors(spec: Sequence[FactorSpec], factors: Sequence[int]) -> np.ndarray:
    """Check a factor tuple against a spec; returns it as an int array."""
    values = np.asarray(factors, dtype=np.int64)
    if values.shape != (len(spec),):
        raise ValueError(f"expected {len(spec)} factor values, got shape {values.shape}")
    for f, v in zip(spec, values):
        if not 0 <= v < f.cardinality:
            raise ValueError(f"factor '{f.name}' value {int(v)} out of range [0, {f.cardinality})")
    return values


def hue_rgb(value: int, cardinality: int, saturation: float = 1.0) -> np.ndarray:
    """RGB triple for hue step `value` of `cardinality` equally spaced hues."""
    r, g, b = colorsys.hsv_to_rgb(value / cardinality, saturation, 1.0)
    return np.array([r, g, b], dtype=np.float32)


def _hue_table(cardinality: int, saturation: float = 1.0) -> np.ndarray:
    return np.stack([hue_rgb(v, cardinality, saturation) for v in range(cardinality)])


@lru_cache(maxsize=4096)
def _cached_mask(resolution: int, scale: int, scale_card: int, shape: int,
                 offset: int, offset_card: int) -> np.ndarray:
    h = w = resolution
    ys = np.arange(h, dtype=np.float64)[:, None] + 0.5
    xs = np.arange(w, dtype=np.float64)[None, :] + 0.5
    radius = (MIN_RADIUS_FRAC + (MAX_RADIUS_FRAC - MIN_RADIUS_FRAC) * scale / (scale_card - 1)) * h
    cy = h / 2.0
    cx = w / 2.0 + (offset / (offset_card - 1) - 0.5) * X_SHIFT_FRAC * w
    dx = xs - cx
    dy = ys - cy
    if shape == 0:  # circle
        mask = dx * dx + dy * dy <= radius * radius
    elif shape == 1:  # square inscribed in the circle of the same radius
        half = radius / np.sqrt(2.0)
        mask = (np.abs(dx) <= half) & (np.abs(dy) <= half)
    elif shape == 2:  # upward triangle inscribed in the circle
        v0 = (cx, cy - radius)
        v1 = (cx - radius * np.sqrt(3.0) / 2.0, cy + radius / 2.0)
        v2 = (cx + radius * np.sqrt(3.0) / 2.0, cy + radius / 2.0)
        mask = _half_planes(xs, ys, v0, v1, v2)
    elif shape == 3:  # diamond
        mask = np.abs(dx) + np.abs(dy) <= radius
    else:
        raise ValueError(f"factor '{OBJECT_SHAPE}' value {shape} out of range [0, {len(SHAPE_NAMES)})")
    mask = np.broadcast_to(mask, (h, w)).copy()
    mask.flags.writeable = False
    return mask


def _half_planes(xs, ys, v0, v1, v2) -> np.ndarray:
    def edge(a, b):
        return (b[0] - a[0]) * (ys - a[1]) - (b[1] - a[1]) * (xs - a[0])

    d0 = edge(v0, v1)
    d1 = edge(v1, v2)
    d2 = edge(v2, v0)
    inside_ccw = (d0 >= 0) & (d1 >= 0) & (d2 >= 0)
    inside_cw = (d0 <= 0) & (d1 <= 0) & (d2 <= 0)
    return inside_ccw | inside_cw


def shape_mask(factors: Sequence[int], resolution: int,
               spec: Sequence[FactorSpec] | None = None) -> np.ndarray:
    """Boolean (H, W) mask of the pixels owned by the object shape."""
    spec = list(spec) if spec is not None else default_factor_specs()
    validate_renderer_spec(spec)
    values = validate_factors(spec, factors)
    return _cached_mask(resolution, int(values[3]), spec[3].cardinality,
                        int(values[4]), int(values[5]), spec[5].cardinality)


def render_scene(factors: Sequence[int], resolution: int,
                 spec: Sequence[FactorSpec] | None = None) -> np.ndarray:
    """Render one (H, W, 3) float32 image from a factor tuple.

    Top half is the wall hue, bottom half the floor hue, and a single shape
    (circle/square/triangle/diamond) of the object hue sits at mid-height,
    shifted horizontally by the offset factor. Backdrop hues are pastel
    (BACKDROP_SATURATION) while the object is fully saturated. Pure and
    deterministic.
    """
    spec = list(spec) if spec is not None else default_factor_specs()
    validate_renderer_spec(spec)
    values = validate_factors(spec, factors)
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")

    img = np.empty((resolution, resolution, 3), dtype=np.float32)
    half = resolution // 2
    img[:half] = hue_rgb(int(values[1]), spec[1].cardinality, BACKDROP_SATURATION)
    img[half:] = hue_rgb(int(values[0]), spec[0].cardinality, BACKDROP_SATURATION)
    mask = _cached_mask(resolution, int(values[3]), spec[3].cardinality,
                        int(values[4]), int(values[5]), spec[5].cardinality)
    img[mask] = hue_rgb(int(values[2]), spec[2].cardinality)
    return img


def generate_dataset(spec: Sequence[FactorSpec], count: int, resolution: int,
                     seed: int) -> Dataset:
    """Sample `count` distinct factor tuples (seeded, without replacement) and
    render them all.

    The full factorial grid is shuffled with the seed and truncated, so no two
    entries share a factor tuple.
    """
    spec = list(spec)
    validate_renderer_spec(spec)
    names = [f.name for f in spec]
    if len(set(names)) != len(names):
        raise ValueError("factor names must be unique")
    dims = tuple(f.cardinality for f in spec)
    total = int(np.prod(np.asarray(dims, dtype=np.int64)))
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if count > total:
        raise ValueError(f"count {count} exceeds the {total} distinct factor combinations")

    rng = np.random.default_rng(seed)
    chosen = rng.permutation(total)[:count]
    labels = np.stack(np.unravel_index(chosen, dims), axis=1).astype(np.int64)

    images = np.empty((count, resolution, resolution, 3), dtype=np.float32)
    half = resolution // 2
    wall_table = _hue_table(spec[1].cardinality, BACKDROP_SATURATION)
    floor_table = _hue_table(spec[0].cardinality, BACKDROP_SATURATION)
    object_table = _hue_table(spec[2].cardinality)
    images[:, :half] = wall_table[labels[:, 1]][:, None, None, :]
    images[:, half:] = floor_table[labels[:, 0]][:, None, None, :]

    # Group images sharing a (scale, shape, offset) mask and fill each group
    # with one vectorized scatter.
    mask_key = (labels[:, 3] * dims[4] + labels[:, 4]) * dims[5] + labels[:, 5]
    object_rgb = object_table[labels[:, 2]]
    for key in np.unique(mask_key):
        idx = np.nonzero(mask_key == key)[0]
        scale, rem = divmod(int(key), dims[4] * dims[5])
        shape, offset = divmod(rem, dims[5])
        mask = _cached_mask(resolution, scale, dims[3], shape, offset, dims[5])
        ys, xs = np.nonzero(mask)
        images[idx[:, None], ys[None, :], xs[None, :]] = object_rgb[idx][:, None, :]

    return Dataset(images=images, labels=labels, spec=spec, seed=seed)


def split_dataset(d: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Disjoint seeded split covering the dataset exactly."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(d)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(n * train_fraction)
    train_idx, test_idx = perm[:n_train], perm[n_train:]
    train = Dataset(d.images[train_idx], d.labels[train_idx], list(d.spec), seed)
    test = Dataset(d.images[test_idx], d.labels[test_idx], list(d.spec), seed)
    return train, test
