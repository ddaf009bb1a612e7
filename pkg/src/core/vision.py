"""Computer-vision scoring of droplet images.

Pipeline: Otsu threshold (polarity picked automatically) -> morphological
opening -> distance transform -> prominence markers -> watershed. Each
segmented droplet gets a circle fitted from its major and minor chords; the
circularity loss is the pixel XOR between droplets and their circles, the
yield loss penalizes background pixels and missing droplets.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy import ndimage as ndi
from skimage.filters import threshold_otsu
from skimage.morphology import h_maxima, reconstruction
from skimage.segmentation import watershed

from src.utils.errors import DegenerateRegionError, InvalidCountMaxError
from src.utils.logger import get_logger

logger = get_logger(__name__)

MIN_SIDE = 16
OPENING_STRUCTURE = np.ones((3, 3), dtype=bool)
CROSS = ndi.generate_binary_structure(2, 1)
EIGHT = ndi.generate_binary_structure(2, 2)
# Perpendicularity tolerance of the minor chord, in pixels along the major axis.
PERPENDICULAR_TOLERANCE = 0.5
# Residue below this (relative to the peak) is treated as flat.
DOME_TOLERANCE = 1e-9
# Pair scans are chunked to keep the (rows x B) work arrays small.
PAIR_BLOCK_ELEMENTS = 1 << 22


class SegOpts(BaseModel):
    """Segmentation options."""

    marker_frac: float = Field(0.4, description="Peak prominence as a fraction of the component's max distance", gt=0, lt=1)
    min_area: int = Field(20, description="Regions smaller than this (px) are dropped", ge=1)
    min_contrast: float = Field(20.0, description="Minimum Otsu class separation (intensity levels)", ge=0)
    opening_iterations: int = Field(2, description="Iterations of the 3x3 opening", ge=0)


@dataclass(frozen=True)
class DropletImage:
    """Row-major 8-bit grayscale raster."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2:
            raise ValueError(f"droplet image must be 2-D grayscale, got shape {pixels.shape}")
        if pixels.dtype != np.uint8:
            if pixels.size and (pixels.min() < 0 or pixels.max() > 255):
                raise ValueError("pixel values must lie in 0..255")
            pixels = pixels.astype(np.uint8)
        if pixels.shape[0] < MIN_SIDE or pixels.shape[1] < MIN_SIDE:
            raise ValueError(f"droplet image must be at least {MIN_SIDE}x{MIN_SIDE} px")
        pixels = np.ascontiguousarray(pixels)
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


@dataclass
class SegmentationResult:
    """Droplet labels (0 = background) and the pixel set of each droplet.

    regions[i] holds the (row, col) coordinates of droplet i + 1, row-major.
    """

    labels: np.ndarray
    regions: List[np.ndarray] = field(default_factory=list)

    @property
    def droplet_count(self) -> int:
        return len(self.regions)

    @property
    def total_pixels(self) -> int:
        return int(self.labels.size)

    @property
    def background_pixels(self) -> int:
        return int(np.count_nonzero(self.labels == 0))

    @property
    def areas(self) -> np.ndarray:
        return np.array([len(r) for r in self.regions], dtype=int)


@dataclass(frozen=True)
class DropletGeometry:
    """Chords of one droplet and the circle fitted to them."""

    centroid: Tuple[float, float]
    r_major: float
    r_minor: float
    circle_radius: float
    circle_pixels: np.ndarray


@dataclass(frozen=True)
class ScoreResult:
    loss: float
    geom_loss: float
    yield_loss: float
    segmentation: SegmentationResult
    mean_diameter_px: float
    diameter_cv: float

    @property
    def droplet_count(self) -> int:
        return self.segmentation.droplet_count


# Segmentation

def _empty(shape: Tuple[int, int]) -> SegmentationResult:
    return SegmentationResult(labels=np.zeros(shape, dtype=np.int32), regions=[])


def foreground_mask(image: DropletImage, opts: SegOpts) -> Optional[np.ndarray]:
    """Otsu foreground with auto polarity; None when the image has no contrast."""
    pixels = image.pixels
    if pixels.min() == pixels.max():
        return None

    threshold = threshold_otsu(pixels)
    bright = pixels > threshold
    n_bright = int(np.count_nonzero(bright))
    if n_bright == 0 or n_bright == pixels.size:
        return None

    separation = float(pixels[bright].mean()) - float(pixels[~bright].mean())
    if separation < opts.min_contrast:
        return None

    # Droplets are the minority class, whichever side of the threshold they sit on.
    return bright if n_bright <= pixels.size - n_bright else ~bright


def _prominence_markers(opened: np.ndarray, distance: np.ndarray, marker_frac: float) -> np.ndarray:
    """One seed per distance peak whose prominence reaches marker_frac of its component's max.

    Seeds are grown to their h-dome (the connected set rising above the
    dome's floor), so maxima scattered along one flat ridge, such as the
    spine of a continuous stream, become a single marker.
    """
    components, _ = ndi.label(opened, structure=CROSS)
    markers = np.zeros(opened.shape, dtype=np.int32)
    next_id = 1

    for comp_id, sl in enumerate(ndi.find_objects(components), start=1):
        if sl is None:
            continue
        comp_mask = components[sl] == comp_id
        local = np.where(comp_mask, distance[sl], 0.0)
        peak = float(local.max())
        if peak <= 0.0:
            continue

        h = marker_frac * peak
        padded = np.pad(local, 1)
        seeds = h_maxima(padded, h)[1:-1, 1:-1].astype(bool) & comp_mask
        if not seeds.any():
            seeds = comp_mask & (local >= peak)

        floor = reconstruction(padded - h, padded, method="dilation")
        domes = ((padded - floor) > DOME_TOLERANCE * peak)[1:-1, 1:-1] & comp_mask
        dome_labels, _ = ndi.label(domes | seeds, structure=EIGHT)
        kept = np.unique(dome_labels[seeds])
        seeds = np.isin(dome_labels, kept[kept > 0])

        seed_labels, count = ndi.label(seeds, structure=EIGHT)
        view = markers[sl]
        view[seed_labels > 0] = seed_labels[seed_labels > 0] + (next_id - 1)
        next_id += count

    return markers


def segment(image: DropletImage, opts: Optional[SegOpts] = None) -> SegmentationResult:
    """Split a droplet image into indexed, 4-connected droplet regions."""
    opts = opts or SegOpts()
    shape = image.pixels.shape

    fg = foreground_mask(image, opts)
    if fg is None:
        return _empty(shape)

    if opts.opening_iterations > 0:
        opened = ndi.binary_opening(fg, structure=OPENING_STRUCTURE, iterations=opts.opening_iterations)
    else:
        opened = fg
    if not opened.any():
        return _empty(shape)

    distance = ndi.distance_transform_edt(opened)
    markers = _prominence_markers(opened, distance, opts.marker_frac)
    flooded = watershed(-distance, markers, mask=opened, connectivity=1)

    labels = np.zeros(shape, dtype=np.int32)
    regions: List[np.ndarray] = []
    for region_id, sl in enumerate(ndi.find_objects(flooded), start=1):
        if sl is None:
            continue
        pieces, count = ndi.label(flooded[sl] == region_id, structure=CROSS)
        offset = np.array([sl[0].start, sl[1].start])
        for piece_id in range(1, count + 1):
            piece = pieces == piece_id
            if np.count_nonzero(piece) < opts.min_area:
                continue
            regions.append(np.argwhere(piece) + offset)
            labels[sl][piece] = len(regions)

    logger.debug(f"Segmented {len(regions)} droplets from {markers.max()} markers")
    return SegmentationResult(labels=labels, regions=regions)


# Geometry

def boundary_pixels(coords: np.ndarray) -> np.ndarray:
    """Region pixels with at least one 4-neighbour outside the region (row-major)."""
    coords = np.asarray(coords, dtype=np.int64)
    origin = coords.min(axis=0) - 1
    local = coords - origin
    mask = np.zeros(tuple(local.max(axis=0) + 2), dtype=bool)
    mask[local[:, 0], local[:, 1]] = True
    edge = mask & ~ndi.binary_erosion(mask, structure=CROSS)
    return np.argwhere(edge) + origin


def _first_max_pair(points: np.ndarray, score: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> Tuple[int, int, int]:
    """Pair (i, j) maximizing a symmetric integer score, first in row-major order."""
    n = len(points)
    block = max(1, PAIR_BLOCK_ELEMENTS // max(n, 1))
    best_value, best_i, best_j = None, 0, 0
    for start in range(0, n, block):
        values = score(points[start:start + block], points)
        flat = int(np.argmax(values))
        value = int(values.flat[flat])
        if best_value is None or value > best_value:
            best_value = value
            best_i, best_j = start + flat // n, flat % n
    return best_i, best_j, best_value


def _squared_distance(rows: np.ndarray, points: np.ndarray) -> np.ndarray:
    diff = rows[:, None, :] - points[None, :, :]
    return diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1]


def _perpendicular_width(axis: np.ndarray, axis_sq: int) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Score |cross(e, axis)| for chords e nearly perpendicular to the axis, else -1."""
    def score(rows: np.ndarray, points: np.ndarray) -> np.ndarray:
        diff = points[None, :, :] - rows[:, None, :]
        dot = diff[..., 0] * axis[0] + diff[..., 1] * axis[1]
        cross = np.abs(diff[..., 0] * axis[1] - diff[..., 1] * axis[0])
        limit = (2.0 * PERPENDICULAR_TOLERANCE) ** 2
        ok = limit * axis_sq >= 4 * dot * dot
        return np.where(ok, cross, -1)
    return score


def disk_pixels(center: Tuple[float, float], radius: float) -> np.ndarray:
    """Pixel centres within `radius` of `center`, unclipped, row-major."""
    cr, cc = center
    r0, r1 = int(np.floor(cr - radius)), int(np.ceil(cr + radius))
    c0, c1 = int(np.floor(cc - radius)), int(np.ceil(cc + radius))
    rows = np.arange(r0, r1 + 1)[:, None]
    cols = np.arange(c0, c1 + 1)[None, :]
    inside = (rows - cr) ** 2 + (cols - cc) ** 2 <= radius * radius
    return np.argwhere(inside) + np.array([r0, c0])


def droplet_geometry(coords: np.ndarray) -> DropletGeometry:
    """Major chord, perpendicular minor chord, and the circle they define."""
    coords = np.asarray(coords, dtype=np.int64)
    area = len(coords)
    if area < 3:
        raise DegenerateRegionError(area)

    edge = boundary_pixels(coords)
    i, j, major_sq = _first_max_pair(edge, _squared_distance)
    if major_sq == 0:
        raise DegenerateRegionError(area, "single boundary point")
    p = edge[i]
    axis = edge[j] - p

    r_major = float(np.sqrt(major_sq))
    k, l, width = _first_max_pair(edge, _perpendicular_width(axis, major_sq))
    if width <= 0:
        # One pixel wide: no minor chord, centre on the major chord.
        r_minor = 0.0
        centroid = (p[0] + 0.5 * axis[0], p[1] + 0.5 * axis[1])
    else:
        a = edge[k]
        chord = edge[l] - a
        r_minor = width / r_major

        # Chord intersection: p + t * axis == a + s * chord
        denom = int(axis[0] * chord[1] - axis[1] * chord[0])
        offset = a - p
        t = int(offset[0] * chord[1] - offset[1] * chord[0]) / denom
        centroid = (p[0] + t * axis[0], p[1] + t * axis[1])

    radius = (r_major + r_minor) / 4.0
    return DropletGeometry(
        centroid=(float(centroid[0]), float(centroid[1])),
        r_major=r_major,
        r_minor=r_minor,
        circle_radius=radius,
        circle_pixels=disk_pixels(centroid, radius),
    )


def _pixel_keys(coords: np.ndarray) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.int64) + (1 << 20)
    return coords[:, 0] * (1 << 22) + coords[:, 1]


def xor_count(region: np.ndarray, circle: np.ndarray) -> int:
    """|region XOR circle| for two pixel sets."""
    a, b = np.unique(_pixel_keys(region)), np.unique(_pixel_keys(circle))
    common = np.intersect1d(a, b, assume_unique=True).size
    return int(a.size + b.size - 2 * common)


# Losses

def geom_loss(seg: SegmentationResult) -> float:
    """Summed droplet/circle XOR over summed droplet area, in [0, 1]; 1 with no droplets."""
    if seg.droplet_count == 0:
        return 1.0

    mismatch = 0
    area = 0
    for coords in seg.regions:
        area += len(coords)
        try:
            geometry = droplet_geometry(coords)
        except DegenerateRegionError:
            mismatch += len(coords)
            continue
        mismatch += xor_count(coords, geometry.circle_pixels)

    return min(1.0, mismatch / area)


def yield_loss(seg: SegmentationResult, count_max: int) -> float:
    """Half background fraction plus half the shortfall of droplets below count_max."""
    if count_max < 1:
        raise InvalidCountMaxError(count_max)

    background = seg.background_pixels / seg.total_pixels
    shortfall = (count_max - min(seg.droplet_count, count_max)) / count_max
    return 0.5 * background + 0.5 * shortfall


def score(image: DropletImage, opts: Optional[SegOpts] = None, count_max: int = 50) -> ScoreResult:
    """Segment and score one image: loss = (L_geom + L_yield) / 2."""
    seg = segment(image, opts)
    g = geom_loss(seg)
    y = yield_loss(seg, count_max)

    if seg.droplet_count:
        diameters = 2.0 * np.sqrt(seg.areas / np.pi)
        mean_diameter = float(diameters.mean())
        cv = float(diameters.std() / mean_diameter) if mean_diameter > 0 else 0.0
    else:
        mean_diameter, cv = 0.0, 0.0

    return ScoreResult(
        loss=(g + y) / 2.0,
        geom_loss=g,
        yield_loss=y,
        segmentation=seg,
        mean_diameter_px=mean_diameter,
        diameter_cv=cv,
    )
