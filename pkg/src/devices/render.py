"""Anti-aliased raster primitives for the device simulators.

Shapes are accumulated as coverage in [0, 1] (0.5 px soft edge from a signed
distance) and turned into an 8-bit image at the end.
"""

from typing import Tuple

import numpy as np


class Canvas:
    """Coverage buffer of a simulated camera frame."""

    def __init__(self, height: int, width: int):
        self.height = height
        self.width = width
        self.coverage = np.zeros((height, width), dtype=float)

    def _window(self, center: Tuple[float, float], reach: float):
        r0 = max(0, int(np.floor(center[0] - reach - 1)))
        r1 = min(self.height, int(np.ceil(center[0] + reach + 2)))
        c0 = max(0, int(np.floor(center[1] - reach - 1)))
        c1 = min(self.width, int(np.ceil(center[1] + reach + 2)))
        if r0 >= r1 or c0 >= c1:
            return None
        rows = np.arange(r0, r1, dtype=float)[:, None]
        cols = np.arange(c0, c1, dtype=float)[None, :]
        return (slice(r0, r1), slice(c0, c1)), rows, cols

    def _stamp(self, window, distance: np.ndarray) -> None:
        sl = window
        self.coverage[sl] = np.maximum(self.coverage[sl], np.clip(0.5 - distance, 0.0, 1.0))

    def ellipse(self, center: Tuple[float, float], semi_major: float, semi_minor: float, angle: float) -> None:
        """Filled ellipse; `angle` is the major-axis direction in radians from the column axis."""
        found = self._window(center, max(semi_major, semi_minor))
        if found is None:
            return
        sl, rows, cols = found
        dr, dc = rows - center[0], cols - center[1]
        cos, sin = np.cos(angle), np.sin(angle)
        u = dc * cos + dr * sin
        v = -dc * sin + dr * cos
        level = (u / semi_major) ** 2 + (v / semi_minor) ** 2 - 1.0
        slope = 2.0 * np.sqrt((u / semi_major ** 2) ** 2 + (v / semi_minor ** 2) ** 2)
        # First-order distance to the outline; the centre is simply inside.
        distance = np.where(slope > 0, level / np.where(slope > 0, slope, 1.0), -semi_minor)
        self._stamp(sl, distance)

    def disk(self, center: Tuple[float, float], radius: float) -> None:
        found = self._window(center, radius)
        if found is None:
            return
        sl, rows, cols = found
        distance = np.hypot(rows - center[0], cols - center[1]) - radius
        self._stamp(sl, distance)

    def capsule(self, start: Tuple[float, float], end: Tuple[float, float], radius: float) -> None:
        """Segment swept by a disk (a rounded bar)."""
        center = ((start[0] + end[0]) / 2.0, (start[1] + end[1]) / 2.0)
        half = np.hypot(end[0] - start[0], end[1] - start[1]) / 2.0
        found = self._window(center, half + radius)
        if found is None:
            return
        sl, rows, cols = found
        seg = np.array(end, dtype=float) - np.array(start, dtype=float)
        seg_sq = float(seg @ seg)
        pr, pc = rows - start[0], cols - start[1]
        t = np.clip((pr * seg[0] + pc * seg[1]) / seg_sq, 0.0, 1.0) if seg_sq > 0 else 0.0
        distance = np.hypot(pr - t * seg[0], pc - t * seg[1]) - radius
        self._stamp(sl, distance)

    def band(self, center_row: float, thickness: float) -> None:
        """Full-width horizontal stripe."""
        rows = np.arange(self.height, dtype=float)[:, None]
        distance = np.abs(rows - center_row) - thickness / 2.0
        cover = np.clip(0.5 - distance, 0.0, 1.0)
        self.coverage = np.maximum(self.coverage, np.broadcast_to(cover, self.coverage.shape))

    def to_pixels(self, background: float, foreground: float, noise_sigma: float,
                  rng: np.random.Generator) -> np.ndarray:
        """Blend, add Gaussian sensor noise, quantize to uint8."""
        image = background + (foreground - background) * self.coverage
        if noise_sigma > 0:
            image = image + rng.normal(0.0, noise_sigma, size=image.shape)
        return np.clip(np.rint(image), 0, 255).astype(np.uint8)
