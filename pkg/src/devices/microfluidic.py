"""Synthetic flow-focusing microfluidic chip imaged through a microscope.

Controls (normalized): water_pressure, oil_pressure. Droplets pinch off inside
a band where the two pressures rise together:

    delta = water - 0.65 * oil,   |delta| < 0.18  and  oil > 0.1

Above the band water jets through as a continuous stream; below it there is
no flow. Within the band drops shrink as oil pressure grows, stretch along
the flow near the upper edge and thin out near the lower edge. Water is
bright on a dark channel.
"""

from typing import Optional

import numpy as np

from src.core.space import ControlVector, ParameterDef, ParameterSpace
from src.core.vision import DropletImage
from src.devices.base import DeviceAdapter
from src.devices.render import Canvas

WIDTH = 512
HEIGHT = 256
BACKGROUND = 60.0
WATER = 180.0
NOISE_SIGMA = 4.0

BAND_SLOPE = 0.65
BAND_HALF_WIDTH = 0.18
MIN_OIL = 0.1
MIN_WATER = 0.05

MAX_STRETCH = 1.8
WALL_MARGIN = 8.0
POSITION_JITTER = 2.0


def microfluidic_space() -> ParameterSpace:
    return ParameterSpace(dims=[
        ParameterDef(name="water_pressure", unit="mbar", lower=0.0, upper=2000.0),
        ParameterDef(name="oil_pressure", unit="mbar", lower=0.0, upper=2000.0),
    ])


def band_offset(x: ControlVector) -> float:
    return float(x[0]) - BAND_SLOPE * float(x[1])


class MicrofluidicSimulator(DeviceAdapter):
    """Deterministic stand-in for the chip, pressure controller and camera."""

    name = "microfluidic-sim"
    count_max = 30

    def __init__(self, space: Optional[ParameterSpace] = None):
        space = space or microfluidic_space()
        if space.n != 2:
            raise ValueError("microfluidic simulator needs exactly 2 parameters (water, oil)")
        super().__init__(space)

    def regime(self, x: ControlVector) -> str:
        x = self.check_point(x)
        if x[1] <= MIN_OIL:
            return "stream" if x[0] > MIN_WATER else "no_flow"
        delta = band_offset(x)
        if delta > BAND_HALF_WIDTH:
            return "stream"
        if delta < -BAND_HALF_WIDTH:
            return "no_flow"
        return "droplets"

    def run(self, x: ControlVector, seed: int) -> DropletImage:
        x = self.check_point(x)
        rng = np.random.default_rng(seed)
        canvas = Canvas(HEIGHT, WIDTH)
        delta = band_offset(x)

        regime = self.regime(x)
        if regime == "stream":
            excess = max(delta - BAND_HALF_WIDTH, 0.0)
            canvas.band(HEIGHT / 2.0 + rng.uniform(-POSITION_JITTER, POSITION_JITTER), 30.0 + 80.0 * excess)
        elif regime == "droplets":
            self._droplets(canvas, delta, float(x[1]), rng)

        return DropletImage(canvas.to_pixels(BACKGROUND, WATER, NOISE_SIGMA, rng))

    def _droplets(self, canvas: Canvas, delta: float, oil: float, rng: np.random.Generator) -> None:
        radius = 40.0 - 22.0 * oil
        centrality = 1.0 - abs(delta) / BAND_HALF_WIDTH
        stretch = 1.0 + 0.8 * (1.0 - centrality) if delta > 0 else 1.0
        stretch = min(stretch, MAX_STRETCH)
        keep = centrality if delta < 0 else 1.0

        pitch = 3.0 * radius
        row_pitch = pitch * np.sqrt(3.0) / 2.0
        edge = radius + WALL_MARGIN

        row = 0
        cr = edge
        while cr <= HEIGHT - edge:
            cc = edge + (pitch / 2.0 if row % 2 else 0.0)
            while cc <= WIDTH - edge:
                jitter = rng.uniform(-POSITION_JITTER, POSITION_JITTER, size=2)
                tilt = rng.normal(0.0, 0.05)
                present = rng.random() < keep
                if present:
                    center = (cr + jitter[0], cc + jitter[1])
                    canvas.ellipse(center, radius * np.sqrt(stretch), radius / np.sqrt(stretch), tilt)
                cc += pitch
            cr += row_pitch
            row += 1
