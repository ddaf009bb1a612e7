"""Synthetic piezo inkjet printer imaging droplets on a deposition plate.

Controls (normalized): pressure, frequency, speed. Droplet formation is
governed by a regime score that ignores pressure:

    rho = 0.6 * (1 - frequency) + 0.4 * speed

rho > 0.55 prints rows of near-circular drops (more and rounder as rho grows),
0.35 <= rho <= 0.55 prints elongated merging blobs, lower rho prints
continuous streaks. Drops are dark on a light plate.
"""

from typing import Optional

import numpy as np

from src.core.space import ControlVector, ParameterDef, ParameterSpace
from src.core.vision import DropletImage
from src.devices.base import DeviceAdapter
from src.devices.render import Canvas

SIZE = 512
BACKGROUND = 210.0
INK = 60.0
NOISE_SIGMA = 4.0

W_FREQUENCY = 0.6
W_SPEED = 0.4
DROPLET_ONSET = 0.55
STREAK_ONSET = 0.35

MAX_ASPECT = 1.8
POSITION_JITTER = 3.0


def inkjet_space() -> ParameterSpace:
    return ParameterSpace(dims=[
        ParameterDef(name="pressure", unit="MPa", lower=0.03, upper=0.15),
        ParameterDef(name="frequency", unit="Hz", lower=1.0, upper=600.0),
        ParameterDef(name="speed", unit="mm/s", lower=10.0, upper=360.0),
    ])


def regime_score(x: ControlVector) -> float:
    return W_FREQUENCY * (1.0 - float(x[1])) + W_SPEED * float(x[2])


class InkjetSimulator(DeviceAdapter):
    """Deterministic stand-in for the printer + camera."""

    name = "inkjet-sim"
    count_max = 50

    def __init__(self, space: Optional[ParameterSpace] = None, size: int = SIZE):
        space = space or inkjet_space()
        if space.n != 3:
            raise ValueError("inkjet simulator needs exactly 3 parameters (pressure, frequency, speed)")
        super().__init__(space)
        self.size = size

    def regime(self, x: ControlVector) -> str:
        rho = regime_score(self.check_point(x))
        if rho > DROPLET_ONSET:
            return "droplets"
        if rho >= STREAK_ONSET:
            return "transition"
        return "streaks"

    def run(self, x: ControlVector, seed: int) -> DropletImage:
        x = self.check_point(x)
        rng = np.random.default_rng(seed)
        canvas = Canvas(self.size, self.size)
        rho = regime_score(x)

        if rho > DROPLET_ONSET:
            self._droplets(canvas, rho, float(x[0]), rng)
        elif rho >= STREAK_ONSET:
            self._blobs(canvas, rho, rng)
        else:
            self._streaks(canvas, rng)

        return DropletImage(canvas.to_pixels(BACKGROUND, INK, NOISE_SIGMA, rng))

    def _droplets(self, canvas: Canvas, rho: float, pressure: float, rng: np.random.Generator) -> None:
        quality = (rho - DROPLET_ONSET) / (1.0 - DROPLET_ONSET)
        per_axis = 4 + int(round(3 * quality))
        pitch = self.size / per_axis
        # Pressure only nudges the drop volume.
        radius = 16.0 + 4.0 * quality + 1.5 * (pressure - 0.5)
        sigma_e = 0.05 + 0.35 * (1.0 - quality)

        for i in range(per_axis):
            for j in range(per_axis):
                aspect = min(MAX_ASPECT, 1.0 + abs(rng.normal(0.0, sigma_e)))
                angle = rng.uniform(0.0, np.pi)
                jitter = rng.uniform(-POSITION_JITTER, POSITION_JITTER, size=2)
                center = ((i + 0.5) * pitch + jitter[0], (j + 0.5) * pitch + jitter[1])
                # Area-preserving stretch
                canvas.ellipse(center, radius * np.sqrt(aspect), radius / np.sqrt(aspect), angle)

    def _blobs(self, canvas: Canvas, rho: float, rng: np.random.Generator) -> None:
        t = (rho - STREAK_ONSET) / (DROPLET_ONSET - STREAK_ONSET)
        length = 140.0 - 60.0 * t
        radius = 12.0 + 4.0 * t
        rows, cols = 4, 3
        row_pitch, col_pitch = self.size / rows, self.size / cols

        for i in range(rows):
            for j in range(cols):
                cr = (i + 0.5) * row_pitch + rng.uniform(-POSITION_JITTER, POSITION_JITTER)
                cc = (j + 0.5) * col_pitch + rng.uniform(-POSITION_JITTER, POSITION_JITTER)
                tilt = rng.normal(0.0, 0.05)
                dr, dc = 0.5 * length * np.sin(tilt), 0.5 * length * np.cos(tilt)
                canvas.capsule((cr - dr, cc - dc), (cr + dr, cc + dc), radius)

    def _streaks(self, canvas: Canvas, rng: np.random.Generator) -> None:
        count = 6
        pitch = self.size / count
        for i in range(count):
            thickness = rng.uniform(8.0, 14.0)
            center = (i + 0.5) * pitch + rng.uniform(-POSITION_JITTER, POSITION_JITTER)
            canvas.band(center, thickness)
