"""Device adapter contract and helpers shared by simulators and lab adapters."""

from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import numpy as np

from src.core.rng import Stream, derive_seed, make_rng
from src.core.space import ControlVector, ParameterSpace, in_unit_cube
from src.core.vision import DropletImage, SegOpts, score
from src.utils.errors import DeviceFailureError, DropletBoError
from src.utils.logger import get_logger

logger = get_logger(__name__)


class DeviceAdapter(ABC):
    """Turns a normalized control vector into a droplet image."""

    name: str = "device"
    count_max: int = 50
    # Seconds spent loading image files during the last run_batch
    last_read_seconds: float = 0.0

    def __init__(self, space: ParameterSpace):
        self._space = space

    @property
    def space(self) -> ParameterSpace:
        return self._space

    def check_point(self, x: ControlVector) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.space.n,):
            raise ValueError(f"{self.name} expects {self.space.n} controls, got shape {x.shape}")
        if not in_unit_cube(x):
            raise ValueError(f"{self.name}: control vector outside [0, 1]^{self.space.n}")
        return x

    @abstractmethod
    def run(self, x: ControlVector, seed: int) -> DropletImage:
        """Run one experiment and return its image."""

    def run_batch(self, points: Sequence[ControlVector], seeds: Sequence[int], batch_index: int,
                  jobs: int = 1) -> List[Optional[DropletImage]]:
        """Run a batch; results come back in input order whatever the worker count."""
        if len(points) != len(seeds):
            raise ValueError("points and seeds must have the same length")

        def run_one(i: int) -> DropletImage:
            try:
                return self.run(points[i], seeds[i])
            except DropletBoError:
                raise
            except Exception as e:
                raise DeviceFailureError(batch_index, i, e)

        if jobs <= 1 or len(points) <= 1:
            return [run_one(i) for i in range(len(points))]

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run_one, range(len(points))))

    def image_ref(self, batch_index: int, sample_index: int) -> Optional[str]:
        """Name of the image artifact behind a sample."""
        return f"{self.name}:batch_{batch_index}/sample_{sample_index}"

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()


def feasible_volume(device: DeviceAdapter, n: int = 10_000, seed: int = 0, threshold: float = 0.75,
                    opts: Optional[SegOpts] = None, jobs: int = 1) -> float:
    """Monte-Carlo fraction of the control box whose loss is below `threshold`.

    This is the hit rate of pure random sampling, the baseline a BO campaign
    has to beat.
    """
    if n < 1:
        raise ValueError("n must be >= 1")

    rng = make_rng(seed, Stream.ANALYSIS)
    points = rng.random((n, device.space.n))
    seeds = [derive_seed(seed, Stream.ANALYSIS, i) for i in range(n)]

    def loss_at(i: int) -> float:
        image = device.run(points[i], seeds[i])
        return score(image, opts, device.count_max).loss

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            losses = list(pool.map(loss_at, range(n)))
    else:
        losses = [loss_at(i) for i in range(n)]

    fraction = float(np.mean(np.asarray(losses) < threshold))
    logger.info(f"Feasible volume of {device.name}: {fraction:.4f} over {n} random points")
    return fraction
