"""Human-in-the-loop device: suggestions go out as CSV, images come back as files.

Run directory layout::

    run.lock                      pid + timestamp of the owning process
    batch_<k>_suggestions.csv     sample_id,<name>_<unit>,...  (physical units)
    batch_<k>/sample_<i>.png      images dropped in by the operator (or .pgm)
"""

import os
import socket
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from config.config import config
from src.core.imaging import load_image
from src.core.space import ControlVector, ParameterSpace, denormalize, normalize
from src.core.vision import DropletImage
from src.devices.base import DeviceAdapter
from src.utils.errors import (
    BadImageError,
    DeviceTimeoutError,
    IoError,
    MissingImageError,
    RunDirectoryLockedError,
)
from src.utils.logger import get_logger

logger = get_logger(__name__)

LOCK_NAME = "run.lock"
CSV_FLOAT_FORMAT = "%.12g"
IMAGE_SUFFIXES = (".png", ".pgm")


def suggestions_path(run_dir: Path, batch_index: int) -> Path:
    return run_dir / f"batch_{batch_index}_suggestions.csv"


def image_dir(run_dir: Path, batch_index: int) -> Path:
    return run_dir / f"batch_{batch_index}"


class FileAdapter(DeviceAdapter):
    """Exchanges suggestions and images with an operator through a run directory."""

    name = "files"

    def __init__(
        self,
        run_dir: Union[str, Path],
        space: ParameterSpace,
        timeout: Optional[float] = None,
        poll_interval: Optional[float] = None,
        skip_bad_images: bool = False,
        count_max: int = 50,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.monotonic,
    ):
        super().__init__(space)
        self.run_dir = Path(run_dir)
        self.timeout = config.FILE_TIMEOUT if timeout is None else timeout
        self.poll_interval = config.FILE_POLL_INTERVAL if poll_interval is None else poll_interval
        self.skip_bad_images = skip_bad_images
        self.count_max = count_max
        self._sleep = sleep
        self._clock = clock
        self._locked = False
        self._refs: Dict[tuple, str] = {}
        self._last_batch = -1

    # Lock

    @property
    def lock_path(self) -> Path:
        return self.run_dir / LOCK_NAME

    def acquire(self) -> None:
        """Take the run-directory lock (one adapter per directory)."""
        if self._locked:
            return
        try:
            self.run_dir.mkdir(parents=True, exist_ok=True)
            fd = os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
        except FileExistsError:
            try:
                holder = self.lock_path.read_text(encoding="utf-8").strip()
            except OSError:
                holder = "unknown holder"
            raise RunDirectoryLockedError(str(self.run_dir), holder)
        except OSError as e:
            raise IoError(str(self.run_dir), e.strerror or str(e))

        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(f"pid={os.getpid()} host={socket.gethostname()} started={stamp}\n")
        self._locked = True
        logger.info(f"Locked run directory {self.run_dir}")

    def close(self) -> None:
        if self._locked:
            try:
                self.lock_path.unlink()
            except FileNotFoundError:
                pass
            self._locked = False

    def __enter__(self):
        self.acquire()
        return self

    # Suggestions

    def write_suggestions(self, batch_index: int, points: Sequence[ControlVector]) -> Path:
        """Write the batch's suggestions in physical units."""
        physical = denormalize(self.space, np.asarray(points, dtype=float).reshape(-1, self.space.n))
        frame = pd.DataFrame(physical, columns=[d.column for d in self.space.dims])
        frame.insert(0, "sample_id", np.arange(len(frame)))

        path = suggestions_path(self.run_dir, batch_index)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
        except OSError as e:
            raise IoError(str(path), e.strerror or str(e))

        logger.info(f"Wrote {len(frame)} suggestions to {path}")
        return path

    def read_suggestions(self, batch_index: int) -> np.ndarray:
        """Normalized control vectors of a suggestions file, in sample_id order."""
        path = suggestions_path(self.run_dir, batch_index)
        try:
            frame = pd.read_csv(path)
        except OSError as e:
            raise IoError(str(path), e.strerror or str(e))

        frame = frame.sort_values("sample_id")
        columns = [d.column for d in self.space.dims]
        return np.array([normalize(self.space, row) for row in frame[columns].to_numpy(dtype=float)])

    # Images

    def _find_image(self, batch_index: int, sample_index: int) -> Optional[Path]:
        folder = image_dir(self.run_dir, batch_index)
        for suffix in IMAGE_SUFFIXES:
            candidate = folder / f"sample_{sample_index}{suffix}"
            if candidate.is_file():
                return candidate
        return None

    def wait_for_images(self, batch_index: int, count: int) -> Dict[int, Path]:
        """Poll until every sample image exists or the timeout passes."""
        found: Dict[int, Path] = {}
        start = self._clock()
        announced = False

        while True:
            for i in range(count):
                if i not in found:
                    path = self._find_image(batch_index, i)
                    if path is not None:
                        found[i] = path
            if len(found) == count:
                return found

            if self._clock() - start >= self.timeout:
                break
            if not announced:
                logger.info(
                    f"Waiting for {count - len(found)} images in {image_dir(self.run_dir, batch_index)}"
                )
                announced = True
            self._sleep(self.poll_interval)

        if not found:
            raise DeviceTimeoutError(batch_index, self.timeout)
        raise MissingImageError(batch_index, [i for i in range(count) if i not in found])

    def run_batch(self, points: Sequence[ControlVector], seeds: Sequence[int], batch_index: int,
                  jobs: int = 1) -> List[Optional[DropletImage]]:
        self.acquire()
        points = [self.check_point(x) for x in points]
        self.write_suggestions(batch_index, points)
        paths = self.wait_for_images(batch_index, len(points))
        self._last_batch = max(self._last_batch, batch_index)

        started = time.perf_counter()
        images: List[Optional[DropletImage]] = []
        for i in range(len(points)):
            self._refs[(batch_index, i)] = paths[i].relative_to(self.run_dir).as_posix()
            try:
                images.append(load_image(paths[i]))
            except BadImageError as e:
                if not self.skip_bad_images:
                    raise BadImageError(str(paths[i]), e.detail, sample=i)
                logger.warning(f"Skipping unreadable image for sample {i} of batch {batch_index}: {e}")
                images.append(None)
        self.last_read_seconds = time.perf_counter() - started
        return images

    def run(self, x: ControlVector, seed: int) -> DropletImage:
        """Single suggestion as its own batch (blocks like a batch would)."""
        image = self.run_batch([x], [seed], self._last_batch + 1)[0]
        if image is None:
            raise BadImageError(self._refs.get((self._last_batch, 0)), "unreadable image")
        return image

    def image_ref(self, batch_index: int, sample_index: int) -> Optional[str]:
        return self._refs.get((batch_index, sample_index), f"batch_{batch_index}/sample_{sample_index}.png")
