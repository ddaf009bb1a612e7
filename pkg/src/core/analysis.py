"""Post-hoc metrics and plot-ready tables of an experiment."""

import itertools
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import gaussian_kde

from src.core.acquisition import acquisition_values
from src.core.state import ExperimentState, Sample
from src.core.surrogate import GpModel
from src.utils.errors import EmptyScopeError, IoError
from src.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_THRESHOLD = 0.75
DENSITY_GRID_POINTS = 256
TOPOLOGY_BANDWIDTH = 0.1
TOPOLOGY_MAX_DISTANCE = 0.25
TOPOLOGY_RESOLUTION = 50


class Scope(str, Enum):
    ACQUIRED_ONLY = "acquired_only"
    ALL = "all"


def _scored(state: ExperimentState) -> List[Sample]:
    return state.scored_samples


def _in_scope(state: ExperimentState, scope: Scope) -> List[Sample]:
    samples = _scored(state)
    if Scope(scope) is Scope.ACQUIRED_ONLY:
        samples = [s for s in samples if s.batch_index > 0]
    return samples


# Scalar metrics

def feasibility_fraction(state: ExperimentState, threshold: float = DEFAULT_THRESHOLD,
                         scope: Scope = Scope.ACQUIRED_ONLY) -> float:
    """Fraction of in-scope samples whose loss is below `threshold`."""
    samples = _in_scope(state, scope)
    if not samples:
        raise EmptyScopeError(Scope(scope).value)
    return sum(1 for s in samples if s.loss < threshold) / len(samples)


def running_minimum(state: ExperimentState) -> List[float]:
    losses = np.array([s.loss for s in _scored(state)], dtype=float)
    if losses.size == 0:
        return []
    return np.minimum.accumulate(losses).tolist()


def sample_efficiency(state: ExperimentState, threshold: float = DEFAULT_THRESHOLD) -> Dict[str, Any]:
    """Feasibility over both scopes, per batch, and the running best after each batch."""
    def safe_fraction(scope: Scope) -> Optional[float]:
        try:
            return feasibility_fraction(state, threshold, scope)
        except EmptyScopeError:
            return None

    per_batch, best_after = {}, {}
    running = None
    for k in range(state.last_batch + 1):
        batch = [s for s in state.batch(k) if not s.skipped]
        if batch:
            per_batch[str(k)] = sum(1 for s in batch if s.loss < threshold) / len(batch)
            low = min(s.loss for s in batch)
            running = low if running is None else min(running, low)
        best_after[str(k)] = running

    return {
        "threshold": threshold,
        "samples": len(state.samples),
        "scored": len(_scored(state)),
        "skipped": len(state.samples) - len(_scored(state)),
        "feasibility_acquired_only": safe_fraction(Scope.ACQUIRED_ONLY),
        "feasibility_all": safe_fraction(Scope.ALL),
        "feasibility_per_batch": per_batch,
        "best_after_batch": best_after,
    }


# Density

@dataclass(frozen=True)
class DensityEstimate:
    """KDE of one coordinate on [0, 1]; point_mass is set instead when all values coincide."""

    grid: np.ndarray
    density: np.ndarray
    point_mass: Optional[float] = None

    @property
    def is_point_mass(self) -> bool:
        return self.point_mass is not None


def kde_reflected(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Gaussian KDE (Scott bandwidth) with mass reflected back at 0 and 1."""
    kde = gaussian_kde(values, bw_method="scott")
    return kde(grid) + kde(-grid) + kde(2.0 - grid)


def parameter_density(state: ExperimentState, dim: int, grid_points: int = DENSITY_GRID_POINTS,
                      batches: Optional[Iterable[int]] = None) -> DensityEstimate:
    """Sampling density of one normalized coordinate, optionally for selected batches only."""
    samples = _scored(state)
    if batches is not None:
        wanted = set(batches)
        samples = [s for s in samples if s.batch_index in wanted]
    if len(samples) < 2:
        raise EmptyScopeError(f"density of dimension {dim}")

    values = np.array([s.x[dim] for s in samples], dtype=float)
    grid = np.linspace(0.0, 1.0, grid_points)
    if np.all(values == values[0]):
        return DensityEstimate(grid=grid, density=np.zeros_like(grid), point_mass=float(values[0]))

    return DensityEstimate(grid=grid, density=kde_reflected(values, grid))


# Topology

@dataclass(frozen=True)
class TopologyGrid:
    """Values over a 2-D slice; values[i, j] sits at (axis[i], axis[j]), NaN = no data."""

    dims: Tuple[int, int]
    axis: np.ndarray
    values: np.ndarray


def cell_centers(resolution: int) -> np.ndarray:
    return (np.arange(resolution) + 0.5) / resolution


def topology_grid(state: ExperimentState, dims: Tuple[int, int] = (0, 1), resolution: int = TOPOLOGY_RESOLUTION,
                  bandwidth: float = TOPOLOGY_BANDWIDTH, max_distance: float = TOPOLOGY_MAX_DISTANCE) -> TopologyGrid:
    """Gaussian-weighted average of observed losses; cells far from every sample stay empty."""
    samples = _scored(state)
    if not samples:
        raise EmptyScopeError("topology")

    a, b = dims
    points = np.array([[s.x[a], s.x[b]] for s in samples], dtype=float)
    losses = np.array([s.loss for s in samples], dtype=float)

    axis = cell_centers(resolution)
    ga, gb = np.meshgrid(axis, axis, indexing="ij")
    cells = np.stack([ga.ravel(), gb.ravel()], axis=1)

    dist_sq = np.sum((cells[:, None, :] - points[None, :, :]) ** 2, axis=-1)
    weights = np.exp(-dist_sq / (2.0 * bandwidth ** 2))
    values = (weights @ losses) / np.sum(weights, axis=1)
    values[np.sqrt(dist_sq.min(axis=1)) > max_distance] = np.nan

    return TopologyGrid(dims=(a, b), axis=axis, values=values.reshape(resolution, resolution))


def acquisition_map(state: ExperimentState, batch_index: int, dims: Tuple[int, int] = (0, 1),
                    resolution: int = TOPOLOGY_RESOLUTION) -> TopologyGrid:
    """Acquisition surface batch `batch_index` was chosen from, over two dimensions.

    The surrogate is rebuilt from the stored hyperparameters and the samples it
    was trained on; the other dimensions are held at that batch's best point.
    """
    record = next((r for r in state.surrogates if r.batch_index == batch_index), None)
    if record is None:
        raise EmptyScopeError(f"surrogate of batch {batch_index}")

    train = [s for s in _scored(state) if s.batch_index < batch_index]
    x = np.array([s.x for s in train], dtype=float)
    y = np.array([s.loss for s in train], dtype=float)
    model = GpModel.from_hyperparams(x, y, record.hyper)

    anchor = x[int(np.argmin(y))]
    axis = cell_centers(resolution)
    ga, gb = np.meshgrid(axis, axis, indexing="ij")
    candidates = np.tile(anchor, (resolution * resolution, 1))
    candidates[:, dims[0]] = ga.ravel()
    candidates[:, dims[1]] = gb.ravel()

    values = acquisition_values(model, state.config.acquisition, candidates,
                                best=float(np.min(y)), beta=state.config.lcb_beta)
    return TopologyGrid(dims=tuple(dims), axis=axis, values=values.reshape(resolution, resolution))


# Writers

def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format="%.12g", lineterminator="\n")
    except OSError as e:
        raise IoError(str(path), e.strerror or str(e))
    return path


def write_running_min(state: ExperimentState, path: Union[str, Path]) -> Path:
    losses = [s.loss for s in _scored(state)]
    frame = pd.DataFrame({
        "sample_index": np.arange(len(losses)),
        "loss": losses,
        "running_min": running_minimum(state),
    })
    return _write_frame(frame, Path(path))


def write_density(estimate: DensityEstimate, path: Union[str, Path]) -> Path:
    frame = pd.DataFrame({"coordinate": estimate.grid, "density": estimate.density})
    return _write_frame(frame, Path(path))


def write_grid(grid: TopologyGrid, names: Sequence[str], path: Union[str, Path], value: str = "loss") -> Path:
    ga, gb = np.meshgrid(grid.axis, grid.axis, indexing="ij")
    frame = pd.DataFrame({names[0]: ga.ravel(), names[1]: gb.ravel(), value: grid.values.ravel()})
    return _write_frame(frame, Path(path))


def write_feasibility(summary: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoError(str(path), e.strerror or str(e))
    return path


def write_report(state: ExperimentState, out_dir: Union[str, Path],
                 threshold: float = DEFAULT_THRESHOLD) -> List[Path]:
    """Every analysis artifact of a state: feasibility, trace, densities, topologies, acquisition maps."""
    out = Path(out_dir)
    if not _scored(state):
        raise EmptyScopeError("all")

    names = state.space.names
    written = [
        write_feasibility(sample_efficiency(state, threshold), out / "feasibility.json"),
        write_running_min(state, out / "running_min.csv"),
    ]

    for d, name in enumerate(names):
        try:
            written.append(write_density(parameter_density(state, d), out / f"density_{name}.csv"))
        except EmptyScopeError:
            logger.warning(f"Not enough samples for the density of {name}")

    for a, b in itertools.combinations(range(len(names)), 2):
        pair = (names[a], names[b])
        written.append(write_grid(topology_grid(state, (a, b)), pair, out / f"topology_{pair[0]}__{pair[1]}.csv"))
        for record in state.surrogates:
            grid = acquisition_map(state, record.batch_index, (a, b))
            path = out / f"acquisition_{record.batch_index}_{pair[0]}__{pair[1]}.csv"
            written.append(write_grid(grid, pair, path, value="acquisition"))

    logger.info(f"Wrote {len(written)} analysis files to {out}")
    return written
