"""Experiment configuration, samples, and the persisted experiment state."""

import json
import os
import tempfile
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.core.acquisition import AcquisitionKind
from src.core.space import ParameterSpace
from src.core.surrogate import GpHyperparams
from src.core.vision import SegOpts
from src.utils.errors import IoError, SchemaMismatchError
from src.utils.logger import get_logger

logger = get_logger(__name__)

SCHEMA_VERSION = 1
LOSS_TOLERANCE = 1e-12


class ExperimentConfig(BaseModel):
    """Knobs of one optimization campaign."""

    model_config = ConfigDict(extra="forbid")

    init_count: int = Field(20, description="Latin hypercube initialization size", ge=2)
    batch_size: int = Field(10, description="Points acquired per BO batch", ge=1)
    num_batches: int = Field(4, description="Number of BO update rounds", ge=0)
    acquisition: AcquisitionKind = Field(AcquisitionKind.EI, description="Decision policy")
    lcb_beta: float = Field(2.0, description="Exploration weight for LCB", gt=0)
    feasibility_threshold: float = Field(0.75, description="Loss below which droplets are feasible", gt=0, lt=1)
    count_max: int = Field(50, description="Droplet count normalizing the yield loss", ge=1)
    penalization_radius: float = Field(0.1, description="Local penalization radius (normalized units)", gt=0)
    candidate_pool_size: int = Field(4096, description="Candidates scored per acquisition", ge=1)
    segmentation: SegOpts = Field(default_factory=SegOpts)
    gp_restarts: int = Field(5, description="Random restarts of the hyperparameter search", ge=0)
    gp_fixed_noise: Optional[float] = Field(None, description="Pin the GP noise variance", ge=1e-10)
    early_stop: bool = Field(False, description="Stop when the running best stalls")
    early_stop_tolerance: float = Field(0.01, description="Minimum improvement over two batches", ge=0)
    skip_failed_samples: bool = Field(False, description="Mark unreadable lab images as skipped")

    @property
    def total_samples(self) -> int:
        return self.init_count + self.batch_size * self.num_batches


class Sample(BaseModel):
    """One scored experiment: control vector plus its loss components."""

    x: List[float] = Field(..., description="Normalized control vector")
    loss: float = Field(..., ge=0.0, le=1.0)
    geom_loss: float = Field(..., ge=0.0, le=1.0)
    yield_loss: float = Field(..., ge=0.0, le=1.0)
    batch_index: int = Field(..., ge=0, description="0 = Latin hypercube initialization")
    image_ref: Optional[str] = None
    droplet_count: int = Field(0, ge=0)
    mean_diameter_px: float = Field(0.0, ge=0.0)
    skipped: bool = False

    @field_validator("x")
    @classmethod
    def validate_x(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("Control vector cannot be empty")
        if any(not (0.0 <= c <= 1.0) for c in v):
            raise ValueError("Control vector components must lie in [0, 1]")
        return v

    @model_validator(mode="after")
    def validate_loss(self) -> "Sample":
        if abs(self.loss - (self.geom_loss + self.yield_loss) / 2.0) > LOSS_TOLERANCE:
            raise ValueError("loss must equal the mean of geom_loss and yield_loss")
        return self

    @classmethod
    def skipped_at(cls, x: Sequence[float], batch_index: int, image_ref: Optional[str]) -> "Sample":
        """Placeholder for a sample whose image could not be scored."""
        return cls(x=[float(c) for c in x], loss=1.0, geom_loss=1.0, yield_loss=1.0,
                   batch_index=batch_index, image_ref=image_ref, skipped=True)


class SurrogateRecord(BaseModel):
    """Audit entry: the surrogate fitted before acquiring a batch."""

    batch_index: int = Field(..., ge=1)
    n_train: int = Field(..., ge=2)
    hyper: GpHyperparams
    log_marginal_likelihood: float


class ExperimentState(BaseModel):
    """Everything needed to audit or resume an experiment."""

    schema_version: int = SCHEMA_VERSION
    device: str = Field("unknown", description="Device selector the run used")
    space: ParameterSpace
    config: ExperimentConfig = Field(default_factory=ExperimentConfig)
    rng_seed: int = Field(0, ge=0)
    samples: List[Sample] = Field(default_factory=list)
    surrogates: List[SurrogateRecord] = Field(default_factory=list)
    stop_reason: Optional[str] = Field(None, description="Why the loop ended before num_batches")

    @model_validator(mode="after")
    def validate_samples(self) -> "ExperimentState":
        previous = 0
        for sample in self.samples:
            if sample.batch_index < previous:
                raise ValueError("Sample batch indices must be non-decreasing")
            if len(sample.x) != self.space.n:
                raise ValueError("Sample dimension does not match the parameter space")
            previous = sample.batch_index
        return self

    # Read helpers

    @property
    def scored_samples(self) -> List[Sample]:
        return [s for s in self.samples if not s.skipped]

    def train_arrays(self) -> "tuple[np.ndarray, np.ndarray]":
        """(X, y) of every scored sample, in acquisition order."""
        scored = self.scored_samples
        x = np.array([s.x for s in scored], dtype=float).reshape(len(scored), self.space.n)
        y = np.array([s.loss for s in scored], dtype=float)
        return x, y

    @property
    def last_batch(self) -> int:
        """Index of the last finished batch (0 = initialization, -1 = nothing run yet)."""
        if not self.samples:
            return -1
        return self.samples[-1].batch_index

    def batch(self, batch_index: int) -> List[Sample]:
        return [s for s in self.samples if s.batch_index == batch_index]

    # Mutation (single writer: the loop's update step)

    def append_batch(self, samples: Sequence[Sample]) -> None:
        if not samples:
            return
        last = self.samples[-1].batch_index if self.samples else 0
        for sample in samples:
            if sample.batch_index < last:
                raise ValueError("Cannot append samples from an earlier batch")
            last = sample.batch_index
        self.samples.extend(samples)


def dumps_state(state: ExperimentState) -> str:
    """Canonical JSON text: sorted keys, shortest round-trip floats."""
    payload = state.model_dump(mode="json")
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"


def loads_state(text: str, source: Optional[str] = None) -> ExperimentState:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaMismatchError(source, f"not valid JSON ({e.msg} at line {e.lineno})")

    if not isinstance(payload, dict):
        raise SchemaMismatchError(source, "top-level value must be an object")

    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaMismatchError(source, f"schema_version {version!r}, expected {SCHEMA_VERSION}")

    try:
        return ExperimentState.model_validate(payload)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise SchemaMismatchError(source, f"{where}: {first['msg']}")


def save_state(state: ExperimentState, location: Union[str, Path]) -> Path:
    """Write the state atomically (temp file + rename)."""
    path = Path(location)
    text = dumps_state(state)
    tmp_name = None
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=".state-", suffix=".json", dir=str(path.parent))
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except OSError as e:
        if tmp_name is not None and os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise IoError(str(path), e.strerror or str(e))

    logger.debug(f"Saved state with {len(state.samples)} samples to {path}")
    return path


def load_state(location: Union[str, Path]) -> ExperimentState:
    path = Path(location)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise SchemaMismatchError(str(path), "file is not UTF-8 text")
    except OSError as e:
        raise IoError(str(path), e.strerror or str(e))

    state = loads_state(text, source=str(path))
    logger.info(f"Loaded state from {path}: {len(state.samples)} samples")
    return state
