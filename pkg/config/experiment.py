"""Experiment files: one TOML document per run of record.

    [experiment]          init_count, batch_size, num_batches, acquisition (required) + optional knobs
    [segmentation]        marker_frac, min_area, min_contrast, opening_iterations
    [surrogate]           restarts, fixed_noise
    [device]              kind, run_dir, timeout_s, poll_interval_s
    [[parameters]]        name, unit, lower, upper  (overrides the device's default box)
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import toml
from pydantic import ValidationError

from src.core.space import ParameterSpace
from src.core.state import ExperimentConfig
from src.core.vision import SegOpts
from src.utils.errors import ConfigError, IoError
from src.utils.validators import validate_device_spec, validate_required_fields

REQUIRED_EXPERIMENT_FIELDS = ("init_count", "batch_size", "num_batches", "acquisition")
SURROGATE_KEYS = {"restarts": "gp_restarts", "fixed_noise": "gp_fixed_noise"}
DEVICE_KEYS = ("kind", "run_dir", "timeout_s", "poll_interval_s", "skip_failed_samples")


def _raise_validation(section: str, error: ValidationError) -> None:
    first = error.errors()[0]
    where = ".".join(str(p) for p in first["loc"])
    name = f"{section}.{where}" if where else section
    raise ConfigError(name, first["msg"])


@dataclass
class ExperimentFile:
    """Parsed experiment file; `experiment` holds ExperimentConfig fields as written."""

    experiment: Dict[str, Any] = field(default_factory=dict)
    device: Dict[str, Any] = field(default_factory=dict)
    space: Optional[ParameterSpace] = None
    path: Optional[Path] = None

    @property
    def device_kind(self) -> Optional[str]:
        return self.device.get("kind")

    def device_spec(self) -> Optional[str]:
        """Selector string, folding `run_dir` into `files:<dir>`."""
        kind = self.device_kind
        if kind == "files" and self.device.get("run_dir"):
            return f"files:{self.device['run_dir']}"
        return kind

    def to_config(self, count_max: Optional[int] = None, **overrides: Any) -> ExperimentConfig:
        """Build the ExperimentConfig; `count_max` is the device default unless the file sets one."""
        fields = dict(self.experiment)
        if count_max is not None and "count_max" not in fields:
            fields["count_max"] = count_max
        fields.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return ExperimentConfig(**fields)
        except ValidationError as e:
            _raise_validation("experiment", e)


def parse_experiment(document: Dict[str, Any], path: Optional[Path] = None,
                     require_fields: bool = True) -> ExperimentFile:
    for section in ("experiment", "segmentation", "surrogate", "device"):
        if section in document and not isinstance(document[section], dict):
            raise ConfigError(section, "must be a table")

    experiment = dict(document.get("experiment", {}))
    if require_fields:
        ok, missing = validate_required_fields(experiment, REQUIRED_EXPERIMENT_FIELDS)
        if not ok:
            raise ConfigError(f"experiment.{missing}", "missing required field")

    if "segmentation" in document:
        try:
            experiment["segmentation"] = SegOpts(**document["segmentation"])
        except ValidationError as e:
            _raise_validation("segmentation", e)

    for key, target in SURROGATE_KEYS.items():
        if key in document.get("surrogate", {}):
            experiment[target] = document["surrogate"][key]

    unknown = set(document.get("surrogate", {})) - set(SURROGATE_KEYS)
    if unknown:
        raise ConfigError(f"surrogate.{sorted(unknown)[0]}", "unknown key")

    device = dict(document.get("device", {}))
    unknown = set(device) - set(DEVICE_KEYS)
    if unknown:
        raise ConfigError(f"device.{sorted(unknown)[0]}", "unknown key")
    if "kind" in device:
        spec = device["kind"]
        if spec == "files":
            spec = f"files:{device.get('run_dir', '')}"
        ok, error_msg = validate_device_spec(str(spec))
        if not ok:
            raise ConfigError("device.kind", error_msg)

    space = None
    if "parameters" in document:
        try:
            space = ParameterSpace(dims=document["parameters"])
        except ValidationError as e:
            _raise_validation("parameters", e)

    parsed = ExperimentFile(experiment=experiment, device=device, space=space, path=path)
    # Validate now so errors point at the file, not at run time.
    parsed.to_config()
    return parsed


def load_experiment_file(path: Union[str, Path]) -> ExperimentFile:
    """Read and validate an experiment TOML file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(str(path), e.strerror or str(e))

    try:
        document = toml.loads(text)
    except toml.TomlDecodeError as e:
        raise ConfigError("<toml>", f"{path}: {e}")

    return parse_experiment(document, path=path)


def default_experiment_file() -> ExperimentFile:
    """Defaults used when no experiment file is given."""
    return ExperimentFile()
