"""Error hierarchy shared by the library, the CLI and the HTTP API.

Every error carries the process exit code the CLI maps it to and a context
dict (field, file, batch, sample id, ...) so messages stay actionable.
"""

from typing import Any, Dict, Iterable, Optional

EXIT_USAGE = 2
EXIT_DEVICE = 3
EXIT_IO = 4


class DropletBoError(Exception):
    """Base class for all expected failures."""

    exit_code: int = EXIT_USAGE

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = {k: v for k, v in context.items() if v is not None}

    def to_machine_line(self) -> str:
        """Render a one-line `key=value` description for scripts."""
        parts = [f"error={type(self).__name__}"]
        for key, value in self.context.items():
            if isinstance(value, (list, tuple)):
                value = ",".join(str(v) for v in value)
            parts.append(f"{key}={value}")
        message = self.message.replace('"', "'").replace("\n", " ")
        parts.append(f'message="{message}"')
        return " ".join(parts)


# Usage / configuration / data errors

class ConfigError(DropletBoError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}", field=field)
        self.field = field


class OutOfBoundsError(DropletBoError):
    def __init__(self, parameter: str, value: float, lower: float, upper: float):
        super().__init__(
            f"{parameter}={value!r} outside [{lower!r}, {upper!r}]",
            parameter=parameter,
        )
        self.parameter = parameter


class InvalidKError(DropletBoError):
    def __init__(self, k: int):
        super().__init__(f"strata count must be >= 1, got {k}", k=k)


class InvalidCountMaxError(DropletBoError):
    def __init__(self, count_max: int):
        super().__init__(f"count_max must be >= 1, got {count_max}", count_max=count_max)


class DegenerateRegionError(DropletBoError):
    def __init__(self, area: int, reason: str = "area below 3 px"):
        super().__init__(f"degenerate droplet region ({reason}, area={area})", area=area)


class InsufficientCandidatesError(DropletBoError):
    def __init__(self, pool: int, batch_size: int):
        super().__init__(
            f"candidate pool of {pool} cannot supply a batch of {batch_size}",
            pool=pool, batch_size=batch_size,
        )


class EmptyExperimentError(DropletBoError):
    def __init__(self, message: str = "experiment has no scored samples"):
        super().__init__(message)


class EmptyScopeError(DropletBoError):
    def __init__(self, scope: str):
        super().__init__(f"no samples in scope '{scope}'", scope=scope)


class SchemaMismatchError(DropletBoError):
    def __init__(self, path: Optional[str], message: str):
        super().__init__(f"state file rejected: {message}", file=path)


class BadImageError(DropletBoError):
    def __init__(self, path: Optional[str], message: str, sample: Optional[int] = None):
        super().__init__(f"cannot read image {path}: {message}", file=path, sample=sample)
        self.path = path
        self.detail = message
        self.sample = sample


class NonPositiveInputError(DropletBoError):
    def __init__(self, field: str, value: float):
        super().__init__(f"{field} must be positive, got {value!r}", field=field)
        self.field = field


class SingularKernelError(DropletBoError):
    def __init__(self, condition: float):
        super().__init__(
            f"kernel matrix not positive definite at maximum jitter (condition ~ {condition:.3e})",
            condition=f"{condition:.3e}",
        )
        self.condition = condition


# Device errors

class DeviceError(DropletBoError):
    exit_code = EXIT_DEVICE


class DeviceTimeoutError(DeviceError):
    def __init__(self, batch: int, timeout: float):
        super().__init__(f"no images for batch {batch} after {timeout:g}s", batch=batch)


class MissingImageError(DeviceError):
    def __init__(self, batch: int, missing: Iterable[int]):
        missing = sorted(missing)
        super().__init__(
            f"batch {batch} is missing images for sample ids {missing}",
            batch=batch, missing=missing,
        )
        self.missing = missing


class RunDirectoryLockedError(DeviceError):
    def __init__(self, path: str, holder: str):
        super().__init__(f"run directory {path} is locked ({holder})", file=path)


class DeviceFailureError(DeviceError):
    def __init__(self, batch: int, sample: Optional[int], cause: Exception):
        super().__init__(f"device failed: {cause}", batch=batch, sample=sample)
        self.__cause__ = cause


class VisionFailureError(DeviceError):
    def __init__(self, batch: int, sample: Optional[int], cause: Exception):
        super().__init__(f"scoring failed: {cause}", batch=batch, sample=sample)
        self.__cause__ = cause


# I/O errors

class IoError(DropletBoError):
    exit_code = EXIT_IO

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}", file=path)
