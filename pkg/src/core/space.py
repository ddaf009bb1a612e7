"""Parameter-space geometry: bounded physical boxes and the normalized unit cube."""

from typing import List, Sequence

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from src.utils.errors import OutOfBoundsError

# A ControlVector is an (N,) float array in [0, 1]^N; batches are (n, N) arrays.
ControlVector = np.ndarray


class ParameterDef(BaseModel):
    """One controllable device parameter with closed physical bounds."""

    name: str = Field(..., description="Parameter identifier", min_length=1)
    unit: str = Field(..., description="Display unit, e.g. MPa")
    lower: float = Field(..., description="Lower physical bound (inclusive)")
    upper: float = Field(..., description="Upper physical bound (inclusive)")

    @field_validator("name")
    @classmethod
    def validate_name(cls, v: str) -> str:
        if not v.replace("_", "").isalnum():
            raise ValueError("Parameter name must be alphanumeric with underscores")
        return v

    @field_validator("unit")
    @classmethod
    def validate_unit(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("Unit cannot be empty")
        return v.strip()

    @model_validator(mode="after")
    def validate_bounds(self) -> "ParameterDef":
        if not self.lower < self.upper:
            raise ValueError(f"{self.name}: lower bound must be below upper bound")
        return self

    @property
    def column(self) -> str:
        """CSV column header, e.g. `pressure_MPa`."""
        return f"{self.name}_{self.unit}"

    @property
    def span(self) -> float:
        return self.upper - self.lower


class ParameterSpace(BaseModel):
    """Ordered box of parameters; all optimization happens on its unit cube."""

    dims: List[ParameterDef] = Field(..., min_length=1)

    @model_validator(mode="after")
    def validate_unique_names(self) -> "ParameterSpace":
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValueError("Parameter names must be unique")
        return self

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> List[str]:
        return [d.name for d in self.dims]

    def index(self, name: str) -> int:
        return self.names.index(name)

    @property
    def lower(self) -> np.ndarray:
        return np.array([d.lower for d in self.dims], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([d.upper for d in self.dims], dtype=float)


def normalize(space: ParameterSpace, physical: Sequence[float]) -> ControlVector:
    """Map physical values onto [0, 1]^N.

    Raises OutOfBoundsError naming the first parameter outside its closed range.
    """
    values = np.asarray(physical, dtype=float)
    if values.shape != (space.n,):
        raise ValueError(f"expected {space.n} values, got shape {values.shape}")

    for d, value in zip(space.dims, values):
        if not (d.lower <= value <= d.upper):
            raise OutOfBoundsError(d.name, float(value), d.lower, d.upper)

    x = (values - space.lower) / (space.upper - space.lower)
    # Rounding can leave 1 ulp outside the cube at the bounds.
    return np.clip(x, 0.0, 1.0)


def denormalize(space: ParameterSpace, x: Sequence[float]) -> np.ndarray:
    """Inverse of normalize; accepts one vector or an (n, N) batch."""
    x = np.asarray(x, dtype=float)
    physical = space.lower + x * (space.upper - space.lower)
    # Keep the exact bound values at 0 and 1.
    physical = np.where(x == 0.0, space.lower, physical)
    physical = np.where(x == 1.0, space.upper, physical)
    return physical


def in_unit_cube(x: np.ndarray) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(np.all((x >= 0.0) & (x <= 1.0)))
