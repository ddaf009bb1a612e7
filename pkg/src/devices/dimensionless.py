"""Dimensionless groups characterizing droplet formation."""

from typing import Dict

import numpy as np
from pydantic import BaseModel, Field

from src.utils.errors import NonPositiveInputError

STANDARD_GRAVITY = 9.81


class FluidProperties(BaseModel):
    """Fluid and flow properties in SI units."""

    density: float = Field(..., description="rho, kg/m^3")
    viscosity: float = Field(..., description="mu, Pa s")
    surface_tension: float = Field(..., description="sigma, N/m")
    jet_diameter: float = Field(..., description="d, m")
    droplet_diameter: float = Field(..., description="a, m")
    velocity: float = Field(..., description="v, m/s")
    shear_rate: float = Field(..., description="gamma dot, 1/s")
    gravity: float = Field(STANDARD_GRAVITY, description="g, m/s^2")


WATER_INKJET = FluidProperties(
    density=1000.0,
    viscosity=1.0e-3,
    surface_tension=0.072,
    jet_diameter=70e-6,
    droplet_diameter=70e-6,
    velocity=2.0,
    shear_rate=1.0e4,
)

WATER_IN_MINERAL_OIL = FluidProperties(
    density=1000.0,
    viscosity=3.0e-2,
    surface_tension=0.05,
    jet_diameter=100e-6,
    droplet_diameter=100e-6,
    velocity=0.01,
    shear_rate=100.0,
)


def dimensionless(props: FluidProperties) -> Dict[str, float]:
    """Ohnesorge, Weber, Reynolds, capillary and Bond numbers."""
    for name in FluidProperties.model_fields:
        value = getattr(props, name)
        if not (np.isfinite(value) and value > 0):
            raise NonPositiveInputError(name, value)

    rho, mu, sigma = props.density, props.viscosity, props.surface_tension
    d, a, v = props.jet_diameter, props.droplet_diameter, props.velocity

    groups = {
        "Oh": mu / np.sqrt(rho * sigma * d),
        "We": rho * v * v * a / sigma,
        "Re": rho * v * d / mu,
        "Ca": mu * props.shear_rate * a / sigma,
        "Bo": rho * props.gravity * d * d / sigma,
    }
    return {name: float(value) for name, value in groups.items()}
