"""Device adapters: simulators, the file-exchange adapter and fluid calculators."""

from .base import DeviceAdapter, feasible_volume
from .dimensionless import WATER_IN_MINERAL_OIL, WATER_INKJET, FluidProperties, dimensionless
from .file_adapter import FileAdapter
from .inkjet import InkjetSimulator, inkjet_space
from .microfluidic import MicrofluidicSimulator, microfluidic_space
from .registry import create_device, default_space

__all__ = [
    "DeviceAdapter",
    "feasible_volume",
    "FluidProperties",
    "dimensionless",
    "WATER_INKJET",
    "WATER_IN_MINERAL_OIL",
    "FileAdapter",
    "InkjetSimulator",
    "inkjet_space",
    "MicrofluidicSimulator",
    "microfluidic_space",
    "create_device",
    "default_space",
]
