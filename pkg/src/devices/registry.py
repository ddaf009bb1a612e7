"""Device selection from CLI/config selector strings."""

from typing import Any, Dict, Optional

from src.core.space import ParameterSpace
from src.devices.base import DeviceAdapter
from src.devices.file_adapter import FileAdapter
from src.devices.inkjet import InkjetSimulator, inkjet_space
from src.devices.microfluidic import MicrofluidicSimulator, microfluidic_space
from src.utils.errors import ConfigError
from src.utils.validators import validate_device_spec

FILES_PREFIX = "files:"


def default_space(spec: str) -> ParameterSpace:
    """Parameter box a device kind runs on when the config names none."""
    if spec == "microfluidic-sim":
        return microfluidic_space()
    return inkjet_space()


def create_device(spec: str, space: Optional[ParameterSpace] = None,
                  options: Optional[Dict[str, Any]] = None) -> DeviceAdapter:
    """
    Build a device adapter.

    Args:
        spec: `inkjet-sim`, `microfluidic-sim` or `files:<run_dir>`
        space: Parameter box (defaults to the device's own)
        options: `[device]` keys (timeout_s, poll_interval_s, skip_failed_samples, count_max)

    Returns:
        DeviceAdapter ready to run
    """
    is_valid, error_msg = validate_device_spec(spec)
    if not is_valid:
        raise ConfigError("device", error_msg)

    spec = spec.strip()
    options = options or {}

    if spec == "inkjet-sim":
        return InkjetSimulator(space)
    if spec == "microfluidic-sim":
        return MicrofluidicSimulator(space)

    run_dir = spec[len(FILES_PREFIX):].strip()
    return FileAdapter(
        run_dir,
        space or inkjet_space(),
        timeout=options.get("timeout_s"),
        poll_interval=options.get("poll_interval_s"),
        skip_bad_images=bool(options.get("skip_failed_samples", False)),
        count_max=int(options.get("count_max", 50)),
    )
