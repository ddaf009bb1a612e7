"""Input validation utilities."""

import re
from typing import Any, Dict, Iterable, Optional, Tuple

DEVICE_KINDS = ("inkjet-sim", "microfluidic-sim")
ACQUISITION_NAMES = ("ei", "mpi", "lcb")

def validate_device_spec(spec: str) -> Tuple[bool, Optional[str]]:
    """
    Validate a device selector such as `inkjet-sim` or `files:<dir>`.

    Args:
        spec: Device selector string

    Returns:
        Tuple of (is_valid, error_message)
    """
    if not spec or not spec.strip():
        return False, "Device cannot be empty"

    spec = spec.strip()
    if spec in DEVICE_KINDS:
        return True, None

    if spec.startswith("files:"):
        if not spec[len("files:"):].strip():
            return False, "files: device needs a run directory, e.g. files:./lab_run"
        return True, None

    return False, f"Unknown device '{spec}' (expected one of {', '.join(DEVICE_KINDS)} or files:<dir>)"

def validate_acquisition_name(name: str) -> Tuple[bool, Optional[str]]:
    """
    Validate an acquisition function name.

    Args:
        name: Acquisition name, case-insensitive

    Returns:
        Tuple of (is_valid, error_message)
    """
    if not name or name.strip().lower() not in ACQUISITION_NAMES:
        return False, f"Acquisition must be one of {', '.join(ACQUISITION_NAMES)}"
    return True, None

def validate_jobs(jobs: int) -> Tuple[bool, Optional[str]]:
    """Validate the worker count."""
    if not isinstance(jobs, int) or isinstance(jobs, bool):
        return False, "jobs must be an integer"

    if jobs < 1:
        return False, "jobs must be greater than 0"

    if jobs > 256:
        return False, "jobs cannot exceed 256"

    return True, None

def validate_required_fields(section: Dict[str, Any], required: Iterable[str]) -> Tuple[bool, Optional[str]]:
    """
    Check that a config section names every required field.

    Returns:
        Tuple of (is_valid, first missing field name)
    """
    for field in required:
        if field not in section:
            return False, field
    return True, None

def validate_experiment_name(name: str) -> Tuple[bool, Optional[str]]:
    """Experiment names become directory names, keep them plain."""
    if not name or not re.match(r'^[A-Za-z0-9][A-Za-z0-9_.\-]{0,63}$', name):
        return False, "Experiment name must be 1-64 characters of letters, digits, '_', '-', '.'"
    if ".." in name:
        return False, "Experiment name cannot contain '..'"
    return True, None
