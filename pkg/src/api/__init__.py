"""HTTP API for image scoring and experiment suggestions."""
