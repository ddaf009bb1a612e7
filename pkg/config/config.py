"""Configuration management for the droplet optimization loop."""

import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _default_jobs() -> int:
    return os.cpu_count() or 1


class Config:
    """Application configuration."""

    # Logging
    LOG_LEVEL: str = os.getenv("DROPLET_BO_LOG", "INFO")
    DEBUG: bool = os.getenv("DEBUG", "False").lower() == "true"

    # Experiment runtime
    DATA_DIR: str = os.getenv("DROPLET_BO_DATA_DIR", "runs")
    DEFAULT_JOBS: int = int(os.getenv("DROPLET_BO_JOBS", str(_default_jobs())))

    # File-exchange device
    FILE_POLL_INTERVAL: float = float(os.getenv("DROPLET_BO_POLL_INTERVAL", "1.0"))
    FILE_TIMEOUT: float = float(os.getenv("DROPLET_BO_FILE_TIMEOUT", str(24 * 3600)))

    # API Configuration
    API_HOST: str = os.getenv("API_HOST", "0.0.0.0")
    API_PORT: int = int(os.getenv("API_PORT", "8000"))

    @classmethod
    def validate(cls) -> bool:
        """Validate configuration values."""
        invalid_fields = []

        if cls.LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            invalid_fields.append("DROPLET_BO_LOG")
        if cls.DEFAULT_JOBS < 1:
            invalid_fields.append("DROPLET_BO_JOBS")
        if cls.FILE_POLL_INTERVAL <= 0:
            invalid_fields.append("DROPLET_BO_POLL_INTERVAL")
        if cls.FILE_TIMEOUT <= 0:
            invalid_fields.append("DROPLET_BO_FILE_TIMEOUT")

        if invalid_fields:
            raise ValueError(f"Invalid configuration: {', '.join(invalid_fields)}")

        return True

# Global config instance
config = Config()
