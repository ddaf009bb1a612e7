"""Tests for experiment files and environment configuration."""

from pathlib import Path
from unittest.mock import patch

import pytest

from config.config import Config
from config.experiment import load_experiment_file, parse_experiment
from src.core.acquisition import AcquisitionKind
from src.utils.errors import ConfigError, IoError

EXAMPLES = Path(__file__).resolve().parent.parent / "config" / "examples"

MINIMAL = {"experiment": {"init_count": 4, "batch_size": 2, "num_batches": 1, "acquisition": "mpi"}}


def document(**sections):
    doc = {k: dict(v) for k, v in MINIMAL.items()}
    for name, value in sections.items():
        if name == "experiment":
            doc["experiment"].update(value)
        else:
            doc[name] = value
    return doc


class TestParseExperiment:
    """Test cases for parse_experiment."""

    def test_minimal(self):
        """Test required fields alone build a config with defaults."""
        config = parse_experiment(document()).to_config()
        assert config.acquisition is AcquisitionKind.MPI
        assert config.total_samples == 6
        assert config.feasibility_threshold == 0.75

    @pytest.mark.parametrize("field", ["init_count", "batch_size", "num_batches", "acquisition"])
    def test_missing_required(self, field):
        """Test each required field is named when missing."""
        doc = document()
        del doc["experiment"][field]
        with pytest.raises(ConfigError) as exc_info:
            parse_experiment(doc)
        assert exc_info.value.field == f"experiment.{field}"

    def test_invalid_value(self):
        """Test a bad value names its field."""
        with pytest.raises(ConfigError) as exc_info:
            parse_experiment(document(experiment={"batch_size": 0}))
        assert exc_info.value.field == "experiment.batch_size"

    def test_unknown_experiment_key(self):
        """Test misspelled experiment keys are rejected."""
        with pytest.raises(ConfigError) as exc_info:
            parse_experiment(document(experiment={"batchsize": 3}))
        assert exc_info.value.field == "experiment.batchsize"

    def test_unknown_device_key(self):
        """Test unknown [device] keys are rejected."""
        with pytest.raises(ConfigError) as exc_info:
            parse_experiment(document(device={"kind": "inkjet-sim", "nozzle": 3}))
        assert exc_info.value.field == "device.nozzle"

    def test_unknown_device_kind(self):
        """Test unknown device kinds are rejected."""
        with pytest.raises(ConfigError) as exc_info:
            parse_experiment(document(device={"kind": "laser-sim"}))
        assert exc_info.value.field == "device.kind"

    def test_files_device_spec(self):
        """Test files devices fold the run directory into the selector."""
        parsed = parse_experiment(document(device={"kind": "files", "run_dir": "./lab", "timeout_s": 60}))
        assert parsed.device_spec() == "files:./lab"
        assert parsed.device["timeout_s"] == 60

    def test_files_device_needs_run_dir(self):
        """Test a files device without run_dir is rejected."""
        with pytest.raises(ConfigError):
            parse_experiment(document(device={"kind": "files"}))

    def test_segmentation_and_surrogate(self):
        """Test the optional sections map onto the config."""
        parsed = parse_experiment(document(
            segmentation={"marker_frac": 0.3, "min_area": 12},
            surrogate={"restarts": 2, "fixed_noise": 1e-6},
        ))
        config = parsed.to_config()
        assert config.segmentation.marker_frac == 0.3
        assert config.segmentation.min_area == 12
        assert config.gp_restarts == 2
        assert config.gp_fixed_noise == 1e-6

    def test_bad_segmentation(self):
        """Test segmentation values are validated."""
        with pytest.raises(ConfigError) as exc_info:
            parse_experiment(document(segmentation={"marker_frac": 1.5}))
        assert exc_info.value.field == "segmentation.marker_frac"

    def test_unknown_surrogate_key(self):
        """Test unknown [surrogate] keys are rejected."""
        with pytest.raises(ConfigError) as exc_info:
            parse_experiment(document(surrogate={"kernel": "rbf"}))
        assert exc_info.value.field == "surrogate.kernel"

    def test_parameters_override(self):
        """Test [[parameters]] defines the parameter box."""
        parsed = parse_experiment(document(parameters=[
            {"name": "flow", "unit": "uL/min", "lower": 1.0, "upper": 50.0},
        ]))
        assert parsed.space.names == ["flow"]
        assert parsed.space.dims[0].column == "flow_uL/min"

    def test_bad_parameter_bounds(self):
        """Test inverted bounds are rejected."""
        with pytest.raises(ConfigError) as exc_info:
            parse_experiment(document(parameters=[{"name": "flow", "unit": "u", "lower": 5.0, "upper": 1.0}]))
        assert exc_info.value.field.startswith("parameters")


class TestCountMax:
    """Test cases for count_max precedence."""

    def test_device_default(self):
        """Test the device default applies when the file is silent."""
        assert parse_experiment(document()).to_config(count_max=30).count_max == 30

    def test_file_wins(self):
        """Test an explicit count_max in the file beats the device default."""
        parsed = parse_experiment(document(experiment={"count_max": 12}))
        assert parsed.to_config(count_max=30).count_max == 12

    def test_overrides(self):
        """Test command-line overrides replace file values."""
        config = parse_experiment(document()).to_config(acquisition="lcb", lcb_beta=0.5)
        assert config.acquisition is AcquisitionKind.LCB
        assert config.lcb_beta == 0.5


class TestLoadExperimentFile:
    """Test cases for reading experiment files from disk."""

    def test_missing_file(self, tmp_path):
        """Test a missing file is an I/O error."""
        with pytest.raises(IoError):
            load_experiment_file(tmp_path / "nope.toml")

    def test_syntax_error(self, tmp_path):
        """Test TOML syntax errors are reported against <toml>."""
        path = tmp_path / "broken.toml"
        path.write_text("[experiment\ninit_count = 4\n", encoding="utf-8")
        with pytest.raises(ConfigError) as exc_info:
            load_experiment_file(path)
        assert exc_info.value.field == "<toml>"

    @pytest.mark.parametrize("name", ["inkjet.toml", "microfluidic.toml"])
    def test_examples_load(self, name):
        """Test the shipped example files are valid."""
        parsed = load_experiment_file(EXAMPLES / name)
        config = parsed.to_config()
        assert config.total_samples == 60
        assert parsed.space is not None

    def test_inkjet_example_space(self):
        """Test the inkjet example box."""
        parsed = load_experiment_file(EXAMPLES / "inkjet.toml")
        assert parsed.device_spec() == "inkjet-sim"
        assert [d.column for d in parsed.space.dims] == ["pressure_MPa", "frequency_Hz", "speed_mm/s"]


class TestEnvironmentConfig:
    """Test cases for the environment-driven Config."""

    def test_defaults_valid(self):
        """Test the default configuration validates."""
        assert Config.validate() is True

    def test_invalid_values(self):
        """Test invalid environment values are all named."""
        with patch.object(Config, "DEFAULT_JOBS", 0), patch.object(Config, "LOG_LEVEL", "LOUD"):
            with pytest.raises(ValueError) as exc_info:
                Config.validate()
        message = str(exc_info.value)
        assert "DROPLET_BO_JOBS" in message
        assert "DROPLET_BO_LOG" in message
