"""Tests for input validators and logging helpers."""

import logging

import pytest

from src.utils.logger import get_logger, log_batch, set_console_target
from src.utils.validators import (
    validate_acquisition_name,
    validate_device_spec,
    validate_experiment_name,
    validate_jobs,
    validate_required_fields,
)


class TestValidators:
    """Test cases for the tuple validators."""

    @pytest.mark.parametrize("spec", ["inkjet-sim", "microfluidic-sim", "files:./lab_run", " inkjet-sim "])
    def test_valid_device_specs(self, spec):
        """Test accepted device selectors."""
        assert validate_device_spec(spec) == (True, None)

    @pytest.mark.parametrize("spec", ["", "files:", "laser-sim"])
    def test_invalid_device_specs(self, spec):
        """Test rejected device selectors."""
        is_valid, error_msg = validate_device_spec(spec)
        assert not is_valid
        assert error_msg

    def test_acquisition_names(self):
        """Test acquisition names are case-insensitive."""
        assert validate_acquisition_name("EI")[0]
        assert validate_acquisition_name("lcb")[0]
        assert not validate_acquisition_name("ucb")[0]

    @pytest.mark.parametrize("jobs,ok", [(1, True), (8, True), (0, False), (257, False), (True, False)])
    def test_jobs(self, jobs, ok):
        """Test worker count limits."""
        assert validate_jobs(jobs)[0] is ok

    def test_required_fields(self):
        """Test the first missing field is named."""
        assert validate_required_fields({"a": 1, "b": 2}, ["a", "b"]) == (True, None)
        assert validate_required_fields({"a": 1}, ["a", "b", "c"]) == (False, "b")

    @pytest.mark.parametrize("name,ok", [
        ("run_1", True), ("campaign.2024-05", True), ("-bad", False), ("a..b", False), ("a/b", False), ("", False),
    ])
    def test_experiment_names(self, name, ok):
        """Test experiment names stay plain directory names."""
        assert validate_experiment_name(name)[0] is ok


class TestLogger:
    """Test cases for the logging helpers."""

    def test_logger_configured_once(self):
        """Test repeated lookups do not stack handlers."""
        first = get_logger("tests.logger")
        second = get_logger("tests.logger")
        assert first is second
        assert len(second.handlers) == 1
        assert second.propagate is False

    def test_log_batch(self):
        """Test the batch summary line."""
        logger = get_logger("tests.batch")
        records = []
        handler = logging.Handler()
        handler.emit = records.append
        logger.addHandler(handler)
        try:
            log_batch(logger, 2, [0.4, 0.9], 0.35)
            log_batch(logger, 3, [], None)
        finally:
            logger.removeHandler(handler)
        messages = [r.getMessage() for r in records]
        assert messages[0] == "Batch 2: 2 samples, min=0.4000 max=0.9000, running best=0.3500"
        assert messages[1] == "Batch 3: 0 samples, no scored samples, running best=n/a"

    def test_console_target(self, capsys):
        """Test log lines follow the selected console stream."""
        logger = get_logger("tests.console")
        try:
            set_console_target("stderr")
            logger.warning("sent to stderr")
            set_console_target("stdout")
            logger.warning("sent to stdout")
        finally:
            set_console_target("stdout")
        captured = capsys.readouterr()
        assert "sent to stderr" in captured.err
        assert "sent to stderr" not in captured.out
        assert "sent to stdout" in captured.out

    def test_unknown_console_target(self):
        """Test only stdout and stderr are accepted."""
        with pytest.raises(ValueError):
            set_console_target("syslog")
