"""Unit tests for samples and state persistence."""

from unittest.mock import patch

import numpy as np
import pytest
from pydantic import ValidationError

from src.core.state import (
    ExperimentConfig,
    ExperimentState,
    Sample,
    dumps_state,
    load_state,
    loads_state,
    save_state,
)
from src.devices.inkjet import inkjet_space
from src.utils.errors import IoError, SchemaMismatchError


def make_sample(x, loss, batch_index=0, **extra) -> Sample:
    return Sample(x=list(x), loss=loss, geom_loss=loss, yield_loss=loss, batch_index=batch_index, **extra)


def sixty_sample_state() -> ExperimentState:
    rng = np.random.default_rng(11)
    samples = []
    for i in range(60):
        g, y = rng.random(2)
        samples.append(Sample(
            x=rng.random(3).tolist(),
            loss=(g + y) / 2.0,
            geom_loss=g,
            yield_loss=y,
            batch_index=0 if i < 20 else 1 + (i - 20) // 10,
            image_ref=f"inkjet-sim:sample_{i}",
            droplet_count=int(rng.integers(0, 60)),
            mean_diameter_px=float(rng.random() * 40),
        ))
    return ExperimentState(device="inkjet-sim", space=inkjet_space(), config=ExperimentConfig(), rng_seed=7,
                           samples=samples)


class TestSample:
    """Test cases for Sample validation."""

    def test_loss_is_mean_of_components(self):
        """Test loss must equal (geom + yield) / 2."""
        with pytest.raises(ValidationError):
            Sample(x=[0.5], loss=0.5, geom_loss=0.2, yield_loss=0.4, batch_index=0)

    def test_components_in_unit_interval(self):
        """Test losses outside [0, 1] are rejected."""
        with pytest.raises(ValidationError):
            make_sample([0.5], 1.5)

    def test_control_vector_in_cube(self):
        """Test control components must lie in [0, 1]."""
        with pytest.raises(ValidationError):
            make_sample([1.2], 0.5)

    def test_skipped_placeholder(self):
        """Test skipped samples carry worst-case losses."""
        sample = Sample.skipped_at([0.1, 0.2], 3, "batch_3/sample_0.png")
        assert sample.skipped
        assert sample.loss == 1.0


class TestExperimentState:
    """Test cases for ExperimentState helpers."""

    def test_batches_non_decreasing(self):
        """Test samples must be ordered by batch."""
        with pytest.raises(ValidationError):
            ExperimentState(space=inkjet_space(), samples=[
                make_sample([0.1, 0.1, 0.1], 0.5, batch_index=1),
                make_sample([0.2, 0.2, 0.2], 0.5, batch_index=0),
            ])

    def test_dimension_must_match(self):
        """Test sample dimension must match the space."""
        with pytest.raises(ValidationError):
            ExperimentState(space=inkjet_space(), samples=[make_sample([0.1, 0.1], 0.5)])

    def test_last_batch(self):
        """Test last_batch of empty and filled states."""
        state = ExperimentState(space=inkjet_space())
        assert state.last_batch == -1
        state.append_batch([make_sample([0.1, 0.1, 0.1], 0.5, batch_index=0)])
        assert state.last_batch == 0

    def test_append_rejects_earlier_batch(self):
        """Test appending an older batch fails."""
        state = sixty_sample_state()
        with pytest.raises(ValueError):
            state.append_batch([make_sample([0.1, 0.1, 0.1], 0.5, batch_index=0)])

    def test_train_arrays_skip_skipped(self):
        """Test skipped samples stay out of the training data."""
        state = ExperimentState(space=inkjet_space(), samples=[
            make_sample([0.1, 0.1, 0.1], 0.5),
            Sample.skipped_at([0.2, 0.2, 0.2], 0, None),
        ])
        x, y = state.train_arrays()
        assert x.shape == (1, 3)
        assert y.tolist() == [0.5]

    def test_total_samples(self):
        """Test default campaign size is 20 + 4 * 10."""
        assert ExperimentConfig().total_samples == 60


class TestPersistence:
    """Test cases for save_state / load_state."""

    def test_empty_round_trip(self, tmp_path):
        """Test an empty experiment round-trips."""
        state = ExperimentState(space=inkjet_space())
        path = save_state(state, tmp_path / "state.json")
        assert load_state(path) == state

    def test_sixty_samples_byte_identical(self, tmp_path):
        """Test re-saving a loaded state reproduces the same bytes."""
        state = sixty_sample_state()
        first = save_state(state, tmp_path / "a.json")
        second = save_state(load_state(first), tmp_path / "b.json")
        assert first.read_bytes() == second.read_bytes()

    def test_floats_exact(self):
        """Test floats reload bit-exactly."""
        state = sixty_sample_state()
        again = loads_state(dumps_state(state))
        assert [s.loss for s in again.samples] == [s.loss for s in state.samples]
        assert [s.x for s in again.samples] == [s.x for s in state.samples]

    def test_corrupted_file(self, tmp_path):
        """Test corrupted files raise SchemaMismatchError."""
        path = tmp_path / "state.json"
        path.write_text('{"schema_version": 1, "space": ', encoding="utf-8")
        with pytest.raises(SchemaMismatchError):
            load_state(path)

    def test_wrong_schema_version(self):
        """Test unknown schema versions are rejected."""
        text = dumps_state(ExperimentState(space=inkjet_space())).replace('"schema_version": 1', '"schema_version": 99')
        with pytest.raises(SchemaMismatchError):
            loads_state(text)

    def test_invalid_sample(self):
        """Test invalid records are rejected with the offending location."""
        text = dumps_state(sixty_sample_state()).replace('"batch_index": 0', '"batch_index": -1', 1)
        with pytest.raises(SchemaMismatchError):
            loads_state(text)

    def test_missing_file(self, tmp_path):
        """Test a missing file raises IoError."""
        with pytest.raises(IoError):
            load_state(tmp_path / "missing.json")

    def test_no_temp_files_left(self, tmp_path):
        """Test atomic writes leave only the state file."""
        save_state(sixty_sample_state(), tmp_path / "state.json")
        assert [p.name for p in tmp_path.iterdir()] == ["state.json"]

    def test_failed_write_removes_temp_file(self, tmp_path):
        """Test a failed rename raises IoError and cleans up the temp file."""
        with patch("src.core.state.os.replace", side_effect=OSError(28, "No space left on device")):
            with pytest.raises(IoError):
                save_state(sixty_sample_state(), tmp_path / "state.json")
        assert list(tmp_path.iterdir()) == []
