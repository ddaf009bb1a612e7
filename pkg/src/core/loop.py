"""Closed optimization loop: initialize, then fit -> propose -> run -> score -> update."""

import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field
from tqdm import tqdm

from src.core.acquisition import BatchProposal, propose_batch
from src.core.rng import Stream, derive_seed, make_rng
from src.core.sampling import lhs_sample
from src.core.state import ExperimentConfig, ExperimentState, Sample, SurrogateRecord, save_state
from src.core.surrogate import FitOptions, GpModel, fit
from src.core.vision import DropletImage, ScoreResult, score
from src.utils.errors import (
    DeviceFailureError,
    DropletBoError,
    EmptyExperimentError,
    IoError,
    VisionFailureError,
)
from src.utils.logger import get_logger, log_batch, log_error, log_performance

logger = get_logger(__name__)

STEPS = ("device", "read_images", "computer_vision", "retrain_surrogate", "acquisition")


class BatchRecord(BaseModel):
    """What one batch proposed, what it measured, and how long each step took."""

    batch_index: int
    proposals: List[List[float]]
    acq_values: List[float] = Field(default_factory=list)
    losses: List[float]
    skipped: List[int] = Field(default_factory=list)
    running_best: Optional[float] = None
    timings: Dict[str, float] = Field(default_factory=dict)


class LoopReport(BaseModel):
    batches: List[BatchRecord] = Field(default_factory=list)
    best_x: Optional[List[float]] = None
    best_loss: Optional[float] = None
    best_index: Optional[int] = None
    stopped_early: bool = False

    def running_best(self) -> List[Optional[float]]:
        return [b.running_best for b in self.batches]

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.model_dump_json(indent=2) + "\n", encoding="utf-8")
        except OSError as e:
            raise IoError(str(path), e.strerror or str(e))
        return path


def best(state: ExperimentState) -> Tuple[np.ndarray, float]:
    """(x*, loss*) over scored samples; the earliest sample wins ties."""
    _, x, loss = best_sample(state)
    return x, loss


def best_sample(state: ExperimentState) -> Tuple[int, np.ndarray, float]:
    best_index, best_loss = None, None
    for i, sample in enumerate(state.samples):
        if sample.skipped:
            continue
        if best_loss is None or sample.loss < best_loss:
            best_index, best_loss = i, sample.loss
    if best_index is None:
        raise EmptyExperimentError()
    return best_index, np.array(state.samples[best_index].x, dtype=float), float(best_loss)


def _running_best(state: ExperimentState) -> Optional[float]:
    try:
        return best(state)[1]
    except EmptyExperimentError:
        return None


def fit_for_batch(state: ExperimentState, batch_index: int) -> GpModel:
    """Surrogate batch `batch_index` is proposed from (scored samples so far, FIT stream)."""
    opts = FitOptions(restarts=state.config.gp_restarts, fixed_noise=state.config.gp_fixed_noise)
    return fit(state.scored_samples, opts, make_rng(state.rng_seed, Stream.FIT, batch_index))


def propose_for_batch(state: ExperimentState, model: GpModel, batch_index: int,
                      batch_size: Optional[int] = None) -> BatchProposal:
    cfg = state.config
    _, best_loss = best(state)
    return propose_batch(
        model,
        cfg.acquisition,
        batch_size or cfg.batch_size,
        cfg.penalization_radius,
        cfg.candidate_pool_size,
        make_rng(state.rng_seed, Stream.PROPOSE, batch_index),
        best=best_loss,
        beta=cfg.lcb_beta,
    )


def propose_next(state: ExperimentState, batch_size: Optional[int] = None) -> Tuple[int, BatchProposal]:
    """
    The batch the loop would acquire next, without running a device or touching the state.

    Args:
        state: Experiment with at least the initialization batch
        batch_size: Points to propose (default: the stored batch size)

    Returns:
        (batch_index, proposal); with the stored batch size this equals what a
        resumed run would send to the device
    """
    batch_index = state.last_batch + 1
    if batch_index == 0:
        raise EmptyExperimentError("experiment has no initialization batch yet")
    model = fit_for_batch(state, batch_index)
    return batch_index, propose_for_batch(state, model, batch_index, batch_size)


class ExperimentLoop:
    """Drives one experiment; the only writer of its ExperimentState."""

    def __init__(self, config: ExperimentConfig, device, seed: int = 0,
                 state: Optional[ExperimentState] = None, jobs: int = 1,
                 checkpoint: Optional[Union[str, Path]] = None, progress: bool = False):
        if state is None:
            state = ExperimentState(device=device.name, space=device.space, config=config, rng_seed=seed)
        else:
            if state.space.n != device.space.n:
                raise ValueError(
                    f"state has {state.space.n} parameters, device {device.name} has {device.space.n}"
                )
            if state.config != config or state.rng_seed != seed:
                logger.warning("Resuming with the configuration and seed stored in the state file")
            # Surrogates fitted for a batch that never finished are refitted.
            state.surrogates = [r for r in state.surrogates if r.batch_index <= state.last_batch]

        self.state = state
        self.config = state.config
        self.seed = state.rng_seed
        self.device = device
        self.jobs = max(1, jobs)
        self.checkpoint = Path(checkpoint) if checkpoint else None
        self.progress = progress
        self.report = self._report_from_history()
        self.report.stopped_early = self.state.stop_reason is not None

    # Report

    def _report_from_history(self) -> LoopReport:
        """Records of batches already in the state (resume)."""
        report = LoopReport()
        seen = ExperimentState(device=self.state.device, space=self.state.space,
                               config=self.state.config, rng_seed=self.state.rng_seed)
        for k in range(self.state.last_batch + 1):
            samples = self.state.batch(k)
            seen.samples.extend(samples)
            report.batches.append(BatchRecord(
                batch_index=k,
                proposals=[s.x for s in samples],
                losses=[s.loss for s in samples],
                skipped=[i for i, s in enumerate(samples) if s.skipped],
                running_best=_running_best(seen),
            ))
        return report

    def _finish_report(self) -> LoopReport:
        try:
            index, x, loss = best_sample(self.state)
            self.report.best_x = x.tolist()
            self.report.best_loss = loss
            self.report.best_index = index
        except EmptyExperimentError:
            pass
        return self.report

    # Steps

    def _fit(self, batch_index: int) -> GpModel:
        model = fit_for_batch(self.state, batch_index)
        self.state.surrogates.append(SurrogateRecord(
            batch_index=batch_index,
            n_train=model.n_train,
            hyper=model.hyper,
            log_marginal_likelihood=model.log_marginal_likelihood,
        ))
        return model

    def _score_one(self, batch_index: int, i: int, image: Optional[DropletImage]) -> Optional[ScoreResult]:
        if image is None:
            return None
        try:
            return score(image, self.config.segmentation, self.config.count_max)
        except Exception as e:
            raise VisionFailureError(batch_index, i, e)

    def _score(self, batch_index: int, images: Sequence[Optional[DropletImage]]) -> List[Optional[ScoreResult]]:
        if self.jobs <= 1 or len(images) <= 1:
            return [self._score_one(batch_index, i, img) for i, img in enumerate(images)]
        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            return list(pool.map(lambda pair: self._score_one(batch_index, *pair), enumerate(images)))

    def _to_samples(self, batch_index: int, points: np.ndarray,
                    results: Sequence[Optional[ScoreResult]]) -> List[Sample]:
        samples = []
        for i, (x, result) in enumerate(zip(points, results)):
            ref = self.device.image_ref(batch_index, i)
            if result is None:
                samples.append(Sample.skipped_at(x, batch_index, ref))
                continue
            samples.append(Sample(
                x=[float(c) for c in x],
                loss=result.loss,
                geom_loss=result.geom_loss,
                yield_loss=result.yield_loss,
                batch_index=batch_index,
                image_ref=ref,
                droplet_count=result.droplet_count,
                mean_diameter_px=result.mean_diameter_px,
            ))
        return samples

    def _save(self) -> None:
        if self.checkpoint is not None:
            save_state(self.state, self.checkpoint)

    def run_batch(self, batch_index: int) -> BatchRecord:
        timings = {step: 0.0 for step in STEPS}
        acq_values: List[float] = []

        # Step 1: choose the points
        if batch_index == 0:
            points = lhs_sample(self.state.space, self.config.init_count, make_rng(self.seed, Stream.LHS, 0))
        else:
            started = time.perf_counter()
            model = self._fit(batch_index)
            timings["retrain_surrogate"] = time.perf_counter() - started

            started = time.perf_counter()
            proposal = propose_for_batch(self.state, model, batch_index)
            timings["acquisition"] = time.perf_counter() - started
            points = proposal.points
            acq_values = proposal.acq_values.tolist()

        # Step 2: run the device
        seeds = [derive_seed(self.seed, Stream.DEVICE, batch_index, i) for i in range(len(points))]
        started = time.perf_counter()
        try:
            images = self.device.run_batch(list(points), seeds, batch_index, jobs=self.jobs)
        except DropletBoError:
            raise
        except Exception as e:
            raise DeviceFailureError(batch_index, None, e)
        timings["device"] = time.perf_counter() - started
        timings["read_images"] = float(getattr(self.device, "last_read_seconds", 0.0))

        # Step 3: score the images
        started = time.perf_counter()
        results = self._score(batch_index, images)
        timings["computer_vision"] = time.perf_counter() - started

        # Step 4: update
        samples = self._to_samples(batch_index, points, results)
        self.state.append_batch(samples)
        self._save()

        record = BatchRecord(
            batch_index=batch_index,
            proposals=np.asarray(points).tolist(),
            acq_values=acq_values,
            losses=[s.loss for s in samples],
            skipped=[i for i, s in enumerate(samples) if s.skipped],
            running_best=_running_best(self.state),
            timings=timings,
        )
        self.report.batches.append(record)

        log_batch(logger, batch_index, [s.loss for s in samples if not s.skipped], record.running_best)
        log_performance(logger, f"batch {batch_index}", sum(timings.values()),
                        {k: round(v, 3) for k, v in timings.items() if v})
        return record

    def _stalled(self) -> bool:
        """True when the running best improved by less than the tolerance over two batches."""
        trace = self.report.running_best()
        if len(trace) < 3 or trace[-3] is None or trace[-1] is None:
            return False
        return trace[-3] - trace[-1] < self.config.early_stop_tolerance

    def run(self) -> Tuple[ExperimentState, LoopReport]:
        if self.state.stop_reason is not None:
            logger.info(f"Experiment already stopped: {self.state.stop_reason}")
            return self.state, self._finish_report()

        first = self.state.last_batch + 1
        batches = range(first, self.config.num_batches + 1)
        if first > 0:
            logger.info(f"Resuming after batch {first - 1} ({len(self.state.samples)} samples)")

        iterator = tqdm(batches, desc="batches", unit="batch") if self.progress else batches
        for batch_index in iterator:
            try:
                self.run_batch(batch_index)
            except DropletBoError as e:
                log_error(logger, e, f"batch {batch_index}")
                self._save()
                raise

            if self.config.early_stop and batch_index > 0 and self._stalled():
                logger.info(f"Running best stalled, stopping after batch {batch_index}")
                self.state.stop_reason = f"running best stalled after batch {batch_index}"
                self.report.stopped_early = True
                self._save()
                break

        return self.state, self._finish_report()


def run_experiment(config: ExperimentConfig, device, seed: int = 0, state: Optional[ExperimentState] = None,
                   jobs: int = 1, checkpoint: Optional[Union[str, Path]] = None,
                   progress: bool = False) -> Tuple[ExperimentState, LoopReport]:
    """
    Run (or resume) a closed-loop experiment.

    Args:
        config: Experiment knobs (ignored in favour of the stored ones when resuming)
        device: DeviceAdapter producing images
        seed: Root seed of every random stream
        state: Saved state to resume from
        jobs: Worker threads for device runs and scoring
        checkpoint: State file rewritten after every batch
        progress: Show a progress bar

    Returns:
        Final ExperimentState and LoopReport
    """
    loop = ExperimentLoop(config, device, seed=seed, state=state, jobs=jobs,
                          checkpoint=checkpoint, progress=progress)
    return loop.run()
