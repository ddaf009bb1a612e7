"""API routes for stored experiments under the data directory."""

import time
from pathlib import Path
from typing import List, Optional, Sequence

from fastapi import APIRouter, HTTPException, Query

from config.config import config
from src.api.models.request_models import (
    ExperimentSummaryResponse,
    ParameterValue,
    ProposeResponse,
    Suggestion,
)
from src.core.analysis import sample_efficiency
from src.core.loop import best, propose_next
from src.core.space import ParameterSpace, denormalize
from src.core.state import ExperimentState, load_state
from src.utils.logger import get_logger, log_performance
from src.utils.validators import validate_experiment_name

router = APIRouter(prefix="/api/v1/experiments", tags=["experiments"])
logger = get_logger(__name__)

STATE_FILE = "state.json"


def state_path(name: str) -> Path:
    is_valid, error_msg = validate_experiment_name(name)
    if not is_valid:
        raise HTTPException(status_code=400, detail=error_msg)

    path = Path(config.DATA_DIR) / name / STATE_FILE
    if not path.is_file():
        raise HTTPException(status_code=404, detail=f"Experiment '{name}' not found")
    return path


def load_experiment(name: str) -> ExperimentState:
    return load_state(state_path(name))


def physical_parameters(space: ParameterSpace, x: Sequence[float]) -> List[ParameterValue]:
    values = denormalize(space, x)
    return [
        ParameterValue(name=d.name, unit=d.unit, value=float(v))
        for d, v in zip(space.dims, values)
    ]


@router.get("/{name}/summary", response_model=ExperimentSummaryResponse)
async def experiment_summary(name: str):
    """Best sample, sample counts and feasibility fractions of a stored experiment."""
    state = load_experiment(name)
    x, loss = best(state)
    efficiency = sample_efficiency(state, state.config.feasibility_threshold)

    return ExperimentSummaryResponse(
        name=name,
        device=state.device,
        samples=len(state.samples),
        scored=efficiency["scored"],
        batches=state.last_batch + 1,
        best_loss=loss,
        best_x=x.tolist(),
        best_parameters=physical_parameters(state.space, x),
        feasibility_threshold=state.config.feasibility_threshold,
        feasibility_acquired_only=efficiency["feasibility_acquired_only"],
        feasibility_all=efficiency["feasibility_all"],
    )


@router.post("/{name}/propose", response_model=ProposeResponse)
def propose(name: str, batch_size: Optional[int] = Query(None, ge=1, le=1000)):
    """
    Next batch of suggestions for a stored experiment.

    The surrogate is fitted to the stored samples and the batch is chosen the
    same way the loop would; nothing is written back. Suggestions are meant
    to be run by hand and recorded into the experiment afterwards.
    """
    start_time = time.time()
    state = load_experiment(name)
    batch_index, proposal = propose_next(state, batch_size)

    suggestions = [
        Suggestion(
            sample_id=i,
            x=[float(c) for c in point],
            parameters=physical_parameters(state.space, point),
            acq_value=float(value),
        )
        for i, (point, value) in enumerate(zip(proposal.points, proposal.acq_values))
    ]

    duration = time.time() - start_time
    log_performance(logger, f"propose {name}", duration, {"batch": batch_index, "points": len(suggestions)})

    return ProposeResponse(
        name=name,
        batch_index=batch_index,
        acquisition=proposal.kind.value,
        suggestions=suggestions,
        processing_time=duration,
    )
