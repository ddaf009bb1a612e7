"""Pydantic models for API requests and responses."""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class ScoreResponse(BaseModel):
    """Response model for scoring one droplet image."""

    loss: float = Field(..., description="Combined loss, 0 = perfect droplets")
    geom_loss: float = Field(..., description="Circularity loss")
    yield_loss: float = Field(..., description="Coverage and count loss")
    droplet_count: int = Field(..., description="Segmented droplets")
    mean_diameter_px: float = Field(0.0, description="Mean equivalent-circle diameter in pixels")
    diameter_cv: float = Field(0.0, description="Coefficient of variation of the diameters")
    processing_time: float = Field(0.0, description="Scoring time in seconds")


class DimensionlessResponse(BaseModel):
    """Response model for the dimensionless groups of a fluid system."""

    Oh: float = Field(..., description="Ohnesorge number")
    We: float = Field(..., description="Weber number")
    Re: float = Field(..., description="Reynolds number")
    Ca: float = Field(..., description="Capillary number")
    Bo: float = Field(..., description="Bond number")


class ParameterValue(BaseModel):
    name: str
    unit: str
    value: float


class ExperimentSummaryResponse(BaseModel):
    """Response model for a stored experiment."""

    name: str = Field(..., description="Experiment directory name")
    device: str = Field(..., description="Device the run used")
    samples: int = Field(..., description="Stored samples")
    scored: int = Field(..., description="Samples with a measured loss")
    batches: int = Field(..., description="Completed batches, initialization included")
    best_loss: float = Field(..., description="Lowest observed loss")
    best_x: List[float] = Field(..., description="Normalized controls of the best sample")
    best_parameters: List[ParameterValue] = Field(..., description="Physical controls of the best sample")
    feasibility_threshold: float
    feasibility_acquired_only: Optional[float] = Field(None, description="Feasible fraction of BO samples")
    feasibility_all: Optional[float] = Field(None, description="Feasible fraction of all samples")


class Suggestion(BaseModel):
    sample_id: int
    x: List[float] = Field(..., description="Normalized controls")
    parameters: List[ParameterValue] = Field(..., description="Physical controls")
    acq_value: float = Field(..., description="Acquisition value at selection time")


class ProposeResponse(BaseModel):
    """Response model for the next batch of an experiment."""

    name: str
    batch_index: int = Field(..., description="Index the batch would be stored under")
    acquisition: str
    suggestions: List[Suggestion] = Field(default_factory=list)
    processing_time: float = Field(0.0, description="Fit and acquisition time in seconds")


class HealthResponse(BaseModel):
    """Response model for health check."""

    status: str = Field(..., description="Overall health status")
    timestamp: float = Field(..., description="Health check timestamp")
    service: str = Field(..., description="Service name")


class ErrorResponse(BaseModel):
    """Standard error response model."""

    error: str = Field(..., description="Error message")
    error_type: Optional[str] = Field(None, description="Error class for expected failures")
    context: Dict[str, Any] = Field(default_factory=dict, description="Field, file, batch, ...")
    status_code: int
    timestamp: float = Field(..., description="Error timestamp")
    path: str
