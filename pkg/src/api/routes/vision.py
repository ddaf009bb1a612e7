"""API routes for scoring droplet images."""

import time

from fastapi import APIRouter, File, Form, HTTPException, UploadFile
from pydantic import ValidationError

from src.api.models.request_models import ScoreResponse
from src.core.imaging import image_from_bytes
from src.core.vision import SegOpts, score
from src.utils.logger import get_logger, log_performance

router = APIRouter(prefix="/api/v1/vision", tags=["vision"])
logger = get_logger(__name__)

MAX_UPLOAD_BYTES = 32 * 1024 * 1024


@router.post("/score", response_model=ScoreResponse)
def score_image(
    image: UploadFile = File(..., description="PNG or PGM droplet image"),
    count_max: int = Form(50, ge=1, description="Droplet count normalizing the yield loss"),
    marker_frac: float = Form(0.4, description="Watershed marker prominence fraction"),
    min_area: int = Form(20, ge=1, description="Smallest droplet in pixels"),
):
    """
    Score one droplet image.

    The image is segmented into droplets; the response carries the combined
    loss, its geometry and yield components, and droplet statistics.
    """
    start_time = time.time()

    try:
        opts = SegOpts(marker_frac=marker_frac, min_area=min_area)
    except ValidationError as e:
        raise HTTPException(status_code=422, detail=f"segmentation: {e.errors()[0]['msg']}")

    data = image.file.read(MAX_UPLOAD_BYTES + 1)
    if len(data) > MAX_UPLOAD_BYTES:
        raise HTTPException(status_code=413, detail="Image exceeds 32 MiB")

    droplet_image = image_from_bytes(data, image.filename or "upload")
    result = score(droplet_image, opts, count_max)

    duration = time.time() - start_time
    log_performance(logger, "score image", duration, {"droplets": result.droplet_count})

    return ScoreResponse(
        loss=result.loss,
        geom_loss=result.geom_loss,
        yield_loss=result.yield_loss,
        droplet_count=result.droplet_count,
        mean_diameter_px=result.mean_diameter_px,
        diameter_cv=result.diameter_cv,
        processing_time=duration,
    )
