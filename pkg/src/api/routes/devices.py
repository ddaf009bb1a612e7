"""API routes for device-side physics."""

from fastapi import APIRouter

from src.api.models.request_models import DimensionlessResponse
from src.devices.dimensionless import FluidProperties, dimensionless

router = APIRouter(prefix="/api/v1/devices", tags=["devices"])


@router.post("/dimensionless", response_model=DimensionlessResponse)
async def dimensionless_groups(props: FluidProperties):
    """Ohnesorge, Weber, Reynolds, capillary and Bond numbers of a fluid system (SI units)."""
    return DimensionlessResponse(**dimensionless(props))
