"""Main FastAPI application for the droplet optimization service."""

import time
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.openapi.utils import get_openapi
from fastapi.responses import JSONResponse

from config.config import config
from src import __version__
from src.api.routes.devices import router as devices_router
from src.api.routes.experiments import router as experiments_router
from src.api.routes.vision import router as vision_router
from src.utils.errors import (
    BadImageError,
    ConfigError,
    DropletBoError,
    InvalidCountMaxError,
    NonPositiveInputError,
)
from src.utils.logger import get_logger

logger = get_logger(__name__)

SERVICE_NAME = "Droplet BO API"

# Expected failures caused by the request body itself
UNPROCESSABLE_ERRORS = (BadImageError, ConfigError, InvalidCountMaxError, NonPositiveInputError)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application lifespan manager."""
    logger.info(f"Starting {SERVICE_NAME}...")

    try:
        config.validate()
        logger.info("Configuration validated successfully")
    except ValueError as e:
        logger.error(f"Configuration validation failed: {e}")
        raise

    logger.info(f"Serving experiments from {config.DATA_DIR}")

    yield

    logger.info("Shutting down API server...")


app = FastAPI(
    title=SERVICE_NAME,
    description="""
    Scoring and suggestion service for closed-loop droplet optimization.

    ## Features

    * **Image scoring**: Segment a droplet image and return its loss components
    * **Dimensionless groups**: Ohnesorge, Weber, Reynolds, capillary and Bond numbers
    * **Experiment summaries**: Best settings and feasibility of stored runs
    * **Batch suggestions**: Next batch of a stored run, for running it by hand
    """,
    version=__version__,
    lifespan=lifespan,
    docs_url="/api/v1/docs",
    redoc_url="/api/v1/redoc",
    openapi_url="/api/v1/openapi.json",
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.middleware("http")
async def log_requests(request: Request, call_next):
    """Log all incoming requests."""
    start_time = time.time()

    logger.info(
        f"Request: {request.method} {request.url.path} "
        f"from {request.client.host if request.client else 'unknown'}"
    )

    response = await call_next(request)

    duration = time.time() - start_time
    logger.info(f"Response: {response.status_code} in {duration:.3f}s")

    return response


app.include_router(vision_router)
app.include_router(devices_router)
app.include_router(experiments_router)


@app.get("/", tags=["root"])
async def root():
    """Root endpoint with API information."""
    return {
        "name": SERVICE_NAME,
        "version": __version__,
        "description": "Bayesian optimization of droplet generation",
        "docs_url": "/api/v1/docs",
        "health_url": "/health",
        "endpoints": {
            "score_image": "/api/v1/vision/score",
            "dimensionless": "/api/v1/devices/dimensionless",
            "experiment_summary": "/api/v1/experiments/{name}/summary",
            "propose_batch": "/api/v1/experiments/{name}/propose",
        },
    }


@app.get("/health", tags=["health"])
async def global_health():
    """Simple health check endpoint."""
    return {
        "status": "healthy",
        "timestamp": time.time(),
        "service": SERVICE_NAME,
    }


def error_body(request: Request, status_code: int, error: str, **extra) -> dict:
    body = {
        "error": error,
        "status_code": status_code,
        "timestamp": time.time(),
        "path": request.url.path,
    }
    body.update(extra)
    return body


@app.exception_handler(HTTPException)
async def http_exception_handler(request: Request, exc: HTTPException):
    """Handle HTTP exceptions."""
    return JSONResponse(
        status_code=exc.status_code,
        content=error_body(request, exc.status_code, exc.detail),
    )


@app.exception_handler(DropletBoError)
async def droplet_error_handler(request: Request, exc: DropletBoError):
    """Expected failures: 422 when the input itself is unusable, 400 otherwise."""
    status_code = 422 if isinstance(exc, UNPROCESSABLE_ERRORS) else 400
    logger.warning(f"{type(exc).__name__} in {request.url.path}: {exc.message}")
    return JSONResponse(
        status_code=status_code,
        content=error_body(
            request, status_code, exc.message,
            error_type=type(exc).__name__,
            context={k: str(v) for k, v in exc.context.items()},
        ),
    )


@app.exception_handler(ValueError)
async def value_error_handler(request: Request, exc: ValueError):
    """Handle ValueError exceptions."""
    logger.error(f"ValueError in {request.url.path}: {str(exc)}")
    return JSONResponse(status_code=400, content=error_body(request, 400, str(exc)))


@app.exception_handler(Exception)
async def general_exception_handler(request: Request, exc: Exception):
    """Handle general exceptions."""
    logger.error(f"Unhandled exception in {request.url.path}: {str(exc)}", exc_info=True)
    return JSONResponse(status_code=500, content=error_body(request, 500, "Internal server error"))


def custom_openapi():
    """Generate custom OpenAPI schema."""
    if app.openapi_schema:
        return app.openapi_schema

    openapi_schema = get_openapi(
        title=SERVICE_NAME,
        version=__version__,
        description=app.description,
        routes=app.routes,
    )
    openapi_schema["info"]["x-units"] = "Image sizes in pixels, fluid properties in SI units"

    app.openapi_schema = openapi_schema
    return app.openapi_schema


app.openapi = custom_openapi

if __name__ == "__main__":
    import uvicorn

    uvicorn.run(
        "src.api.main:app",
        host=config.API_HOST,
        port=config.API_PORT,
        reload=config.DEBUG,
        log_level=config.LOG_LEVEL.lower(),
    )
