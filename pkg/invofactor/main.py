import logging
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from invofactor import __version__
from invofactor.api.endpoints import router as api_router
from invofactor.core.config import settings
from invofactor.core.errors import InvofactorError

logging.basicConfig(
    level=settings.LOG_LEVEL,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    census_dir = Path(settings.CENSUS_DIR)
    census_dir.mkdir(parents=True, exist_ok=True)
    logger.info(
        f"Starting {settings.PROJECT_NAME} {__version__}: budget={settings.INVOFACTOR_BUDGET} "
        f"window={settings.DEFAULT_WINDOW} jobs={settings.JOBS} census_dir={census_dir}"
    )
    yield
    logger.info(f"{settings.PROJECT_NAME} stopped")


app = FastAPI(
    title=settings.PROJECT_NAME,
    description="Exact quadratic factorizations of automorphisms of countable-dimensional spaces.",
    version=__version__,
    openapi_url=f"{settings.API_V1_STR}/openapi.json",
    lifespan=lifespan,
)

# Only the dev environment is open to browsers on other origins.
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"] if settings.ENV == "dev" else [],
    allow_methods=["GET", "POST"],
    allow_headers=["Content-Type"],
)

app.include_router(api_router, prefix=settings.API_V1_STR)


@app.exception_handler(InvofactorError)
async def invofactor_error_handler(request: Request, exc: InvofactorError):
    # Route handlers translate the errors they expect; anything else lands here.
    logger.error(f"unhandled {exc.code} on {request.url.path}: {exc.message}")
    return JSONResponse(status_code=500, content={"detail": exc.to_dict()})


@app.get("/health", tags=["Health"])
def health_check():
    return {
        "status": "healthy",
        "project": settings.PROJECT_NAME,
        "version": __version__,
        "budget": settings.INVOFACTOR_BUDGET,
    }


@app.get("/", tags=["Root"])
def root():
    """Entry points of the API."""
    prefix = settings.API_V1_STR
    return {
        "message": f"{settings.PROJECT_NAME} API",
        "docs": "/docs",
        "health": "/health",
        "endpoints": [f"{prefix}/{name}" for name in ("acceptable", "classify", "factor", "verify", "search", "census")],
    }
