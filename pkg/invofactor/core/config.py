from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    PROJECT_NAME: str = "Invofactor"
    API_V1_STR: str = "/api/v1"
    ENV: str = "dev"
    LOG_LEVEL: str = "INFO"

    # Exhaustive search (glsearch)
    INVOFACTOR_BUDGET: int = 2_000_000
    CENSUS_DIR: str = "census"

    # Verification windows
    DEFAULT_WINDOW: int = 32
    WINDOW_MARGIN: int = 8
    ORBIT_MAX: int = 512
    EVIDENCE_DEPTH: int = 12

    # Certificate tails
    TAIL_SAMPLES: int = 64
    TAIL_PERIOD_MAX: int = 6
    TAIL_ORDER_MAX: int = 3

    # Pipelines
    QMAX: int = 8
    SEED_RETRIES: int = 4
    STRAT_SEARCH_SUPPORT: int = 2
    STRAT_BACKTRACK: int = 4
    STRAT_NODE_BUDGET: int = 2000

    JOBS: int = 1

    class Config:
        case_sensitive = True
        env_file = ".env"
        extra = "ignore"


settings = Settings()
