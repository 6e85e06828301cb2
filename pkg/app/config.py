from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    ENVIRONMENT: str = "development"

    # Sumset layers
    LAYER_CARDINALITY_CAP: int = 10_000_000  # Max elements in L_nmax before aborting
    EXPANSION_WORKERS: int = 1  # 1 = expand in-process, >1 = process pool
    EXPANSION_CHUNK_SIZE: int = 4096  # Frontier elements per expansion task

    # Layer cache
    CACHE_DIR: str = ".tseq_cache"
    CACHE_ENABLED: bool = True

    # Search budgets
    FS_TAIL_BUDGET: int = 64  # Tail candidates examined per extraction step
    CHAIN_TAIL_BUDGET: int = 256  # Tail candidates examined per chain step
    CUBE_MAX_DIMENSION: int = 10  # 2^d images, 4^d distances

    # Output
    RECORDS_SCHEMA: str = "tseq-records/1"
    SHOW_PROGRESS: bool = False

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_DIR: str = ""  # Empty disables the file handler

    model_config = SettingsConfigDict(env_prefix="TSEQ_", env_file=".env", extra="ignore")


settings = Settings()
