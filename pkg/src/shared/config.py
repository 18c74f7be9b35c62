"""
Core Configuration Management

Runtime settings loaded from environment variables (.env supported).

Guiding ideas:
- Experiment hyperparameters live in config files (see configfile.py), not here.
- These settings only tune how the process runs: logging, threads, debug checks.
"""
from pydantic import BaseModel
import os
from dotenv import load_dotenv

# Load .env file
load_dotenv()


class Settings(BaseModel):
    """Process settings with environment variable support.

    Environment variables (examples):
    - PAIRWISE_LOG_LEVEL=INFO|DEBUG|WARNING
    - PAIRWISE_DEBUG_NUMERICS=true   # assert finite outputs after every tensor op
    - PAIRWISE_THREADS=4             # data generation worker threads
    - PAIRWISE_MAX_MATERIALIZE_DIM=4096
    - PAIRWISE_ENVIRONMENT=production|development
    """

    log_level: str = os.getenv("PAIRWISE_LOG_LEVEL", "INFO")
    debug_numerics: bool = os.getenv("PAIRWISE_DEBUG_NUMERICS", "false").lower() == "true"
    threads: int = int(os.getenv("PAIRWISE_THREADS", "1"))
    max_materialize_dim: int = int(os.getenv("PAIRWISE_MAX_MATERIALIZE_DIM", "4096"))
    environment: str = os.getenv("PAIRWISE_ENVIRONMENT", "production")
    run_slow_tests: bool = os.getenv("PAIRWISE_RUN_SLOW", "0") == "1"


# Global settings instance
settings = Settings()
