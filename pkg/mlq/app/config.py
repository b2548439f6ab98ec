# mlq/app/config.py
from typing import Optional

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    DATASET_ROOT: Optional[str] = None  # rebases relative dataset paths
    SEED: int = 10
    TEST_SIZE: float = 0.2
    MAX_STEPS: int = 100000
    LIVELOCK_LIMIT: int = 10000
    CLOCK_PERIOD: int = 10
    CLOCK_TICKS: int = 0  # built-in clock stays silent unless a budget is given
    LOG_LEVEL: str = "WARNING"

    model_config = {"env_file": ".env", "env_prefix": "MLQ_", "extra": "ignore"}


settings = Settings()
