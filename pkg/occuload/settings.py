from pathlib import Path
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    LOG_LEVEL: str = "INFO"
    CONFIG: Path | None = None
    OUT_DIR: Path = Path("out")
    WORKERS: int = 1

    model_config = {
        "extra": "ignore",  # to allow for other variables in .env
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "env_prefix": "OCCULOAD_",
    }


settings = Settings()
