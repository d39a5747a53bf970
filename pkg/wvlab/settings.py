"""Process-level settings read from the environment (and an optional .env)."""

import logging
import os

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator

from wvlab.errors import ConfigError

# Load environment variables
load_dotenv()

ENV_NAMES = {"log_level": "WVLAB_LOG_LEVEL", "threads": "WVLAB_THREADS", "out_dir": "WVLAB_OUT_DIR"}


class Settings(BaseModel):
    """Defaults that do not belong in a scenario file."""
    log_level: str = Field(default="INFO", description="Level for the wvlab logger")
    threads: int = Field(default=1, ge=1, description="Worker threads when --threads is not given")
    out_dir: str = Field(default="results", description="Output directory when --out is not given")

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        level = value.strip().upper()
        if not isinstance(logging.getLevelName(level), int):
            raise ValueError(f"unknown log level {value!r}")
        return level


def get_settings() -> Settings:
    raw = {field: os.getenv(name) for field, name in ENV_NAMES.items()}
    try:
        return Settings.model_validate({field: value for field, value in raw.items() if value is not None})
    except ValidationError as e:
        diagnostics = [f"{ENV_NAMES[str(item['loc'][0])]}: {item['msg']}" for item in e.errors()]
        raise ConfigError("invalid environment settings", diagnostics) from e
