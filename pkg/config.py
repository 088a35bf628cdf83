import logging
import os

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from errors import ModelInputError

# --- Configuration (Defaults/Constants) ---
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
CONSOLE_LOG_FORMAT = '%(levelname)s - %(message)s'

ENV_PREFIX = "LEVERAGE_"


class Settings(BaseModel):
    """Runtime settings resolved from the environment (and an optional .env file)."""

    model_config = ConfigDict(frozen=True)

    mu_min: float = Field(1e-8, gt=0, description="Smallest admissible |mu|")
    quad_tol: float = Field(1e-9, gt=0, description="Adaptive Simpson absolute tolerance")
    threads: int = Field(1, ge=1, description="Worker threads for simulation blocks")
    seed: int = Field(20131231, ge=0, description="Default simulation seed")
    trading_days: int = Field(252, gt=0)
    tax_rate: float = Field(0.35, ge=0.0, le=1.0)
    log_level: str = "INFO"
    log_file: str | None = None

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        value = value.upper()
        if not isinstance(logging.getLevelName(value), int):
            raise ValueError(f"unknown log level '{value}'")
        return value


# --- Configuration Loading ---
def load_config() -> Settings:
    """Loads settings from the environment, reading a .env file first if present."""
    load_dotenv()
    raw = {
        "mu_min": os.getenv(f"{ENV_PREFIX}MU_MIN", 1e-8),
        "quad_tol": os.getenv(f"{ENV_PREFIX}QUAD_TOL", 1e-9),
        "threads": os.getenv(f"{ENV_PREFIX}THREADS", 1),
        "seed": os.getenv(f"{ENV_PREFIX}SEED", 20131231),
        "trading_days": os.getenv(f"{ENV_PREFIX}TRADING_DAYS", 252),
        "tax_rate": os.getenv(f"{ENV_PREFIX}TAX_RATE", 0.35),
        "log_level": os.getenv(f"{ENV_PREFIX}LOG_LEVEL", "INFO"),
        "log_file": os.getenv(f"{ENV_PREFIX}LOG_FILE") or None,
    }
    try:
        return Settings(**raw)
    except ValidationError as e:
        raise ModelInputError(f"Invalid configuration: {e}") from e


# --- Logging Setup ---
def setup_logging(level: str = "INFO", log_file: str | None = None) -> None:
    """Configures the root logger.

    With a log file, full records go to the file and a short format goes to the
    console; otherwise everything goes to stderr.
    """
    numeric_level = logging.getLevelName(str(level).upper())
    if not isinstance(numeric_level, int):
        raise ModelInputError(f"Unknown log level '{level}'")

    if log_file:
        logging.basicConfig(level=numeric_level,
                            format=LOG_FORMAT,
                            filename=log_file,
                            filemode='w',
                            force=True)
        console_handler = logging.StreamHandler()
        console_handler.setLevel(numeric_level)
        console_handler.setFormatter(logging.Formatter(CONSOLE_LOG_FORMAT))
        logging.getLogger('').addHandler(console_handler)
    else:
        logging.basicConfig(level=numeric_level, format=LOG_FORMAT, force=True)


SETTINGS = load_config()
