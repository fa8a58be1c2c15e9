import logging
import os

from dotenv import load_dotenv

load_dotenv()


def _bool(value):
    return str(value).lower() in ("true", "1", "yes")


# Sweep / worker settings
KANESIM_PARALLELISM = int(os.getenv("KANESIM_PARALLELISM", str(os.cpu_count() or 1)))
KANESIM_MAX_GRID = int(os.getenv("KANESIM_MAX_GRID", "64"))
KANESIM_PROGRESS_EVERY = int(os.getenv("KANESIM_PROGRESS_EVERY", "10"))

# Exporter settings
KANESIM_CONFIG = os.getenv("KANESIM_CONFIG", "")
FLASK_HOST = os.getenv("FLASK_HOST", "0.0.0.0")
FLASK_PORT = int(os.getenv("FLASK_PORT", "8000"))

# Application settings
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()
DEBUG = _bool(os.getenv("DEBUG", "false"))

LOG_FORMAT = "[%(asctime)s] [%(levelname)s] %(message)s"


def configure_logging(level=None):
    """Configure the root logger once per process (CLI, exporter, sweep workers)."""
    name = (level or LOG_LEVEL).upper()
    logging.basicConfig(
        level=logging.DEBUG if DEBUG else getattr(logging, name, logging.INFO),
        format=LOG_FORMAT,
        force=True,
    )


def resolve_parallelism(requested=None):
    """Worker count: explicit request, else KANESIM_PARALLELISM, never below 1."""
    value = KANESIM_PARALLELISM if requested is None else int(requested)
    return max(1, value)
