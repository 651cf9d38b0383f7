"""
Configuration module for mfgc.

Loads environment variables and provides centralized access to run-wide defaults.
Per-experiment settings live in the pydantic schemas (see mfgc.schemas).
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Experiment outputs
OUTPUT_DIR = os.getenv("MFGC_OUTPUT_DIR", "./results")

# Worker pool for experiment cells
THREADS = int(os.getenv("MFGC_THREADS", "1"))

# Logging / console
LOG_LEVEL = os.getenv("MFGC_LOG_LEVEL", "WARNING").upper()
NO_COLOR = os.getenv("MFGC_NO_COLOR", "false").lower() == "true"


def get_absolute_path(path: str) -> Path:
    """
    Resolve an output path.

    Args:
        path: Absolute, or relative to the working directory (not the package)

    Returns:
        Absolute Path object
    """
    candidate = Path(path).expanduser()
    return candidate if candidate.is_absolute() else (Path.cwd() / candidate).resolve()
