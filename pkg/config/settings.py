"""
Environment-driven settings for the simulator CLI and the report browser.
Values come from the process environment, optionally seeded from a .env file.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()


def _int_env(name, default):
    """Integer environment variable, falling back to `default` on absence or garbage"""
    try:
        return int(os.getenv(name, default))
    except (TypeError, ValueError):
        return default


OUT_DIR = Path(os.getenv('LINKSIM_OUT_DIR', 'runs'))
THREADS = max(1, _int_env('LINKSIM_THREADS', 1))
LOG_LEVEL = os.getenv('LINKSIM_LOG_LEVEL', 'INFO').upper()
RESULTS_DIR = Path(os.getenv('LINKSIM_RESULTS_DIR', str(OUT_DIR)))
