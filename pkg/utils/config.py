"""
Configuration loader for the NTN split simulator.

Reads environment variables (optionally from a .env file) and provides typed accessors.
"""

from __future__ import annotations

import logging
import os
import sys
from dataclasses import dataclass

from dotenv import load_dotenv

load_dotenv()

_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


@dataclass(frozen=True)
class AppConfig:
    log_level: str
    output_dir: str
    compare_workers: int


def get_config() -> AppConfig:
    level = os.environ.get("NTNSIM_LOG", "WARNING").strip().upper()
    if level not in _LEVELS:
        level = "WARNING"
    try:
        workers = max(1, int(os.environ.get("NTNSIM_WORKERS", "4")))
    except ValueError:
        workers = 4
    return AppConfig(
        log_level=level,
        output_dir=os.environ.get("NTNSIM_OUT", "out"),
        compare_workers=workers,
    )


def configure_logging(config: AppConfig | None = None) -> None:
    """Install one stderr handler at the configured level."""
    config = config or get_config()
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_ntnsim", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._ntnsim = True  # type: ignore[attr-defined]
    root.addHandler(handler)
    root.setLevel(config.log_level)
