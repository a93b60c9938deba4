"""Run-time settings and environment overrides."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Mapping, Optional

_LOGGER = logging.getLogger(__name__)

PRECISION_ENV = "TORIC_ARAKELOV_PRECISION"
LOG_LEVEL_ENV = "TORIC_ARAKELOV_LOG_LEVEL"

MIN_PRECISION_BITS = 53

# Report field order for the Rich/Markdown renderers.
REPORT_COLUMNS: list[tuple[str, str]] = [
    ("Field", "left"),
    ("Value", "left"),
    ("Provenance", "left"),
]


@dataclass(frozen=True, slots=True)
class Settings:
    """Tunable limits for certified and numeric computations."""

    precision_bits: int = 128
    precision_cap_bits: int = 4096
    cubature_tol: float = 1e-8
    cubature_max_elements: int = 400_000
    oracle_tol: float = 1e-10
    oracle_box: float = 40.0
    orthogonality_angle_points: int = 256
    orthogonality_u_points: int = 801
    orthogonality_box: float = 12.0
    fujita_max_iterations: int = 64
    optimizer_max_iterations: int = 500
    lattice_point_cap: int = 5_000_000
    log_level: str = "WARNING"


def _env_int(env: Mapping[str, str], name: str) -> Optional[int]:
    value = env.get(name)
    if value is None or not value.strip():
        return None
    try:
        return int(value.strip())
    except ValueError:
        _LOGGER.warning("Ignoring %s=%r: not an integer", name, value)
        return None


def load_settings(env: Optional[Mapping[str, str]] = None) -> Settings:
    """Return :class:`Settings` with overrides taken from *env*.

    ``TORIC_ARAKELOV_PRECISION`` sets the starting interval precision in
    bits; values below 53 or above the precision cap are ignored.
    """

    env = os.environ if env is None else env
    defaults = Settings()
    precision = _env_int(env, PRECISION_ENV)
    if precision is not None and not (
        MIN_PRECISION_BITS <= precision <= defaults.precision_cap_bits
    ):
        _LOGGER.warning(
            "Ignoring %s=%s: outside [%s, %s]",
            PRECISION_ENV,
            precision,
            MIN_PRECISION_BITS,
            defaults.precision_cap_bits,
        )
        precision = None
    level = env.get(LOG_LEVEL_ENV, "").strip().upper()
    if level and not isinstance(logging.getLevelName(level), int):
        _LOGGER.warning("Ignoring %s=%r: unknown level", LOG_LEVEL_ENV, level)
        level = ""
    return Settings(
        precision_bits=precision or defaults.precision_bits,
        log_level=level or defaults.log_level,
    )


_SETTINGS: Optional[Settings] = None


def get_settings() -> Settings:
    """Return the process-wide settings, loading them on first use."""

    global _SETTINGS
    if _SETTINGS is None:
        _SETTINGS = load_settings()
    return _SETTINGS


def set_settings(settings: Settings) -> None:
    global _SETTINGS
    _SETTINGS = settings


__all__ = [
    "LOG_LEVEL_ENV",
    "MIN_PRECISION_BITS",
    "PRECISION_ENV",
    "REPORT_COLUMNS",
    "Settings",
    "get_settings",
    "load_settings",
    "set_settings",
]
