"""
Settings Loader Utility

This module loads the run configuration (caps, tolerances, scan ranges, logging)
from environment variables, an optional .env file and an optional modpress.json,
ensuring consistent access across all modules.
"""

import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class ModpressSettings(BaseSettings):
    """Caps and numerical tolerances shared by every computation."""

    model_config = SettingsConfigDict(env_prefix="MODPRESS_", env_file=".env", extra="ignore")

    max_states: int = Field(2_000_000, gt=0)  # weighted-matrix size cap
    max_symbol: int = Field(10**6, gt=0)
    max_oracle_words: int = Field(2_000_000, gt=0)  # periodic words / cylinders / dense entries
    slop: float = Field(2.0**-45, gt=0)  # relative outward rounding
    power_tol: float = Field(1e-13, gt=0)
    max_iterations: int = Field(100_000, gt=0)
    divergence_log_threshold: float = 30.0
    t_min: float = 0.0
    t_max: float = 5.0
    t_max_limit: float = 40.0
    log_level: str = "INFO"
    log_file: Optional[str] = None

    @field_validator("log_level")
    @classmethod
    def _upper_level(cls, value: str) -> str:
        return value.upper()


def load_config_file(config_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Load overrides from a modpress.json file.

    Args:
        config_path: Optional custom path to the config file.
                     If not provided, looks for 'modpress.json' in the current directory
                     and then in 'config/modpress.json'

    Returns:
        Dictionary of overrides (empty when no file is found)

    Raises:
        FileNotFoundError: If an explicit config_path does not exist
        json.JSONDecodeError: If the config file contains invalid JSON
    """
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise FileNotFoundError(f"Config file not found at: {path}")
    else:
        path = Path('modpress.json')
        if not path.exists():
            path = Path('config/modpress.json')
        if not path.exists():
            return {}

    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def load_settings(config_path: Optional[str] = None, **overrides: Any) -> ModpressSettings:
    """
    Build settings from env/.env, then a config file, then explicit overrides.

    Args:
        config_path: Optional path to a JSON config file
        **overrides: Field values taking precedence over everything else

    Returns:
        Validated ModpressSettings instance
    """
    base = ModpressSettings()
    merged = base.model_dump()
    merged.update(load_config_file(config_path))
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return ModpressSettings.model_validate(merged)


_active: Optional[ModpressSettings] = None


@lru_cache(maxsize=1)
def _default_settings() -> ModpressSettings:
    return load_settings()


def use_settings(settings: Optional[ModpressSettings]):
    """Install settings for the whole process (None restores the defaults)."""
    global _active
    _active = settings


def get_settings() -> ModpressSettings:
    """Process-wide settings, read once."""
    return _active if _active is not None else _default_settings()
