"""
Shared fixtures for the modpress test suite.
"""

import pytest

from core.pressure_engine import CylinderPotential
from core.shift_core import TransitionRule, truncate
from settings_loader import load_settings, use_settings


@pytest.fixture(autouse=True)
def default_settings():
    """Every test starts and ends with the default settings."""
    use_settings(None)
    yield
    use_settings(None)


@pytest.fixture
def settings_override():
    """Install settings with the given field overrides for the rest of the test."""
    def install(**overrides):
        settings = load_settings(**overrides)
        use_settings(settings)
        return settings
    return install


@pytest.fixture
def modular():
    return TransitionRule.modular()


@pytest.fixture
def two_block(modular):
    """Full shift on {4, 5}: the recurrent part of truncate(A, 5)."""
    return truncate(modular, 5).recurrent_shift()


@pytest.fixture
def roof():
    return CylinderPotential(tau_coef=1.0)
