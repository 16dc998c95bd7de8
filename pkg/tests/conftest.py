"""Pytest configuration: import path, slow-test gating and small shared configs."""
from __future__ import annotations

import os
import sys
from pathlib import Path

import pytest

# Disable auto-loading external pytest plugins.
os.environ.setdefault("PYTEST_DISABLE_PLUGIN_AUTOLOAD", "1")

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption("--runslow", action="store_true", default=False, help="run long acceptance checks")


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "slow: long-running acceptance check (needs --runslow)")


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def small_cfg():
    from aptt_kit.config import make_config

    return make_config(dim=1, m=8, dt=0.01, t_star=0.05, eps_b=1e-10, eps_d=1e-10)
