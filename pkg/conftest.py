from __future__ import annotations

import os
import sys
from pathlib import Path

import pytest


# Ensure the project root is importable so `import app...` works reliably when
# pytest is executed from different working directories or environments.
PROJECT_ROOT = Path(__file__).resolve().parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale Monte Carlo ensembles (set TRI_RUN_SLOW=1)")


def pytest_collection_modifyitems(config, items):
    if os.getenv("TRI_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set TRI_RUN_SLOW=1 to run desk-scale ensembles")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
