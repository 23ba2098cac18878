import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(autouse=True)
def _quiet_small_sample_warnings():
    """Small-n fits are deliberate in many tests; keep the output clean."""
    import warnings

    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="n=.* is small")
        yield
