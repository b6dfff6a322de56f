import json
from pathlib import Path

import pytest

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def golden_side_box():
    """Pinned canonical side-box-push trajectory (bitwise regression)."""
    with open(DATA_DIR / "golden_side_box.json", "r", encoding="utf-8") as f:
        return [tuple(row) for row in json.load(f)]
