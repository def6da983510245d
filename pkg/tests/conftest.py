import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path_factory, monkeypatch):
    # fine-mesh references computed by tests never touch the user's cache
    monkeypatch.setenv("OSGS_GOAL_CACHE", str(tmp_path_factory.getbasetemp() / "ref-cache"))
