from __future__ import annotations

import pytest


@pytest.fixture
def report(capfd):
    """Print a line that bypasses output capture (for pass/fail summaries)."""

    def emit(line: str) -> None:
        with capfd.disabled():
            print(line, flush=True)

    return emit
