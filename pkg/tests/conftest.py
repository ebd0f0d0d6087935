import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""
    lines = request.config.acceptance_lines

    def record(number: int, title: str, ok: bool, detail: str = ""):
        text = f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {title}"
        if detail:
            text += f" ({detail})"
        lines.append((number, 0, text))
        print(text)
        assert ok, text

    return record


@pytest.fixture
def note(request):
    """Informational line listed under a criterion, never asserted."""
    lines = request.config.acceptance_lines
    return lambda number, text: lines.append((number, 1, f"       {text}"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, _, text in sorted(lines, key=lambda t: t[:2]):
            terminalreporter.write_line(text)
