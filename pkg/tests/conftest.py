"""Shared fixtures and the acceptance-line reporter.

Every test here runs on the deterministic toy backends; no model weights
are ever loaded. The `acceptance` fixture collects one human-readable
PASS line per acceptance criterion, printed in a dedicated section at the
end of the run together with the whole-suite wall-clock check.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from layoutgen.backends import ToyWorld, toy_backend_set
from layoutgen.diffusion import DEFAULT_SCHEDULE_ARGS, make_schedule

SUITE_BUDGET_SECONDS = 60.0


def pytest_configure(config):
    config._suite_started = time.perf_counter()
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    elapsed = time.perf_counter() - config._suite_started
    lines = list(config._acceptance_lines)
    if lines:
        budget_ok = elapsed < SUITE_BUDGET_SECONDS and exitstatus == 0
        verdict = "PASS" if budget_ok else "FAIL"
        lines.append(
            f"[{verdict}] whole suite on toy backends, no model weights: "
            f"{elapsed:.1f}s wall-clock (budget {SUITE_BUDGET_SECONDS:.0f}s)"
        )
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


class AcceptanceLog:
    """Collects one PASS line per acceptance criterion."""

    def __init__(self, config):
        self._config = config

    def record(self, line: str) -> None:
        self._config._acceptance_lines.append(f"[PASS] {line}")


@pytest.fixture
def acceptance(request) -> AcceptanceLog:
    return AcceptanceLog(request.config)


@pytest.fixture(scope="session", autouse=True)
def _suite_runtime_guard(request):
    """Fail the run if the whole suite exceeds its wall-clock budget."""
    yield
    elapsed = time.perf_counter() - request.config._suite_started
    assert elapsed < SUITE_BUDGET_SECONDS, (
        f"suite took {elapsed:.1f}s, budget is {SUITE_BUDGET_SECONDS:.0f}s"
    )


@pytest.fixture(scope="session")
def schedule():
    return make_schedule(**DEFAULT_SCHEDULE_ARGS)


def rect_mask(h: int, w: int, r0: int, r1: int, c0: int, c1: int) -> np.ndarray:
    """Axis-aligned rectangle mask: rows [r0, r1), cols [c0, c1)."""
    m = np.zeros((h, w), dtype=np.uint8)
    m[r0:r1, c0:c1] = 1
    return m


@pytest.fixture
def make_rect_mask():
    return rect_mask


def make_toy_backends(prompt_targets: dict, *, record_calls: bool = False, codec=None):
    """Toy backend set for a dict of prompt -> target image/callable."""
    world = ToyWorld()
    for prompt, target in prompt_targets.items():
        world.register(prompt, target)
    sched = make_schedule(**DEFAULT_SCHEDULE_ARGS)
    return toy_backend_set(world, sched, codec=codec, record_calls=record_calls)


@pytest.fixture
def toy_backends_factory():
    return make_toy_backends
