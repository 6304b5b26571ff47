"""Shared fixtures and the acceptance summary printed at the end of a run."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from tlnav.env import load_map
from tlnav.ltl import parse_ltl

DATA = Path(__file__).resolve().parents[1] / "src" / "tlnav" / "data"

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def simple_grid():
    return load_map(DATA / "simple.map")


@pytest.fixture(scope="session")
def complex_grid():
    return load_map(DATA / "complex.map")


@pytest.fixture(scope="session")
def simple_phi():
    return parse_ltl((DATA / "simple.ltl").read_text())


@pytest.fixture(scope="session")
def complex_phi():
    return parse_ltl((DATA / "complex.ltl").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
