import math
import os

import numpy as np
import pytest

from fdlab.domain import DomainSpec
from fdlab.periodic import PeriodicFn1

PI = math.pi
ACCEPTANCE_LINES: dict[int, str] = {}


def fixed_domain(omega=1.0):
    return DomainSpec(PI, omega=omega)


def breathing(omega=2 * PI, eps=0.5):
    return DomainSpec(PI, l=PeriodicFn1.sine(eps, 1, 1.0), omega=omega)


def shifting(omega=1.0, A0=0.5):
    return DomainSpec(PI, A0=A0, a=PeriodicFn1.sine(1.0, 1, 0.0), omega=omega)


@pytest.fixture
def seed():
    return int(os.environ.get("FDL_SEED", "20240917"))


@pytest.fixture
def rng(seed):
    return np.random.default_rng(seed)


@pytest.fixture
def acceptance():
    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
