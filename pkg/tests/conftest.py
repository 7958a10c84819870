import math

import numpy as np
import pytest

from thermoscope import build_linear, build_mp, constant, geometric, indicator
from thermoscope.potential import TrigSeries

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def acceptance_log(request):
    """Append ``(label, ok, detail)``; lines are echoed in the terminal summary."""
    lines = request.config.stash[_LINES]

    def log(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return log


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def doubling():
    return build_linear([2, 2])


@pytest.fixture(scope="session")
def m244():
    return build_linear([2, 4, 4])


@pytest.fixture(scope="session")
def mp1():
    return build_mp(1.0)


@pytest.fixture(scope="session")
def mp_half():
    return build_mp(0.5)


@pytest.fixture
def trig():
    return TrigSeries([0.3, 0.1], [0.2], 0.05)


def binary_entropy(s):
    s = np.asarray(s, dtype=float)
    return -(s * np.log(s) + (1 - s) * np.log1p(-s))


@pytest.fixture
def closed_forms():
    return {
        "doubling_geometric": lambda t: (1 - t) * math.log(2),
        "m244_geometric": lambda t: math.log(2.0 ** -t + 2 * 4.0 ** -t),
        "doubling_indicator": lambda t: math.log(1 + math.exp(t)),
        "binary_entropy": binary_entropy,
    }


__all__ = ["binary_entropy", "constant", "geometric", "indicator"]
