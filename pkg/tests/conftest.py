import numpy as np
import pytest

from mpdfit import _fallback, mpd, pwp

try:
    from mpdfit import _kernels
except ImportError:
    _kernels = None

BACKENDS = {"numpy": _fallback, "compiled": _kernels}


@pytest.fixture(params=["numpy", "compiled"])
def backend(request, monkeypatch):
    """Run the test once per kernel backend."""
    module = BACKENDS[request.param]
    if module is None:
        pytest.skip("compiled kernels not built")
    monkeypatch.setattr(pwp, "kernels", module)
    monkeypatch.setattr(mpd, "kernels", module)
    return module


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line; printed in the terminal summary."""

    def _report(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
