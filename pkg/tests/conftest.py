import numpy as np
import pytest

from floqmap.model import qubit_coupler_qubit_system, qubit_qubit_system
from floqmap.statics import exact_dressed_spectrum


@pytest.fixture(scope="session")
def qq():
    return qubit_qubit_system()


@pytest.fixture(scope="session")
def qcq():
    return qubit_coupler_qubit_system()


@pytest.fixture(scope="session")
def qq_spectrum(qq):
    return exact_dressed_spectrum(qq)


@pytest.fixture(scope="session")
def qcq_spectrum(qcq):
    return exact_dressed_spectrum(qcq)


@pytest.fixture
def rng():
    return np.random.default_rng(20241016)


@pytest.fixture
def verdict(request):
    """Record one acceptance line; the lines are repeated in the terminal summary."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(criterion: int, ok: bool, detail: str) -> bool:
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        lines.append(line)
        return ok

    return record


_VERDICTS = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines):
            terminalreporter.write_line(line)
