import numpy as np
import pytest

from softfail import physics


@pytest.fixture
def params():
    return physics.PhysicalParams()


@pytest.fixture
def geom():
    return physics.paper_lightpath()


@pytest.fixture
def state(params, geom):
    return physics.nominal_state(params, geom, 22.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report: one line per criterion in the terminal summary
_ACCEPTANCE: dict[int, str] = {}


class _Criterion:
    def __init__(self, number: int, title: str):
        self.number, self.title, self.details = number, title, []

    def note(self, text: str) -> None:
        self.details.append(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        detail = "; ".join(self.details)
        if exc_type is not None:
            detail = f"{detail}; {exc_type.__name__}: {exc}".lstrip("; ")
        line = f"criterion {self.number} [{status}] {self.title}" + (f" :: {detail}" if detail else "")
        _ACCEPTANCE[self.number] = line
        print(line)
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
