import warnings

import pytest

_LINES = []


class Recorder:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.measured = {}

    def __setitem__(self, key, value):
        self.measured[key] = value

    def finish(self, ok):
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        line = f"{'PASS' if ok else 'FAIL'} [{self.number:2d}] {self.title}: {vals}"
        _LINES.append((self.number, line))
        print(line)


def _fmt(v):
    return f"{v:.4g}" if isinstance(v, float) else str(v)


@pytest.fixture
def criterion():
    """``with criterion(n, title) as rec: ...``; the line reads FAIL if the block raises."""
    class _Ctx:
        def __init__(self, number, title):
            self.rec = Recorder(number, title)

        def __enter__(self):
            return self.rec

        def __exit__(self, exc_type, exc, tb):
            self.rec.finish(exc_type is None)
            return False

    return _Ctx


@pytest.fixture(autouse=True)
def _quiet_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_LINES):
            terminalreporter.write_line(line)
