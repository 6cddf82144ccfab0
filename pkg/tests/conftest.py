import pytest

_lines = {}


class Criterion:
    def __init__(self, number, title):
        self.number, self.title, self.recorded = number, title, False

    def check(self, ok, detail=""):
        _lines[self.number] = f"{'PASS' if ok else 'FAIL'} criterion {self.number}: {self.title} ({detail})"
        self.recorded = True
        print(_lines[self.number])
        assert ok, detail


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    c = Criterion(*marker.args)
    yield c
    if not c.recorded:
        _lines[c.number] = f"FAIL criterion {c.number}: {c.title} (raised before completing)"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if _lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_lines):
            terminalreporter.write_line(_lines[n])
