import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

_CRITERIA = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.call_report = rep


@pytest.fixture
def criterion(request):
    """Record a one-line summary for an acceptance criterion.

    Usage: ``criterion(3, "barrier residual >= -1e-12", detail="...")``; the
    verdict comes from the test outcome.
    """
    info = {}

    def record(number, title, detail=""):
        info.update(number=number, title=title, detail=detail)

    def set_detail(detail):
        info["detail"] = detail

    record.detail = set_detail
    yield record
    if info:
        rep = getattr(request.node, "call_report", None)
        ok = rep is not None and rep.passed
        _CRITERIA.append((info["number"], "PASS" if ok else "FAIL", info["title"], info["detail"]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, verdict, title, detail in sorted(_CRITERIA):
        line = f"criterion {number:2d}: {verdict}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
