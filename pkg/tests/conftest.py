from __future__ import annotations

import numpy as np
import pytest

from a11yreviews.keywords import KeywordSets


@pytest.fixture
def small_keywords() -> KeywordSets:
    return KeywordSets(("screen reader", "font size"), ("api", "database"))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


_VERDICTS: list[str] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.skipped):
        status = "PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL"
        detail = dict(item.user_properties).get("detail", "")
        if rep.skipped and not detail:
            detail = str(rep.longrepr[-1]) if isinstance(rep.longrepr, tuple) else ""
        _VERDICTS.append(f"[{status}] criterion {marker.args[0]:>2}: {marker.kwargs.get('title', item.name)}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
