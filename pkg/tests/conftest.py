import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vocatree.corpus import SEGMENT_IDS  # noqa: E402
from vocatree.features import FeatureTable  # noqa: E402


def make_table(seed=0, n_per=(6, 5, 4, 4), d=12, shift=1.5, informative=(3, 19), missing=()):
    """Small random feature table: (male H, male D, female H, female D) counts."""
    rng = np.random.default_rng(seed)
    subjects = []
    groups = [("male", "healthy"), ("male", "depressed"), ("female", "healthy"), ("female", "depressed")]
    k = 0
    for (g, lab), n in zip(groups, n_per):
        for _ in range(n):
            k += 1
            subjects.append((f"S{k:03d}", g, lab))
    vectors = {}
    for sid, g, lab in subjects:
        for seg in SEGMENT_IDS:
            if (sid, seg) in missing:
                continue
            v = rng.normal(size=d)
            if seg in informative and lab == "depressed":
                v[:3] += shift
            vectors[(sid, seg)] = v
    return FeatureTable(vectors, tuple(subjects), tuple(f"f{i}" for i in range(d)))


@pytest.fixture
def small_table():
    return make_table()


# ---------------------------------------------------------------------------
# one PASS/FAIL line per acceptance criterion

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        number, title = mark.args
        status = "PASS" if rep.passed else "FAIL"
        _CRITERIA[number] = (status, title)
        line = f"{status} criterion {number}: {title}"
        tr = item.config.pluginmanager.get_plugin("terminalreporter")
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title = _CRITERIA[number]
        terminalreporter.write_line(f"{status} criterion {number}: {title}")
