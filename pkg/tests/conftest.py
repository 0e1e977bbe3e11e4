import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from anchorgt import graph as G  # noqa: E402

_criteria: dict[int, list[str]] = {}


def small_corpus(count=40, max_n=24, seed=2024):
    """Seeded random graphs (sparse and dense ER) plus the named families."""
    rng = np.random.default_rng(seed)
    out = [G.single(), G.path(3), G.path(5), G.cycle(6), G.star(6), G.complete(5), G.grid(3, 3),
           G.disjoint_union(G.cycle(3), G.cycle(3))]
    for i in range(count):
        n = int(rng.integers(1, max_n + 1))
        p = float(rng.choice([0.05, 0.15, 0.3, 0.6]))
        out.append(G.erdos_renyi(n, p, seed + i))
    return out


@pytest.fixture(scope="session")
def corpus():
    return small_corpus()


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for key, value in report.user_properties:
        if key == "criterion":
            _criteria.setdefault(value, []).append(report.outcome)


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", m.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        outcomes = _criteria[num]
        status = "PASS" if all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {status} ({len(outcomes)} check(s))")
