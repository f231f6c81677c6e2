import numpy as np
import pytest
import torch

from mcgan.config import NetConfig
from mcgan.synthetic import synthetic_corpus

torch.set_num_threads(1)

# smallest networks that still exercise every layer kind
TINY = NetConfig(g_widths=(4, 8, 8), g_blocks=(1, 0), d_widths=(4, 8))


@pytest.fixture(scope="session")
def corpus():
    return synthetic_corpus(6, seed=123)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def small_corpus(corpus):
    """The corpus box-downsampled to 16x16 for fast training loops."""
    n = corpus.shape[0]
    return corpus.reshape(n, 26, 16, 4, 16, 4).mean(axis=(3, 5))


# -- acceptance report: one line per criterion at the end of the run ----------------------

_CRITERIA: dict[int, tuple[str, list[str], list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    _, outcomes, details = _CRITERIA.setdefault(number, (title, [], []))
    if report.when == "call" or report.outcome != "passed":
        outcomes.append(report.outcome)
    if report.when == "call":
        details.extend(f"{k}={v}" for k, v in report.user_properties)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcomes, details = _CRITERIA[number]
        ok = outcomes and all(o == "passed" for o in outcomes)
        extra = f"  [{', '.join(details)}]" if details else ""
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}{extra}")
