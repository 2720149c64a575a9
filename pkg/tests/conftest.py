from pathlib import Path

import numpy as np
import pytest

from graphscatter.graph import LeadConfig, complete_graph, grid9, path_graph
from graphscatter.solver import ScatteringProblem

DATA = Path(__file__).resolve().parents[1] / "src" / "graphscatter" / "data"


def k3_transmission(k):
    """Closed form |t|^2 for K3 with leads on two vertices.

    Obtained by symbolic elimination of the 5x5 system with z = exp(i alpha):
    t = z^3 (z^2 + z + 1) / (2z + 1), hence |t|^2 = (3 - k^2)^2 / (9 - 2 k^2).
    """
    k = np.asarray(k, dtype=float)
    return (3 - k * k) ** 2 / (9 - 2 * k * k)


# exact integral of k3_transmission over [0, 2] (sympy)
K3_TOTAL_TRANSMISSION = 1.1015045268770124


@pytest.fixture
def k3():
    return ScatteringProblem(complete_graph(3), LeadConfig((3, 1)))


@pytest.fixture
def p2():
    return ScatteringProblem(path_graph(2), LeadConfig((1, 2)))


@pytest.fixture
def grid_problem():
    return ScatteringProblem(grid9(), LeadConfig((1, 8)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def data_dir():
    return DATA


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion reported in the summary")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    number, title = mark.args
    detail = "; ".join(str(v) for k, v in rep.user_properties if k == "detail")
    if rep.failed and call.excinfo is not None:
        detail = (detail + "; " if detail else "") + call.excinfo.exconly().splitlines()[0][:160]
    item.config._criteria[number] = (title, rep.passed, detail)


def pytest_terminal_summary(terminalreporter, config):
    criteria = getattr(config, "_criteria", {})
    if not criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(criteria):
        title, passed, detail = criteria[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number} {status}  {title}: {detail}")
