import numpy as np
import pytest

from netelastic.graph import Edge, NodeData, ProblemGraph


def random_graph(rng, n, p, m=3, extra_edges=None, weight_range=(0.5, 2.0)):
    """Connected random graph: a random spanning tree plus extra edges."""
    nodes = [NodeData(i, rng.standard_normal((m, p)), rng.standard_normal(m), rng.uniform(0, 50))
             for i in range(n)]
    pairs = set()
    order = rng.permutation(n)
    for k in range(1, n):
        a, b = order[k], order[rng.integers(k)]
        pairs.add((min(a, b), max(a, b)))
    extra = n if extra_edges is None else extra_edges
    for _ in range(extra):
        a, b = rng.choice(n, 2, replace=False)
        pairs.add((min(a, b), max(a, b)))
    edges = [Edge(int(a), int(b), float(rng.uniform(*weight_range))) for a, b in sorted(pairs)]
    return ProblemGraph(nodes, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_criterion_results = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rpartition("::")[2]
    if "test_acceptance.py" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        crit = int(name.split("_")[2])
        _criterion_results.setdefault(crit, []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _criterion_results:
        return
    import sys

    titles = getattr(sys.modules.get("test_acceptance"), "CRITERIA", {})
    terminalreporter.section("acceptance criteria")
    for crit in sorted(set(titles) | set(_criterion_results)):
        results = _criterion_results.get(crit)
        if results is None:
            status, detail = "NOT RUN", ""
        else:
            status = "PASS" if all(results) else "FAIL"
            detail = f" ({sum(results)}/{len(results)} checks)"
        terminalreporter.write_line(f"criterion {crit}: {status}{detail} - {titles.get(crit, '')}")
