import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ghostsim.kernel import Simulator  # noqa: E402
from ghostsim.oae import OaeFabric, OaeLink, TokenLedger  # noqa: E402
from ghostsim.topology import Graph, TopologyPair  # noqa: E402

_RESULTS: dict[int, tuple[bool, str]] = {}


def link_topology(n_links: int = 1, observers=("obs",)) -> TopologyPair:
    g = Graph()
    for n in ["A"] + [f"B{i}" for i in range(n_links)]:
        g.add_node(n)
    for i in range(n_links):
        g.add_link(f"L{i}", "A", f"B{i}")
    topo = TopologyPair(g)
    for o in observers:
        topo.add_observer(o)
    return topo


def token_once(direction, t1, t2, delay=40, slice_time=8):
    sim = Simulator(0)
    link = OaeLink("AB", "A", "B", delay, slice_time)
    fab = OaeFabric(sim, [link])
    ledger = TokenLedger(fab)
    ledger.mint(0, "A")
    sim.schedule(t1, fab.fail, "AB", direction)
    if t2 is not None:
        sim.schedule(t2, fab.repair, "AB", direction)
    sim.schedule(100, ledger.transfer, 0, "B")
    sim.run_until(1000)
    return ledger


@pytest.fixture
def sim():
    return Simulator(0)


@pytest.fixture
def topo():
    return link_topology()


@pytest.fixture
def criterion():
    """Record an acceptance criterion outcome; printed as one line per criterion."""
    def record(number: int, ok: bool, detail: str) -> None:
        _RESULTS[number] = (ok, detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail
    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        ok, detail = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} - {detail}")
