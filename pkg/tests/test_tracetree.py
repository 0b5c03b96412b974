import pytest

from teamform.adversary import make_policy
from teamform.config import RunConfig
from teamform.kernel import ProtocolError, Simulator
from teamform.runner import run
from teamform.tracetree import TraceTree


@pytest.fixture
def tree():
    sim = Simulator(4, make_policy("uniform_random", 4, seed=0))
    return TraceTree(sim)


class TestCounters:
    def test_first_send(self, tree):
        tree.inject(0, 1)
        assert tree.record_send(0, 2, 1) == 0
        assert tree.nodes[0].outgoing[2] == 1

    def test_batch_after_stamp(self, tree):
        tree.nodes[0].outgoing[2] = 5
        tree.inject(0, 3)
        assert tree.record_send(0, 2, 3) == 5
        assert tree.nodes[0].outgoing[2] == 8
        assert sorted(c for (_, c) in tree.nodes[0].sent) == [5, 6, 7]

    def test_ports_independent(self, tree):
        tree.inject(0, 2)
        tree.record_send(0, 1, 1)
        assert tree.record_send(0, 2, 1) == 0

    def test_receive(self, tree):
        tree.nodes[1].incoming[0] = 4
        recs = tree.record_receive(1, 0, 2, 4)
        assert [r.in_counter for r in recs] == [4, 5]
        assert tree.nodes[1].incoming[0] == 6

    def test_stamp_mismatch(self, tree):
        with pytest.raises(ProtocolError):
            tree.record_receive(1, 0, 1, 3)

    def test_send_more_than_held(self, tree):
        tree.inject(0, 1)
        with pytest.raises(ProtocolError):
            tree.record_send(0, 1, 2)


class TestReports:
    def test_local_formation(self, tree):
        tree.inject(0, 2)
        tree.form(0, 2, fid=1)
        assert tree.callbacks == [(0, 1, 2)]
        assert tree.reports_sent == 0

    def _two_hop(self, tree, k):
        tree.inject(0, k)
        s = tree.record_send(0, 1, k)
        relay = tree.record_receive(1, 0, k, s, hold=False)
        s = tree.record_send(1, 2, k, relay)
        tree.record_receive(2, 1, k, s)
        tree.form(2, k, fid=7)
        tree.sim.run()

    def test_two_hop_path(self, tree):
        self._two_hop(tree, 1)
        assert tree.reports_sent == 2
        assert tree.callbacks == [(0, 7, 1)]
        hops = [(r[3], r[4]) for r in tree.sim.log.of_kind("send")]
        assert hops == [(2, 1), (1, 0)]
        assert tree.live_records() == 0

    def test_batched_per_hop(self, tree):
        self._two_hop(tree, 2)
        assert tree.reports_sent == 2
        assert tree.callbacks == [(0, 7, 2)]


@pytest.mark.parametrize("seed", range(4))
def test_every_token_reported_back(seed):
    cfg = RunConfig(n=16, sigma=3, injections={"random": {"total": 9, "span": 4}},
                    trace=True, seed=seed)
    res = run(cfg)
    assert res.ok, res.violations[:3]
    tree = res.instances["trace"]
    teams = len(res.instances["tf"].teams)
    assert sum(c for _, _, c in tree.callbacks) == 3 * teams
    # every origin callback lands where its tokens were injected
    injected = {r[3] for r in res.log.of_kind("inject") if r[7]["src"] == "adv"}
    assert {node for node, _, _ in tree.callbacks} <= injected
