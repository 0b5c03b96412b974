import random
from fractions import Fraction

import pytest

from teamform.adversary import (AntiGather, choose_fragile_set, make_policy, parse_injections,
                                random_injections, stream_seed)
from teamform.kernel import TICKS_PER_UNIT, Message, Simulator

U = TICKS_PER_UNIT


class TestFragileSet:
    def test_full_epsilon_is_empty(self):
        assert choose_fragile_set(10, 1.0, random.Random(0)) == frozenset()

    def test_bound(self):
        assert len(choose_fragile_set(10, 0.3, random.Random(0))) == 7

    def test_oversized_rejected(self):
        with pytest.raises(ValueError):
            choose_fragile_set(10, 0.3, random.Random(0), size=8)

    def test_replayable(self):
        a = make_policy("uniform_random", 100, seed=42, epsilon=0.1).fragile_set(100)
        b = make_policy("uniform_random", 100, seed=42, epsilon=0.1).fragile_set(100)
        assert a == b and len(a) == 90

    def test_different_seeds_differ(self):
        a = make_policy("uniform_random", 100, seed=1, epsilon=0.5).fragile_set(100)
        b = make_policy("uniform_random", 100, seed=2, epsilon=0.5).fragile_set(100)
        assert a != b


class TestDelays:
    def test_uniform_range(self):
        pol = make_policy("uniform_random", 4, seed=3)
        sim = Simulator(4, pol)
        ds = [pol.delay(sim, 0, 5, Message("tf", "Busy")) for _ in range(2000)]
        assert min(ds) > U // 10 and max(ds) <= U

    def test_constant_max(self):
        pol = make_policy("constant_max_delay", 4)
        sim = Simulator(4, pol)
        assert pol.delay(sim, 0, 5, Message("tf", "Busy")) == U

    def test_anti_gather_slows_busy(self):
        pol = make_policy("anti_gather", 4, seed=0)
        sim = Simulator(4, pol)

        class Busy:
            def is_busy(self, v):
                return v == 0

        sim.instances["tf"] = Busy()
        assert all(pol.delay(sim, 0, 5, Message("tf", "x")) == U for _ in range(20))
        assert any(pol.delay(sim, 1, 5, Message("tf", "x")) < U for _ in range(20))

    def test_unknown_policy(self):
        with pytest.raises(ValueError):
            make_policy("nope", 4)


class TestInjections:
    def test_parse(self):
        inj = parse_injections([{"time": "3/2", "node": 2, "count": 4},
                                {"time": 0, "node": "any", "count": 1, "color": 1}])
        # sorted by time
        assert inj[1].time == 3 * U // 2 and inj[1].node == 2 and inj[1].count == 4
        assert inj[0].node == "any" and inj[0].inst == "c1"

    @pytest.mark.parametrize("total,unit", [(9, 3), (10, 3), (1, 1), (7, 2), (24, 8)])
    def test_random_injections_burst_sizes(self, total, unit):
        spec = random_injections(16, total, random.Random(1), span=5, bursts=3, gap=30, unit=unit)
        per_burst = [0, 0, 0]
        for d in spec:
            per_burst[int(Fraction(d["time"]) // 35)] += d["count"]
        assert sum(per_burst) == total
        assert all(c % unit == 0 for c in per_burst[:-1])

    def test_batches_capped_by_sigma(self):
        spec = random_injections(16, 40, random.Random(2), sigma=3)
        assert max(d["count"] for d in spec) <= 3

    def test_spread_single_tokens(self):
        spec = AntiGather.spread(8, 5, random.Random(0), span=2)
        assert [d["count"] for d in spec] == [1] * 5
        assert all(0 <= Fraction(d["time"]) <= 2 for d in spec)

    def test_anti_gather_picks_idle_nodes(self):
        pol = make_policy("anti_gather", 4, seed=0)
        sim = Simulator(4, pol)

        class Busy:
            def is_busy(self, v):
                return v != 3

        sim.instances["tf"] = Busy()
        assert {pol.pick_node(sim) for _ in range(10)} == {3}


class TestScripted:
    def test_record_then_replay(self):
        pol = make_policy("uniform_random", 4, seed=9, injections=[{"time": 0, "node": 1, "count": 2}])
        pol.start_recording()
        sim = Simulator(4, pol)
        pol.injections(sim)
        d1 = [pol.delay(sim, 0, 5, None) for _ in range(3)]
        script = pol.script()
        rep = make_policy("scripted", 4, script=script)
        sim2 = Simulator(4, rep)
        assert [(j.node, j.count) for j in rep.injections(sim2)] == [(1, 2)]
        assert [rep.delay(sim2, 0, 5, None) for _ in range(3)] == d1

    def test_out_of_sync(self):
        pol = make_policy("uniform_random", 4, seed=9)
        pol.start_recording()
        sim = Simulator(4, pol)
        pol.delay(sim, 0, 5, None)
        rep = make_policy("scripted", 4, script=pol.script())
        with pytest.raises(Exception):
            rep.delay(Simulator(4, rep), 1, 5, None)


def test_stream_seed_independent_paths():
    assert stream_seed(1, 7) != stream_seed(1, 11)
    assert stream_seed(1, 7) == stream_seed(1, 7)
