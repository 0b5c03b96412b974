import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teamform.pugraph import PUGraph, build, edge_probability, verify_properties


class TestEdgeProbability:
    def test_small_n_clamped(self):
        # 2 * sqrt(ln 2 / 2) ~ 1.177
        assert edge_probability(2, 2) == 1.0

    def test_formula(self):
        assert edge_probability(256, 3) == pytest.approx(3 * math.sqrt(math.log(256) / 256))

    def test_complete_graph(self):
        g = build(2, 2)
        assert g.adjacency().all()


class TestProperties:
    def test_complete_bipartite(self):
        rep = verify_properties(build(5, 100))
        assert rep.property1_holds and rep.max_degree == 5

    def test_sparse_graph_fails(self):
        rep = verify_properties(build(64, 1e-6))
        assert not rep.property1_holds and rep.uncovered_pairs > 0

    def test_replayable(self):
        a = build(64, 3, seed=5).adjacency()
        b = PUGraph(64, 3, seed=5).adjacency()
        assert np.array_equal(a, b)
        assert not np.array_equal(a, build(64, 3, seed=6).adjacency())

    def test_lazy_rows_match_eager(self):
        g = PUGraph(32, 3, seed=1)
        row7 = g.utilities(7)
        assert build(32, 3, seed=1).utilities(7) == row7

    def test_fragile_utilities_excluded(self):
        g = build(8, 100)
        assert verify_properties(g, fragile=range(7)).property1_holds
        assert not verify_properties(g, fragile=range(8)).property1_holds

    @pytest.mark.parametrize("seed", range(3))
    def test_large_n_half_fragile(self, seed):
        import random
        rng = random.Random(seed)
        fragile = rng.sample(range(256), 128)
        assert verify_properties(build(256, 3, seed), fragile).property1_holds

    @settings(max_examples=20, deadline=None)
    @given(st.integers(2, 40), st.integers(0, 1000))
    def test_degree_symmetry(self, n, seed):
        g = build(n, 3, seed)
        a = g.adjacency()
        for u in range(n):
            assert g.primaries(u) == tuple(int(p) for p in np.flatnonzero(a[:, u]))
