"""Random bipartite primary-utility overlay.

Each primary ``p`` links to each utility ``u`` independently with probability
``min(1, c * sqrt(ln n / n))``.  The draws come from ``p``'s own factory
stream, so ``U(p)`` is fixed at first use and reproducible from the seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

FACTORY_STREAM = 11

DEFAULT_C = 3.0


def edge_probability(n: int, c: float) -> float:
    if n < 2:
        raise ValueError("n must be at least 2")
    return min(1.0, c * math.sqrt(math.log(n) / n))


class PUGraph:
    """Lazily generated overlay; ``utilities(p)`` draws ``U(p)`` on first call."""

    def __init__(self, n: int, c: float = DEFAULT_C, seed: int = 0):
        if n < 2:
            raise ValueError("n must be at least 2")
        if c <= 0:
            raise ValueError("c must be positive")
        self.n = n
        self.c = c
        self.seed = seed
        self.q = edge_probability(n, c)
        self._rows: dict[int, tuple[int, ...]] = {}

    def factory_rng(self, p: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, FACTORY_STREAM, p]))

    def utilities(self, p: int) -> tuple[int, ...]:
        row = self._rows.get(p)
        if row is None:
            if self.q >= 1.0:
                row = tuple(range(self.n))
            else:
                draws = self.factory_rng(p).random(self.n)
                row = tuple(int(u) for u in np.flatnonzero(draws < self.q))
            self._rows[p] = row
        return row

    def adjacency(self) -> np.ndarray:
        """Full ``n x n`` boolean matrix, rows primaries and columns utilities."""
        a = np.zeros((self.n, self.n), dtype=bool)
        for p in range(self.n):
            a[p, list(self.utilities(p))] = True
        return a

    def primaries(self, u: int) -> tuple[int, ...]:
        return tuple(int(p) for p in np.flatnonzero(self.adjacency()[:, u]))

    def dump_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for p in range(self.n):
                fh.write(json.dumps({"p": p, "U": list(self.utilities(p))}) + "\n")


def build(n: int, c: float = DEFAULT_C, seed: int = 0) -> PUGraph:
    """Eagerly generate every ``U(p)``."""
    g = PUGraph(n, c, seed)
    for p in range(n):
        g.utilities(p)
    return g


@dataclass
class PUReport:
    property1_holds: bool
    max_degree: int
    degree_bound_constant: float
    degree_ratio: float  # max_degree / sqrt(n ln n)
    uncovered_pairs: int

    @property
    def degree_within_bound(self) -> bool:
        return self.degree_ratio <= self.degree_bound_constant


def verify_properties(g: PUGraph, fragile=(), degree_constant: float = 2 * DEFAULT_C) -> PUReport:
    """Check both overlay properties exhaustively.

    Property 1: every two primaries (including a primary with itself) share a
    non-fragile utility.  Property 2: both sides have degree at most
    ``degree_constant * sqrt(n ln n)``; it is reported, not enforced.
    """
    a = g.adjacency()
    n = g.n
    keep = np.ones(n, dtype=bool)
    keep[list(fragile)] = False
    sub = a[:, keep].astype(np.float32)
    common = sub @ sub.T
    uncovered = int(np.count_nonzero(np.triu(common == 0)))
    max_degree = int(max(a.sum(axis=1).max(), a.sum(axis=0).max()))
    ratio = max_degree / math.sqrt(n * math.log(n))
    return PUReport(uncovered == 0, max_degree, degree_constant, ratio, uncovered)
