"""Monte-Carlo harness for the central-entity merging process.

A central entity (CE) sends one message per round from a chosen non-trivial
influence component through a port it has not used yet.  A round *hits* when
the port leads into another non-trivial component.  Two models are offered:

* ``bernoulli``: every one of the ``2f`` rounds hits independently with
  probability ``p = (3f + 1.5 sigma) / n``;
* ``mechanistic``: ports follow uniformly random per-node permutations,
  sampled lazily, and the CE picks components with a strategy hook.

With the merge convention, every round grows the total size of non-trivial
components by exactly one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MODES = ("bernoulli", "mechanistic")
CSV_FIELDS = ("n", "sigma", "f", "p", "mode", "trials", "p_no_hit_emp", "p_no_hit_exact",
              "tail_emp", "tail_bound")


class RegimeError(ValueError):
    """Inputs outside the range where the process is defined."""


@dataclass(frozen=True)
class CEParams:
    n: int
    sigma: int
    f: int

    @property
    def p(self) -> float:
        return (3 * self.f + 1.5 * self.sigma) / self.n

    @property
    def rounds(self) -> int:
        return 2 * self.f

    @property
    def mu(self) -> float:
        return self.rounds * self.p

    def validate(self) -> "CEParams":
        n, s, f = self.n, self.sigma, self.f
        if not 2 <= s <= n / 2:
            raise RegimeError(f"sigma={s} outside [2, n/2]")
        if f < 0:
            raise RegimeError("f must be non-negative")
        if 3 * (n - 2 * f) < 2 * n:
            raise RegimeError("need n - 2f >= 2n/3")
        if 3 * (2 * f + s) > 2 * n:
            raise RegimeError("need 2f + sigma <= 2n/3")
        if not 0 < self.p < 1:
            raise RegimeError(f"p={self.p} outside (0, 1)")
        return self

    def in_tail_regime(self) -> bool:
        return self.mu <= self.sigma / 8


def no_hit_probability(params: CEParams) -> float:
    """Exact chance that none of the ``2f`` rounds hits: ``(1 - p)^(2f)``."""
    params.validate()
    return (1 - params.p) ** params.rounds


def chernoff_bound(params: CEParams) -> float:
    return math.exp(-params.sigma / 24)


def largest_first(sizes: dict) -> int:
    """Default CE strategy: the largest non-trivial component, lowest id on ties."""
    return min(sizes, key=lambda c: (-sizes[c], c))


@dataclass
class CEResult:
    params: CEParams
    mode: str
    trials: int
    hits: np.ndarray  # H per trial
    rounds_played: int

    def histogram(self) -> np.ndarray:
        return np.bincount(self.hits, minlength=self.params.rounds + 1)

    @property
    def p_no_hit(self) -> float:
        return float(np.mean(self.hits == 0))

    def tail(self, j: int) -> float:
        return float(np.mean(self.hits >= j))

    @property
    def hit_rate(self) -> float:
        return float(self.hits.sum() / self.rounds_played) if self.rounds_played else 0.0


def simulate_ce(params: CEParams, trials: int, rng: np.random.Generator,
                mode: str = "bernoulli", strategy=largest_first) -> CEResult:
    """Sample ``H`` (number of hits) over ``trials`` independent runs."""
    params.validate()
    if trials < 1:
        raise ValueError("need at least one trial")
    if mode == "bernoulli":
        hits = rng.binomial(params.rounds, params.p, size=trials).astype(np.int64)
        return CEResult(params, mode, trials, hits, params.rounds * trials)
    if mode != "mechanistic":
        raise ValueError(f"unknown mode {mode!r}")
    hits = np.fromiter((_mechanistic_trial(params, rng, strategy) for _ in range(trials)),
                       dtype=np.int64, count=trials)
    return CEResult(params, mode, trials, hits, params.rounds * trials)


def _mechanistic_trial(params: CEParams, rng: np.random.Generator, strategy) -> int:
    n, sigma = params.n, params.sigma
    # tokens start on sigma distinct nodes; every other node is trivial
    comp = {}  # node -> component id, for nodes in non-trivial components
    members = {}
    for v in range(sigma):
        comp[v] = v
        members[v] = [v]
    known = {}  # node -> set of exposed neighbours
    next_trivial = sigma
    h = 0
    for _ in range(params.rounds):
        sizes = {c: len(m) for c, m in members.items()}
        c = strategy(sizes)
        mem = members[c]
        inside = set(mem)
        # a random node of C with a free external port; the port leads
        # uniformly to a node it has not been linked to, internal ones are skipped
        while True:
            x = mem[int(rng.integers(len(mem)))]
            seen = known.setdefault(x, set())
            y = int(rng.integers(n - 1))
            if y >= x:
                y += 1
            if y in seen or y in inside:
                continue
            break
        seen.add(y)
        known.setdefault(y, set()).add(x)
        other = comp.get(y)
        if other is not None:
            h += 1
            members[c].extend(members.pop(other))
            for v in members[c]:
                comp[v] = c
            # convention: also absorb one trivial node so the total grows by one
            while next_trivial in comp:
                next_trivial += 1
            t = next_trivial
        else:
            t = y
        comp[t] = c
        members[c].append(t)
    return h


def tail_bound_check(params: CEParams, trials: int, rng: np.random.Generator,
                     mode: str = "bernoulli") -> dict:
    """Empirical ``P[H >= sigma - 1]`` next to the bound ``exp(-sigma/24)``."""
    params.validate()
    if not params.in_tail_regime():
        raise RegimeError(f"mu={params.mu:.3f} exceeds sigma/8={params.sigma / 8:.3f}")
    res = simulate_ce(params, trials, rng, mode)
    emp = res.tail(params.sigma - 1)
    bound = chernoff_bound(params)
    return {"tail_emp": emp, "tail_bound": bound, "holds": emp <= bound, "mu": params.mu}


def csv_row(res: CEResult) -> dict:
    prm = res.params
    row = {"n": prm.n, "sigma": prm.sigma, "f": prm.f, "p": prm.p, "mode": res.mode,
           "trials": res.trials, "p_no_hit_emp": res.p_no_hit,
           "p_no_hit_exact": no_hit_probability(prm), "tail_emp": "", "tail_bound": ""}
    if prm.in_tail_regime():
        row["tail_emp"] = res.tail(prm.sigma - 1)
        row["tail_bound"] = chernoff_bound(prm)
    return row
