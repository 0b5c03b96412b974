"""Adversarial policies: fragile sets, message delays, injections and toggles.

A policy never sees node coins: nodes draw from their own streams and the
policy owns a separate ``random.Random`` seeded from the run seed.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .kernel import TICKS_PER_UNIT, AdversaryError, fmt_time, to_ticks

POLICY_KINDS = ("uniform_random", "constant_max_delay", "scripted", "anti_gather_heuristic")

_MIN_UNIFORM = TICKS_PER_UNIT // 10  # uniform delays live in (0.1, 1]


def stream_seed(seed: int, *path: int) -> int:
    """Derive an independent 64-bit seed for the sub-stream named by ``path``."""
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *path])
    a, b = ss.generate_state(2)
    return (int(a) << 32) | int(b)


ADVERSARY_STREAM = 7


def choose_fragile_set(n: int, epsilon: float, rng: random.Random, size: int | None = None):
    """Pick the fragile set; at most ``n - ceil(epsilon * n)`` nodes."""
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    cap = n - math.ceil(epsilon * n)
    size = cap if size is None else size
    if not 0 <= size <= cap:
        raise ValueError(f"fragile set of size {size} exceeds bound {cap}")
    return frozenset(rng.sample(range(n), size))


@dataclass
class Injection:
    time: int  # ticks
    node: object  # int or "any"
    count: int
    inst: str = "tf"
    bag: object = None


def parse_injections(spec, default_inst: str = "tf") -> list[Injection]:
    """Parse ``[{"time": t, "node": v|"any", "count": k, "color": c?}, ...]``.

    A ``color`` field routes the injection to instance ``c<color>``.
    """
    out = []
    for item in spec:
        if isinstance(item, Injection):
            out.append(item)
            continue
        if isinstance(item, (list, tuple)):
            item = dict(zip(("time", "node", "count"), item))
        node = item.get("node", "any")
        if node in ("any", "any-nonfaulty"):
            node = "any"
        else:
            node = int(node)
        count = int(item["count"])
        if count <= 0:
            raise ValueError("injection count must be positive")
        inst = item.get("inst", default_inst)
        if "color" in item:
            inst = f"c{int(item['color'])}"
        out.append(Injection(to_ticks(item["time"]), node, count, inst))
    out.sort(key=lambda j: j.time)
    return out


def random_injections(n: int, total: int, rng: random.Random, span: float = 10.0,
                      bursts: int = 1, gap: float = 0.0, sigma: int | None = None,
                      unit: int = 1):
    """Random schedule of ``total`` tokens over ``bursts`` bursts.

    Burst ``i`` starts at ``i * (span + gap)`` and spreads its tokens over
    ``span`` units, each batch going to an arbitrary non-faulty node.  Burst
    sizes are multiples of ``unit`` except for the last one, which also takes
    the remainder; batches hold at most ``sigma`` tokens when it is given.
    """
    units, rest = divmod(total, unit)
    sizes = [units // bursts * unit] * bursts
    for i in range(units % bursts):
        sizes[i] += unit
    sizes[-1] += rest
    out = []
    for b, size in enumerate(sizes):
        start = Fraction(b) * (Fraction(span) + Fraction(gap))
        left = size
        while left > 0:
            k = rng.randint(1, min(left, sigma or left))
            t = start + Fraction(rng.randrange(int(span * 64) + 1), 64)
            out.append({"time": str(t), "node": "any", "count": k})
            left -= k
    return out


class Policy:
    """Base adversary.  Subclasses override :meth:`delay`."""

    kind = "base"

    def __init__(self, n: int, *, seed: int = 0, epsilon: float = 1.0, injections=(),
                 fragile_size: int | None = None, toggles: bool = True,
                 fragile: frozenset | None = None):
        self.n = n
        self.seed = seed
        self.epsilon = epsilon
        self.rng = random.Random(stream_seed(seed, ADVERSARY_STREAM))
        if fragile is None:
            fragile = choose_fragile_set(n, epsilon, self.rng, fragile_size)
        self._fragile = frozenset(fragile)
        self._injections = parse_injections(injections)
        self.toggles_enabled = toggles
        self.decisions: list | None = None

    # decisions ------------------------------------------------------------
    def fragile_set(self, n: int):
        return self._fragile

    def injections(self, sim) -> list[Injection]:
        out = list(self._injections)
        if self.decisions is not None:
            for j in out:
                self.decisions.append({"type": "inject", "time": fmt_time(j.time),
                                       "node": j.node, "count": j.count, "inst": j.inst})
        return out

    def scripted_toggles(self):
        return ()

    def toggles(self, sim) -> list[int]:
        """Default toggle policy: a fair coin per fragile node."""
        out = [v for v in sorted(self._fragile) if self.rng.getrandbits(1)]
        if self.decisions is not None:
            for v in out:
                self.decisions.append({"type": "toggle", "time": fmt_time(sim.now), "node": v})
        return out

    def pick_node(self, sim) -> int:
        alive = [v for v in range(sim.n) if v not in sim.faulty]
        if not alive:
            raise AdversaryError("no non-faulty node to inject into")
        v = alive[self.rng.randrange(len(alive))]
        if self.decisions is not None:
            self.decisions.append({"type": "pick", "node": v})
        return v

    def delay(self, sim, src: int, dst: int, payload) -> int:
        d = self._delay(sim, src, dst, payload)
        if self.decisions is not None:
            self.decisions.append({"type": "delay", "link": [src, dst], "value": fmt_time(d)})
        return d

    def _delay(self, sim, src, dst, payload) -> int:
        raise NotImplementedError

    # recording ------------------------------------------------------------
    def start_recording(self) -> None:
        self.decisions = [{"type": "fragile", "nodes": sorted(self._fragile)}]

    def script(self) -> dict:
        """The recorded decisions as a scripted-policy document."""
        return {"version": 1, "n": self.n, "decisions": list(self.decisions or [])}


class UniformRandom(Policy):
    """Delays drawn uniformly from (0.1, 1]."""

    kind = "uniform_random"

    def _delay(self, sim, src, dst, payload):
        return self.rng.randint(_MIN_UNIFORM + 1, TICKS_PER_UNIT)


class ConstantMaxDelay(Policy):
    """Every message takes exactly one time unit."""

    kind = "constant_max_delay"

    def _delay(self, sim, src, dst, payload):
        return TICKS_PER_UNIT


class AntiGather(Policy):
    """Stress policy: slow down every message touching a busy primary.

    Messages whose primary endpoint currently holds tokens get the maximum
    delay; the rest are uniform.  Injections aimed at "any" node go to an
    idle node when there is one, so tokens start far apart.
    """

    kind = "anti_gather_heuristic"

    def _delay(self, sim, src, dst, payload):
        n = self.n
        p = src if src < n else dst
        inst = sim.instances.get(payload.inst)
        if inst is not None and inst.is_busy(p):
            return TICKS_PER_UNIT
        return self.rng.randint(_MIN_UNIFORM + 1, TICKS_PER_UNIT)

    def pick_node(self, sim) -> int:
        """Prefer a non-faulty node that holds no tokens in any instance."""
        alive = [v for v in range(sim.n) if v not in sim.faulty]
        if not alive:
            raise AdversaryError("no non-faulty node to inject into")
        idle = [v for v in alive if not any(i.is_busy(v) for i in sim.instances.values())]
        pool = idle or alive
        v = pool[self.rng.randrange(len(pool))]
        if self.decisions is not None:
            self.decisions.append({"type": "pick", "node": v})
        return v

    @staticmethod
    def spread(n: int, total: int, rng: random.Random, span: float = 10.0):
        """Single tokens at random times; :meth:`pick_node` keeps them apart."""
        out = []
        for _ in range(total):
            t = Fraction(rng.randrange(int(span * 64) + 1), 64)
            out.append({"time": str(t), "node": "any", "count": 1})
        return out


class Scripted(Policy):
    """Replays a recorded decision list verbatim."""

    kind = "scripted"

    def __init__(self, n: int, script: dict, **kw):
        decisions = script["decisions"]
        fragile = frozenset()
        for d in decisions:
            if d["type"] == "fragile":
                fragile = frozenset(d["nodes"])
        kw.pop("injections", None)
        kw["fragile"] = fragile
        super().__init__(n, **kw)
        if script.get("n", n) != n:
            raise AdversaryError("script recorded for a different n")
        self._delays = [(tuple(d["link"]), to_ticks(d["value"]))
                        for d in decisions if d["type"] == "delay"]
        self._picks = [d["node"] for d in decisions if d["type"] == "pick"]
        self._toggles = [(to_ticks(d["time"]), d["node"]) for d in decisions if d["type"] == "toggle"]
        self._injections = [Injection(to_ticks(d["time"]),
                                      d["node"] if d["node"] == "any" else int(d["node"]),
                                      int(d["count"]), d.get("inst", "tf"))
                            for d in decisions if d["type"] == "inject"]
        self._di = 0
        self._pi = 0
        self.toggles_enabled = False

    @classmethod
    def load(cls, n: int, path, **kw) -> "Scripted":
        with open(path) as fh:
            return cls(n, json.load(fh), **kw)

    def scripted_toggles(self):
        return list(self._toggles)

    def toggles(self, sim):
        return []

    def pick_node(self, sim):
        if self._pi >= len(self._picks):
            raise AdversaryError("script has no more node picks")
        v = self._picks[self._pi]
        self._pi += 1
        return v

    def _delay(self, sim, src, dst, payload):
        if self._di >= len(self._delays):
            raise AdversaryError("script has no more delay decisions")
        link, d = self._delays[self._di]
        if link != (src, dst):
            raise AdversaryError(f"script out of sync: expected link {link}, got {(src, dst)}")
        self._di += 1
        return d


_BY_KIND = {
    "uniform_random": UniformRandom,
    "constant_max_delay": ConstantMaxDelay,
    "anti_gather_heuristic": AntiGather,
    "anti_gather": AntiGather,
}


def make_policy(kind: str, n: int, **kw) -> Policy:
    """Build a built-in policy by name (``scripted`` needs ``script=``)."""
    if kind == "scripted":
        script = kw.pop("script")
        if not isinstance(script, dict):
            with open(script) as fh:
                script = json.load(fh)
        return Scripted(n, script, **kw)
    try:
        cls = _BY_KIND[kind]
    except KeyError:
        raise ValueError(f"unknown policy {kind!r}") from None
    return cls(n, **kw)
