"""Applications built on Team Formation instances.

* :class:`LeaderElection` - candidates inject one token each; the node that
  forms the team becomes leader.  Termination detection uses TERM tokens
  (``accumulation_based`` or ``term_tokens``); the explicit variant has the
  leader announce itself to every other node.
* :class:`VectorTF` - one TF instance per color, combined pairwise by
  two-color instances until a single super-token stands for a vector team.
* :class:`TriggerCounter` - every team is an alarm.
"""

from __future__ import annotations

import math
import random
import zlib
from collections import Counter
from dataclasses import dataclass, field

from .adversary import stream_seed
from .kernel import Message
from .principal import PLAIN, PairRule, SizeRule
from .protocol import COIN_STREAM, Hooks, TeamFormation

TERM = "TERM"
LEADER = "leader"
NOT_LEADER = "not-leader"
UNDECIDED = "undecided"


class _App(Hooks):
    """Kernel instance for application messages; stub state hooks."""

    name = "app"

    def after_activation(self, vid) -> None:
        pass

    def is_busy(self, v) -> bool:
        return False

    def held_tokens(self) -> int:
        return 0

    def inject(self, v, count, source, bag=None) -> None:
        raise NotImplementedError


# -- leader election ------------------------------------------------------
@dataclass
class LEOutcome:
    n: int
    sigma: int
    candidates: list
    status: dict
    leaders: list
    port_map: dict = field(default_factory=dict)
    announcements: int = 0
    leader_accumulates: bool = False
    woke: list = field(default_factory=list)

    @property
    def T(self) -> int:
        return len(self.candidates)

    @property
    def unique(self) -> bool:
        return len(self.leaders) == 1

    @property
    def in_window(self) -> bool:
        return self.sigma <= self.T < 2 * self.sigma

    def undecided(self) -> list:
        return sorted(v for v in self.woke if self.status.get(v) == UNDECIDED)


class LeaderElection(_App):
    def __init__(self, sim, tf: TeamFormation, sigma: int, c_le: float, *,
                 term_impl: str = "accumulation_based", explicit: bool = False, seed: int = 0):
        self.sim = sim
        self.tf = tf
        self.n = sim.n
        self.sigma = sigma
        self.prob = min(1.0, c_le * math.log(self.n) / self.n)
        self.term_impl = term_impl
        self.explicit = explicit
        self.seed = seed
        self.status: dict[int, str] = {}
        self.candidates: list[int] = []
        self.leaders: list[int] = []
        self.port_map: dict[int, int] = {}
        self.woke: list[int] = []
        self._salt = zlib.crc32(b"le")
        tf.hooks = self
        sim.register(self.name, self)

    def start(self) -> None:
        """Schedule the time-0 start activation at every node."""
        for v in range(self.n):
            self.sim.schedule_call(0, lambda v=v: self._wake(v))

    def _set(self, v: int, status: str) -> None:
        if self.status.get(v) == status or self.status.get(v) == LEADER:
            return
        self.status[v] = status
        self.sim.record("status", v, detail={"inst": self.name, "status": status})

    def _wake(self, v: int) -> None:
        sim = self.sim
        if sim.is_faulty(v):
            return
        sim.record("start", v, detail={"inst": self.name})
        self.woke.append(v)
        rng = random.Random(stream_seed(self.seed, COIN_STREAM, self._salt, v))
        if rng.random() < self.prob:
            self.candidates.append(v)
            self._set(v, UNDECIDED)
            sim.schedule_followup(v, 1, self.tf.name, "app", Counter({PLAIN: 1}))
        else:
            self._set(v, NOT_LEADER)

    # TF hooks ----------------------------------------------------------
    def teams_formed(self, tf, v, teams, fids) -> None:
        x = sum(team.get(TERM, 0) for team in teams)
        if x:
            self._set(v, NOT_LEADER)
            self.sim.schedule_followup(v, x, tf.name, "app", Counter({TERM: x}))
            return
        if self.status.get(v) != LEADER:
            self._set(v, LEADER)
            self.leaders.append(v)
            k = 1 if self.term_impl == "accumulation_based" else self.sigma - 1
            self.sim.schedule_followup(v, k, tf.name, "app", Counter({TERM: k}))
            if self.explicit:
                for w in range(self.n):
                    if w != v:
                        self.sim.send(v, w, Message(self.name, "Leader"))

    def transport_sent(self, tf, v, bag) -> None:
        if self.status.get(v) == UNDECIDED:
            self._set(v, NOT_LEADER)

    def tokens_received(self, tf, v, bag) -> None:
        if bag.get(TERM):
            self._set(v, NOT_LEADER)

    # announcement delivery -----------------------------------------------
    def deliver(self, env) -> None:
        v = env.dst
        self.port_map[v] = env.src
        self._set(v, NOT_LEADER)

    def outcome(self) -> LEOutcome:
        holders = self.tf.holdings()
        acc = bool(self.leaders) and list(holders) == [self.leaders[0]]
        return LEOutcome(self.n, self.sigma, sorted(self.candidates), dict(self.status),
                         list(self.leaders), dict(self.port_map),
                         self.sim.counts.get("Leader", 0), acc, sorted(self.woke))


def make_le(sim, pu, sigma, c_le, *, term_impl="accumulation_based", explicit=False,
            seed=0, trace=None) -> LeaderElection:
    tf = TeamFormation(sim, pu, SizeRule(sigma, order=(PLAIN, TERM)), seed=seed, trace=trace)
    return LeaderElection(sim, tf, sigma, c_le, term_impl=term_impl, explicit=explicit, seed=seed)


# -- vector TF -------------------------------------------------------------
LEFT, RIGHT = "L", "R"


class VectorTF(_App):
    """Teams holding ``sigma_vec[i]`` tokens of every color ``i``.

    Color ``i`` runs in instance ``c<i>``.  Its teams become level-0
    super-tokens.  At level ``l`` colors ``2k`` and ``2k+1`` meet in the
    two-color instance ``d<l>_<k>``; a pair becomes a level-``l+1``
    super-token of color ``k``.  The palette is padded to a power of two and
    a color whose sibling is padding moves up unchanged.
    """

    name = "vtf"

    def __init__(self, sim, pu, sigma_vec, *, seed: int = 0):
        if not sigma_vec:
            raise ValueError("palette must not be empty")
        self.sim = sim
        self.m = len(sigma_vec)
        self.sigma_vec = list(sigma_vec)
        self.levels = max(0, (self.m - 1).bit_length())
        self.width = 1 << self.levels
        self.base = [TeamFormation(sim, pu, SizeRule(s), name=f"c{i}", seed=seed, hooks=self)
                     for i, s in enumerate(self.sigma_vec)]
        self.diff = {}
        for lvl in range(self.levels):
            for k in range(self.width >> (lvl + 1)):
                if not self._padding(lvl, 2 * k + 1):
                    self.diff[(lvl, k)] = TeamFormation(
                        sim, pu, PairRule(LEFT, RIGHT), name=f"d{lvl}_{k}", seed=seed, hooks=self)
        self.teams: list[dict] = []
        self.emitted = Counter()  # (level, color) -> super-tokens created
        sim.register(self.name, self)

    def _padding(self, lvl: int, color: int) -> bool:
        return (color << lvl) >= self.m

    def instances(self):
        return list(self.base) + list(self.diff.values())

    def teams_formed(self, tf, v, teams, fids) -> None:
        name = tf.name
        if name.startswith("c"):
            lvl, color = 0, int(name[1:])
        else:
            a, b = name[1:].split("_")
            lvl, color = int(a) + 1, int(b)
        for _ in teams:
            self._emit(lvl, color, v)

    def _emit(self, lvl: int, color: int, v: int) -> None:
        self.emitted[(lvl, color)] += 1
        if lvl == self.levels:
            self.teams.append({"node": v, "t": self.sim.now})
            self.sim.record("vtf_team", v, detail={"inst": self.name,
                                                   "sizes": list(self.sigma_vec)})
            return
        if self._padding(lvl, color ^ 1):
            self._emit(lvl + 1, color >> 1, v)
            return
        tf = self.diff[(lvl, color >> 1)]
        side = LEFT if color % 2 == 0 else RIGHT
        self.sim.schedule_followup(v, 1, tf.name, "app", Counter({side: 1}))


# -- trigger counting -----------------------------------------------------
class TriggerCounter(_App):
    """Raises an alarm each time ``threshold`` triggers have been gathered."""

    name = "dtc"

    def __init__(self, sim, pu, threshold: int, *, seed: int = 0, trace=None):
        if threshold < 2:
            raise ValueError("threshold must be at least 2")
        self.sim = sim
        self.threshold = threshold
        self.tf = TeamFormation(sim, pu, SizeRule(threshold), seed=seed, hooks=self, trace=trace)
        self.alarms: list[dict] = []
        sim.register(self.name, self)

    def teams_formed(self, tf, v, teams, fids) -> None:
        for _ in teams:
            self.alarms.append({"node": v, "t": self.sim.now})
            self.sim.record("alarm", v, detail={"inst": self.name})
