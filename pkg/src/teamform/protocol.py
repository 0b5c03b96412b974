"""One Team Formation instance wired to the kernel.

The instance owns the per-node state objects of both layers (created on
first use), routes deliveries and injections to them, and emits the
instrumentation records the checkers rely on.
"""

from __future__ import annotations

import random
import zlib
from collections import Counter

from .adversary import stream_seed
from .channel import RELAYED, Mediator
from .kernel import Message, ProtocolError, Simulator
from .principal import PLAIN, TRANSPORT, PairRule, Principal, SizeRule
from .pugraph import PUGraph

COIN_STREAM = 5


class Hooks:
    """Application callbacks; the defaults do nothing."""

    def teams_formed(self, tf, v, teams, fids) -> None:
        pass

    def transport_sent(self, tf, v, bag) -> None:
        pass

    def tokens_received(self, tf, v, bag) -> None:
        pass


class TeamFormation:
    """A TF instance.

    ``rule`` decides when teams form and which primaries a mediator pairs;
    ``trace`` (a :class:`~teamform.tracetree.TraceTree`) is optional.
    """

    def __init__(self, sim: Simulator, pu: PUGraph, rule=None, *, name: str = "tf",
                 seed: int = 0, trace=None, hooks: Hooks | None = None):
        self.sim = sim
        self.n = sim.n
        self.pu = pu
        self.rule = rule if rule is not None else SizeRule(2)
        self.name = name
        self.seed = seed
        self.trace = trace
        self.hooks = hooks or Hooks()
        self.principals: dict[int, Principal] = {}
        self.mediators: dict[int, Mediator] = {}
        self.teams: list[dict] = []
        self.phase_starts: dict[int, int] = {}
        self._snap: dict[int, tuple] = {}
        self._relay_records = None
        self._salt = zlib.crc32(name.encode())
        self._verbose = sim.verbose
        sim.register(name, self)

    # state access -----------------------------------------------------------
    def principal(self, v: int) -> Principal:
        pr = self.principals.get(v)
        if pr is None:
            rng = random.Random(stream_seed(self.seed, COIN_STREAM, self._salt, v))
            pr = Principal(self, v, self.pu.utilities(v), rng)
            self.principals[v] = pr
        return pr

    def mediator(self, u: int) -> Mediator:
        m = self.mediators.get(u)
        if m is None:
            m = Mediator(self, u)
            self.mediators[u] = m
        return m

    def is_busy(self, v: int) -> bool:
        pr = self.principals.get(v)
        return pr is not None and pr.tok > 0

    def held_tokens(self) -> int:
        return sum(p.tok + p.pending for p in self.principals.values())

    def holdings(self) -> dict[int, int]:
        return {v: p.tok + p.pending for v, p in self.principals.items() if p.tok + p.pending}

    # kernel entry points ------------------------------------------------------
    def deliver(self, env) -> None:
        n = self.n
        msg = env.payload
        if self.trace is not None and msg.kind == RELAYED and msg.inner.kind == TRANSPORT:
            hold = env.dst < n
            recs = self.trace.record_receive(env.dst % n, env.src % n, msg.inner.k,
                                             msg.meta["stamp"], hold=hold)
            if not hold:
                self._relay_records = recs
        if env.dst < n:
            self.principal(env.dst).channel.receive(env.src - n, msg)
        else:
            self.mediator(env.dst - n).receive(env.src, msg)

    def inject(self, v: int, count: int, source: str, bag=None) -> None:
        if bag is None:
            bag = Counter({PLAIN: count})
        if self.trace is not None and source not in ("fake", "deferred"):
            self.trace.inject(v, count)
        self.principal(v).inject(Counter(bag))

    # sends ------------------------------------------------------------------
    def send_to_utility(self, v: int, u: int, msg: Message) -> None:
        if self.trace is not None and msg.kind == RELAYED and msg.inner.kind == TRANSPORT:
            msg.meta = {"stamp": self.trace.record_send(v, u, msg.inner.k)}
        self.sim.send(v, self.n + u, msg)

    def send_to_primary(self, u: int, p: int, msg: Message) -> None:
        if self.trace is not None and msg.kind == RELAYED and msg.inner.kind == TRANSPORT:
            recs = self._relay_records
            self._relay_records = None
            msg.meta = {"stamp": self.trace.record_send(u, p, msg.inner.k, recs)}
        self.sim.send(self.n + u, p, msg)

    def relay_meta(self, pr: Principal, u: int, kind: str):
        if not self._verbose:
            return None
        return {"ch": pr.channel.meds.get(u), "mid": self.sim.next_id()}

    # notifications from the layers -------------------------------------------
    def screened(self, node: int, peer: int, inner: Message) -> None:
        k = inner.k if inner.kind == TRANSPORT else 0
        if k:
            self.sim.note_limbo(k)
        if self._verbose or k:
            self.sim.record("screen", node, peer, inner.kind, k or None, self._inst_detail())

    def transport_sent(self, pr: Principal, u: int, k: int, bag) -> None:
        self.hooks.transport_sent(self, pr.v, bag)

    def tokens_received(self, pr: Principal, u: int, msg: Message) -> None:
        self.hooks.tokens_received(self, pr.v, msg.bag)

    def phase_began(self, pr: Principal) -> None:
        self.phase_starts[pr.v] = self.sim.now
        if self._verbose:
            self.sim.record("phase_begin", pr.v, detail=self._inst_detail(type=pr.phase))

    def phase_ended(self, pr: Principal, abrupt: bool) -> None:
        self.phase_starts.pop(pr.v, None)
        if self._verbose:
            self.sim.record("phase_end", pr.v, detail=self._inst_detail(abrupt=abrupt))

    def pending_folded(self, pr: Principal, bag) -> None:
        pass

    def defer(self, pr: Principal, count: int, bag, why: str) -> None:
        if self._verbose:
            self.sim.record("defer", pr.v, tokens=count, detail=self._inst_detail(why=why))
        self.sim.schedule_followup(pr.v, count, self.name, why, Counter(bag))

    def teams_formed(self, pr: Principal, teams) -> None:
        fids = []
        for team in teams:
            size = sum(team.values())
            fid = self.sim.next_id()
            fids.append(fid)
            self.sim.note_deleted(size)
            detail = self._inst_detail(fid=fid)
            if set(team) != {PLAIN}:
                detail["kinds"] = {str(k): c for k, c in sorted(team.items(), key=str)}
            self.sim.record("team", pr.v, tokens=size, detail=detail)
            self.teams.append({"node": pr.v, "t": self.sim.now, "size": size, "fid": fid,
                               "kinds": dict(team)})
            if self.trace is not None:
                self.trace.form(pr.v, size, fid)
        self.hooks.teams_formed(self, pr.v, teams, fids)

    def channel_opened(self, u: int, pair) -> int:
        ch = self.sim.next_id()
        if self._verbose:
            self.sim.record("chan_create", self.n + u,
                            detail=self._inst_detail(ch=ch, pair=list(pair)))
        return ch

    def channel_released(self, u: int, ch: int) -> None:
        if self._verbose:
            self.sim.record("chan_release", self.n + u, detail=self._inst_detail(ch=ch))

    def _inst_detail(self, **kw) -> dict:
        if self.name != "tf":
            kw["inst"] = self.name
        return kw

    # state snapshots for the full log ----------------------------------------
    def snapshot(self, vid: int):
        n = self.n
        if vid < n:
            pr = self.principals.get(vid)
            if pr is None:
                return None
            ch = pr.channel
            tag = self.rule.tag(pr.bag) if isinstance(self.rule, PairRule) and pr.tok else None
            return ("p", pr.tok, pr.pending, pr.phase, frozenset(ch.busy_acked), dict(ch.meds),
                    dict(pr.awaiting), dict(pr.delaying), tag)
        m = self.mediators.get(vid - n)
        if m is None:
            return None
        return ("u", dict(m.busy_toks), m.chan, dict(m.diff))

    def after_activation(self, vid: int) -> None:
        """Log every variable that changed during the activation at ``vid``."""
        new = self.snapshot(vid)
        if new is None:
            return
        old = self._snap.get(vid) or initial_snapshot(new[0])
        self._snap[vid] = new
        if old == new:
            return
        n = self.n
        rec = self.sim.record
        extra = {} if self.name == "tf" else {"inst": self.name}

        def var(name, key, value):
            d = {"v": value}
            d.update(extra)
            rec("var", vid, key, name, None, d)

        if new[0] == "p":
            for i, name in ((1, "tok"), (2, "pend"), (3, "phase"), (8, "tag")):
                if old[i] != new[i]:
                    var(name, None, new[i])
            for u in sorted(new[4] - old[4]):
                var("acked", n + u, True)
            for u in sorted(old[4] - new[4]):
                var("acked", n + u, None)
            for i, name in ((5, "meds"), (6, "await"), (7, "delay")):
                _dict_diff(old[i], new[i], lambda k, x, nm=name: var(nm, n + k, x))
        else:
            _dict_diff(old[1], new[1], lambda k, x: var("bt", k, x))
            if old[2] != new[2]:
                var("chan", None, list(new[2]) if new[2] else None)
            _dict_diff(old[3], new[3], lambda k, x: var("diff", k, x))


def _dict_diff(old: dict, new: dict, emit) -> None:
    for k in sorted(set(old) | set(new)):
        a = old.get(k)
        b = new.get(k)
        if a != b:
            emit(k, b)


def initial_snapshot(role: str):
    if role == "p":
        return ("p", 0, 0, None, frozenset(), {}, {}, {}, None)
    return ("u", {}, (), {})
