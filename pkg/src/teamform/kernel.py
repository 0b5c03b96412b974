"""Deterministic discrete-event kernel for an asynchronous complete network.

Time is kept in integer ticks (``TICKS_PER_UNIT`` ticks per abstract time
unit, where one unit is the maximum message delay), so the event queue never
touches floating point.  Events are ordered by ``(tick, klass, seq)``: ``seq``
is assigned at scheduling time, and ``klass`` 0 is reserved for follow-up
injections that must run right after the activation that caused them.

Every physical node ``v`` hosts a primary (virtual id ``v``) and a utility
(virtual id ``n + v``).  Links are FIFO per ordered pair of physical nodes.
"""

from __future__ import annotations

import heapq
import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable

TICKS_PER_UNIT = 1 << 20

# event kinds in the queue
_DELIVER, _INJECT, _CALL, _QUIESCE, _TOGGLE = range(5)


class SimulationError(RuntimeError):
    """Base class for aborted runs."""


class ProtocolError(SimulationError):
    """A node did something the protocol never does."""


class AdversaryError(SimulationError):
    """An adversary decision broke a model invariant."""


def to_ticks(value) -> int:
    """Convert a time value (int, float, Fraction or ``"a/b"`` string) to ticks."""
    if isinstance(value, str):
        value = Fraction(value)
    return round(Fraction(value) * TICKS_PER_UNIT)


def fmt_time(t: int) -> str:
    """Render a tick count as an exact rational string, e.g. ``"3/4"``."""
    return str(Fraction(t, TICKS_PER_UNIT))


def parse_time(s: str) -> int:
    return to_ticks(Fraction(s))


class Message:
    """Wire payload.  ``inst`` routes the message to a protocol instance."""

    __slots__ = ("inst", "kind", "k", "tag", "bag", "inner", "meta")

    def __init__(self, inst, kind, k=0, tag=None, bag=None, inner=None, meta=None):
        self.inst = inst
        self.kind = kind
        self.k = k
        self.tag = tag
        self.bag = bag
        self.inner = inner
        self.meta = meta

    def __repr__(self) -> str:
        body = self.kind if self.inner is None else f"{self.kind}({self.inner!r})"
        return f"{body}[{self.k}]" if self.k else body


@dataclass(slots=True)
class Envelope:
    src: int
    dst: int
    payload: Message
    sent_at: int
    deliver_at: int
    seq: int
    tokens: int
    eid: int


# Record layout shared by the log, the JSONL format and the checkers.
FIELDS = ("t", "seq", "kind", "node", "peer", "msg_type", "tokens", "detail")

# record kinds that open a new activation (or boundary) in the log
BOUNDARY_KINDS = frozenset({"deliver", "drop", "inject", "start", "toggle"})


@dataclass
class ExecutionLog:
    """Totally ordered event records of one run.

    Records are tuples ``(t, seq, kind, node, peer, msg_type, tokens, detail)``
    with ``t`` in ticks and node ids virtual (``v`` primary, ``n + v`` utility).
    """

    n: int
    header: dict = field(default_factory=dict)
    records: list = field(default_factory=list)

    def add(self, t, kind, node=None, peer=None, msg_type=None, tokens=None, detail=None):
        self.records.append((t, len(self.records), kind, node, peer, msg_type, tokens, detail))

    def __len__(self) -> int:
        return len(self.records)

    def of_kind(self, *kinds) -> list:
        ks = set(kinds)
        return [r for r in self.records if r[2] in ks]

    def node_name(self, vid):
        if vid is None:
            return None
        return f"p{vid}" if vid < self.n else f"u{vid - self.n}"

    def node_id(self, name):
        if name is None:
            return None
        v = int(name[1:])
        return v if name[0] == "p" else v + self.n

    def lines(self) -> Iterable[str]:
        yield json.dumps({"header": self.header, "n": self.n}, sort_keys=True)
        name = self.node_name
        for t, seq, kind, node, peer, msg_type, tokens, detail in self.records:
            yield json.dumps(
                {"t": fmt_time(t), "seq": seq, "kind": kind, "node": name(node),
                 "peer": name(peer), "msg_type": msg_type, "tokens": tokens,
                 "detail": detail},
                sort_keys=True,
            )

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            for line in self.lines():
                fh.write(line + "\n")

    @classmethod
    def load(cls, path) -> "ExecutionLog":
        with open(path) as fh:
            return cls.from_lines(fh)

    @classmethod
    def from_lines(cls, lines) -> "ExecutionLog":
        it = iter(lines)
        head = json.loads(next(it))
        log = cls(n=head["n"], header=head["header"])
        nid = log.node_id
        for line in it:
            if not line.strip():
                continue
            d = json.loads(line)
            log.records.append((parse_time(d["t"]), d["seq"], d["kind"], nid(d["node"]),
                                nid(d["peer"]), d["msg_type"], d["tokens"], d["detail"]))
        return log


@dataclass
class Ledger:
    injected: int
    deleted: int
    held: int
    in_transit: int
    limbo: int

    @property
    def balanced(self) -> bool:
        return self.injected == self.deleted + self.held + self.in_transit + self.limbo


class Simulator:
    """Event loop, link model, fault status and token bookkeeping.

    ``verbose`` enables the full log (sends, deliveries, state changes); the
    light log keeps only injections, formations, toggles and application
    records, which is enough for load and reaction-time metrics.
    """

    def __init__(self, n: int, adversary, *, verbose: bool = True, max_time=None,
                 header: dict | None = None):
        if n < 2:
            raise ValueError("need at least two nodes")
        self.n = n
        self.adversary = adversary
        self.verbose = verbose
        self.max_time = None if max_time is None else to_ticks(max_time)
        self.now = 0
        self.log = ExecutionLog(n=n, header=dict(header or {}))
        self.instances: dict[str, Any] = {}
        self.counts: Counter = Counter()
        self._queue: list = []
        self._seq = 0
        self._ids = 0
        self._link_last: dict = {}
        self._link_seq: dict = {}
        self.in_flight = 0
        self.in_transit_tokens = 0
        self.limbo = 0
        self.injected = 0
        self.deleted = 0
        self.deferred_tokens = 0
        self.truncated = False
        self.activations = 0
        self.fragile = frozenset(adversary.fragile_set(n))
        self.faulty = set(self.fragile)
        self._toggle_points = bool(self.fragile) and adversary.toggles_enabled
        self._active = None

    # -- identity helpers -------------------------------------------------
    def phys(self, vid: int) -> int:
        return vid % self.n

    def is_faulty(self, vid: int) -> bool:
        return (vid % self.n) in self.faulty

    def next_id(self) -> int:
        self._ids += 1
        return self._ids

    def register(self, name: str, instance) -> None:
        if name in self.instances:
            raise ValueError(f"duplicate instance {name!r}")
        self.instances[name] = instance

    def record(self, kind, node=None, peer=None, msg_type=None, tokens=None, detail=None):
        self.log.add(self.now, kind, node, peer, msg_type, tokens, detail)

    # -- scheduling -------------------------------------------------------
    def _push(self, t, klass, kind, obj):
        self._seq += 1
        heapq.heappush(self._queue, (t, klass, self._seq, kind, obj))

    def send(self, src: int, dst: int, payload: Message) -> Envelope:
        """Send ``payload`` with a delay chosen by the adversary."""
        delay = self.adversary.delay(self, src, dst, payload)
        return self.schedule_send(src, dst, payload, delay)

    def schedule_send(self, src: int, dst: int, payload: Message, delay: int) -> Envelope:
        if not 0 < delay <= TICKS_PER_UNIT:
            raise AdversaryError(f"delay {fmt_time(delay)} outside (0, 1]")
        if self.is_faulty(src):
            raise ProtocolError(f"faulty node {src} attempted a send")
        n = self.n
        link = (src % n, dst % n)
        at = self.now + delay
        last = self._link_last.get(link)
        if last is not None and last > at:
            at = last  # FIFO: same tick, later seq
        self._link_last[link] = at
        lseq = self._link_seq.get(link, 0)
        self._link_seq[link] = lseq + 1
        inner = payload.inner
        tokens = inner.k if inner is not None and inner.bag is not None else 0
        self._ids += 1
        env = Envelope(src, dst, payload, self.now, at, lseq, tokens, self._ids)
        self._push(at, 1, _DELIVER, env)
        self.in_flight += 1
        self.in_transit_tokens += tokens
        kind = payload.kind
        self.counts[kind if inner is None else f"{kind}:{inner.kind}"] += 1
        if self.verbose:
            detail = {"eid": env.eid, "at": fmt_time(at), "inst": payload.inst}
            if inner is not None:
                detail["inner"] = inner.kind
                if inner.meta:
                    detail.update(inner.meta)
            if payload.meta:
                detail.update(payload.meta)
            if payload.k and inner is None:
                detail["k"] = payload.k
            self.record("send", src, dst, kind, tokens or None, detail)
        return env

    def schedule_injection(self, t, target, count: int, inst: str = "tf", source: str = "adv",
                           bag=None, klass: int = 1) -> None:
        """Queue an injection of ``count`` tokens at tick ``t``.

        ``target`` is a node id or ``"any"`` (resolved to a non-faulty node at
        injection time).  Follow-up injections use ``klass`` 0.
        """
        if count <= 0:
            raise ValueError("injection count must be positive")
        if t < self.now:
            raise SimulationError("injection scheduled in the past")
        if source in ("fake", "deferred"):
            self.deferred_tokens += count
        self._push(t, klass, _INJECT, (target, count, inst, source, bag))

    def schedule_followup(self, target: int, count: int, inst: str, source: str, bag=None):
        """Injection one sequence step after the current activation."""
        self.schedule_injection(self.now, target, count, inst, source, bag, klass=0)

    def schedule_call(self, t: int, fn: Callable[[], None], klass: int = 1) -> None:
        self._push(t, klass, _CALL, fn)

    def schedule_toggle(self, t: int, node: int) -> None:
        self._push(t, 2, _TOGGLE, node)

    # -- token bookkeeping ------------------------------------------------
    def note_deleted(self, k: int) -> None:
        self.deleted += k

    def note_limbo(self, k: int) -> None:
        self.limbo += k

    def tokens_in_system(self) -> int:
        return self.injected - self.deleted

    def ledger(self) -> Ledger:
        held = self.deferred_tokens
        for inst in self.instances.values():
            held += getattr(inst, "held_tokens", lambda: 0)()
        return Ledger(self.injected, self.deleted, held, self.in_transit_tokens, self.limbo)

    def is_quiescent(self) -> bool:
        if self._active is not None:
            return False
        return self.in_flight == 0 and self.tokens_in_system() == 0

    # -- faults -----------------------------------------------------------
    def toggle_status(self, node: int) -> None:
        node %= self.n
        if node not in self.fragile:
            raise AdversaryError(f"node {node} is not fragile")
        if not self.is_quiescent():
            raise AdversaryError(f"toggle of {node} at a non-quiescent time")
        if node in self.faulty:
            self.faulty.discard(node)
        else:
            self.faulty.add(node)
        self.record("toggle", node, detail={"faulty": node in self.faulty})

    def _toggle_point(self) -> None:
        for node in self.adversary.toggles(self):
            self.toggle_status(node)

    # -- main loop --------------------------------------------------------
    def start(self) -> None:
        """Apply time-0 decisions: initial toggles and scheduled injections."""
        if self._toggle_points:
            self._toggle_point()
        for t, node in self.adversary.scripted_toggles():
            if t == 0:
                self.toggle_status(node)
            else:
                self.schedule_toggle(t, node)
        for inj in self.adversary.injections(self):
            self.schedule_injection(inj.time, inj.node, inj.count, inj.inst, "adv", inj.bag)

    def advance(self) -> bool:
        """Process one event; return False when the run is over."""
        q = self._queue
        if not q:
            return False
        if self.max_time is not None and q[0][0] > self.max_time:
            self.truncated = True
            return False
        t, _klass, _seq, kind, obj = heapq.heappop(q)
        self.now = t
        if kind == _DELIVER:
            self._deliver(obj)
        elif kind == _INJECT:
            self._inject(*obj)
        elif kind == _CALL:
            self._active = ("call", None)
            obj()
            self._active = None
        elif kind == _QUIESCE:
            if self.is_quiescent():
                self._toggle_point()
        elif kind == _TOGGLE:
            self.toggle_status(obj)
        if self._toggle_points and kind != _QUIESCE and self.is_quiescent():
            self._plan_toggle_point()
        return True

    def run(self) -> "Simulator":
        while self.advance():
            pass
        return self

    def settled(self) -> bool:
        return not self._queue

    def _plan_toggle_point(self) -> None:
        if not self._queue:
            return
        if self._queue[0][0] - self.now >= 2 * TICKS_PER_UNIT:
            self._push(self.now + TICKS_PER_UNIT, 1, _QUIESCE, None)

    def _deliver(self, env: Envelope) -> None:
        self.in_flight -= 1
        self.in_transit_tokens -= env.tokens
        payload = env.payload
        if self.is_faulty(env.dst):
            self.limbo += env.tokens
            if self.verbose or env.tokens:
                self.record("drop", env.dst, env.src, payload.kind, env.tokens or None,
                            {"eid": env.eid})
            return
        self.activations += 1
        if self.verbose:
            self.record("deliver", env.dst, env.src, payload.kind, env.tokens or None,
                        {"eid": env.eid})
        inst = self.instances[payload.inst]
        self._active = (payload.inst, env.dst)
        inst.deliver(env)
        self._active = None
        if self.verbose:
            inst.after_activation(env.dst)

    def _inject(self, target, count, inst_name, source, bag) -> None:
        if source in ("fake", "deferred"):
            self.deferred_tokens -= count
        else:
            self.injected += count
        if target == "any":
            target = self.adversary.pick_node(self)
        if self.is_faulty(target):
            if source in ("fake", "deferred"):
                raise ProtocolError("follow-up injection at a faulty node")
            raise AdversaryError(f"injection into faulty node {target}")
        self.activations += 1
        self.record("inject", target, tokens=count,
                    detail={"src": source, "inst": inst_name})
        inst = self.instances[inst_name]
        self._active = (inst_name, target)
        inst.inject(target, count, source, bag)
        self._active = None
        if self.verbose:
            inst.after_activation(target)
