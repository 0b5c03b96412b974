"""Per-port token counters and backward notification of token origins.

Every physical node keeps, per neighbour, an incoming and an outgoing token
counter.  A batch of ``k`` tokens leaving on a port carries the outgoing
counter value (the *stamp*) and advances it by ``k``; FIFO links make the
receiver's incoming counter equal to that stamp.  Each token has a local
record remembering how it arrived and how it left, so a node that forms a
team can send a report back along every member's path, batched per
predecessor, until the nodes that injected the tokens learn about it.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass

from .kernel import Message, ProtocolError

REPORT = "FormationReport"


@dataclass(slots=True)
class TraceRecord:
    rid: int
    origin: bool
    held: bool = True
    in_port: int | None = None
    in_counter: int | None = None
    out_port: int | None = None
    out_counter: int | None = None
    batch_size: int = 1


@dataclass
class NodeTrace:
    incoming: dict
    outgoing: dict
    held: deque
    sent: dict  # (out_port, out_counter) -> record

    @classmethod
    def empty(cls) -> "NodeTrace":
        return cls({}, {}, deque(), {})


class TraceTree:
    """Trace bookkeeping for all physical nodes of one protocol instance.

    ``on_origin(origin_node, formation_id, count)`` fires at the injection
    node when a report about its tokens arrives (or immediately when the
    team forms where the tokens were injected).
    """

    name = "trace"

    def __init__(self, sim, on_origin=None):
        self.sim = sim
        self.n = sim.n
        self.nodes = [NodeTrace.empty() for _ in range(self.n)]
        self.on_origin = on_origin
        self.callbacks: list[tuple[int, int, int]] = []
        self.reports_sent = 0
        self._rid = 0
        sim.register(self.name, self)

    # bookkeeping primitives -------------------------------------------------
    def _new(self, origin: bool, **kw) -> TraceRecord:
        self._rid += 1
        return TraceRecord(self._rid, origin, **kw)

    def inject(self, node: int, k: int) -> list[TraceRecord]:
        recs = [self._new(True) for _ in range(k)]
        self.nodes[node].held.extend(recs)
        return recs

    def record_send(self, node: int, port: int, k: int, records=None) -> int:
        """Stamp a batch of ``k`` tokens leaving ``node`` on ``port``."""
        nt = self.nodes[node]
        if records is None:
            if len(nt.held) < k:
                raise ProtocolError(f"node {node} sends {k} tokens but holds {len(nt.held)} records")
            records = [nt.held.popleft() for _ in range(k)]
        stamp = nt.outgoing.get(port, 0)
        for i, rec in enumerate(records):
            rec.held = False
            rec.out_port = port
            rec.out_counter = stamp + i
            nt.sent[(port, stamp + i)] = rec
        nt.outgoing[port] = stamp + k
        return stamp

    def record_receive(self, node: int, port: int, k: int, stamp: int, hold: bool = True):
        nt = self.nodes[node]
        expect = nt.incoming.get(port, 0)
        if stamp != expect:
            raise ProtocolError(f"stamp {stamp} on port {port} of node {node}, expected {expect}")
        recs = [self._new(False, in_port=port, in_counter=stamp + i) for i in range(k)]
        nt.incoming[port] = stamp + k
        if hold:
            nt.held.extend(recs)
        return recs

    def live_records(self) -> int:
        return sum(len(nt.held) + len(nt.sent) for nt in self.nodes)

    # formations -------------------------------------------------------------
    def form(self, node: int, k: int, fid: int) -> None:
        nt = self.nodes[node]
        if len(nt.held) < k:
            raise ProtocolError(f"team of {k} at node {node} with {len(nt.held)} records")
        team = [nt.held.popleft() for _ in range(k)]
        self._notify(node, team, fid)

    def _notify(self, node: int, recs, fid: int) -> None:
        here = 0
        back = defaultdict(list)
        for rec in recs:
            if rec.origin:
                here += 1
            else:
                back[rec.in_port].append(rec.in_counter)
        if here:
            self.callbacks.append((node, fid, here))
            self.sim.record("origin", node, tokens=here, detail={"fid": fid})
            if self.on_origin is not None:
                self.on_origin(node, fid, here)
        for port in sorted(back):
            msg = Message(self.name, REPORT, meta={"fid": fid, "counters": sorted(back[port])})
            self.reports_sent += 1
            self.sim.send(node, port, msg)

    def deliver(self, env) -> None:
        node = env.dst % self.n
        port = env.src % self.n
        meta = env.payload.meta
        sent = self.nodes[node].sent
        recs = []
        for c in meta["counters"]:
            rec = sent.pop((port, c), None)
            if rec is None:
                raise ProtocolError(f"report for unknown record ({port}, {c}) at node {node}")
            recs.append(rec)
        self._notify(node, recs, meta["fid"])

    # kernel instance protocol -----------------------------------------------
    def after_activation(self, vid) -> None:
        pass

    def is_busy(self, v) -> bool:
        return False

    def held_tokens(self) -> int:
        return 0
