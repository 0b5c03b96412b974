"""Offline invariant checking over a full execution log.

:class:`LogChecker` rebuilds every node variable from the ``var`` records,
tracks messages in transit from ``send``/``deliver`` records, and checks at
every activation boundary:

* token conservation, with nothing lost in transit or screened,
* team size, and that a transport never leaves a node holding ``sigma``
  tokens or more, and always ships all of them,
* the configuration table for every affected primary-utility pair, and that
  each change follows the transition table,
* the channel guarantees (busy operational nodes, timely channel setup,
  prompt teardown, timely relaying),
* the phase length bound and the in-flight transport observation,
* the potential functions ``psi`` and ``psi_hat``,
* the forgetful property at quiescent times and accumulation at the end.

It also collects the time series used by the statistical checks.
"""

from __future__ import annotations

from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field

from .channel import CODES
from .kernel import TICKS_PER_UNIT, ExecutionLog, fmt_time, parse_time
from .pugraph import PUGraph
from .tables import (MED, RECEIVE_COLUMN, TOK_UP, TOK_ZERO, matching_rows, reachable)

T = TICKS_PER_UNIT


@dataclass
class Violation:
    check: str
    seq: int
    t: int
    message: str

    def __str__(self) -> str:
        return f"[{self.check}] seq={self.seq} t={fmt_time(self.t)}: {self.message}"


@dataclass
class Analysis:
    """Time series extracted from a log for the statistical checks."""

    phase_ends: dict = field(default_factory=lambda: defaultdict(list))
    phase_cont: dict = field(default_factory=lambda: defaultdict(list))
    operational: list = field(default_factory=list)  # [ch, start, end|None, p1, p2]
    psi_hat: list = field(default_factory=list)  # (t, value) at changes
    tokens: list = field(default_factory=list)  # (t, total) at changes
    team_times: list = field(default_factory=list)
    phase_lengths: list = field(default_factory=list)
    retirement_steps: int = 0
    end_time: int = 0
    settled: bool = True
    max_channels: int = 0


@dataclass
class CheckReport:
    violations: list
    analysis: Analysis
    stats: dict

    @property
    def ok(self) -> bool:
        return not self.violations

    def by_check(self) -> dict:
        out = defaultdict(int)
        for v in self.violations:
            out[v.check] += 1
        return dict(out)

    def summary(self) -> str:
        if self.ok:
            return "0 violations"
        parts = ", ".join(f"{k}: {c}" for k, c in sorted(self.by_check().items()))
        return f"{len(self.violations)} violations ({parts})"


class LogChecker:
    """Replays one instance of a full log and records violations."""

    MAX_PER_CHECK = 20

    def __init__(self, log: ExecutionLog, inst: str = "tf", sigma: int | None = None,
                 utilities=None, fragile=None, pair_rule=None):
        self.log = log
        self.n = log.n
        head = log.header
        self.inst = inst
        self.sigma = sigma if sigma is not None else head.get("sigma")
        self.pair_rule = pair_rule if pair_rule is not None else head.get("pair_rule")
        U = utilities if utilities is not None else head.get("U")
        if U is None and "config" in head and "seed" in head:
            pu = PUGraph(self.n, head["config"].get("c", 3.0), head["seed"])
            U = [pu.utilities(p) for p in range(self.n)]
        self.U = {int(p): tuple(us) for p, us in enumerate(U)} if U is not None else None
        self.faulty = set(fragile if fragile is not None else head.get("fragile", ()))
        self.violations: list[Violation] = []
        self._counts = defaultdict(int)
        self.an = Analysis()
        n = self.n
        # reconstructed state
        self.tok = defaultdict(int)
        self.pend = defaultdict(int)
        self.phase = {}
        self.acked = defaultdict(set)
        self.meds = defaultdict(dict)
        self.await_ = defaultdict(dict)
        self.delay = defaultdict(dict)
        self.bt = defaultdict(dict)
        self.chan = defaultdict(tuple)
        self.diff = defaultdict(dict)
        self.sum_tok = 0
        self.sum_pend = 0
        self.busy = set()
        # transit
        self.inflight = {}
        self.inflight_tokens = 0
        self.global_inflight = 0
        self.link_fifo = defaultdict(deque)
        self.pair_link = defaultdict(deque)
        self.transports = {}  # mid -> (k, dst, u, ch)
        self.relays = {}  # mid -> (t, ch, src, u)
        self.relay_order = deque()
        # ledger
        self.injected = 0
        self.deleted = 0
        self.deferred = 0
        self.limbo = 0
        self.global_tokens = 0
        # channels
        self.ch_info = {}  # ch -> (u, pair)
        self.holders = defaultdict(int)
        self.op_index = {}  # ch -> index in an.operational
        self.oc = 0
        self.g3_deadline = {}  # ch -> (t_retire, peer)
        self.new_retired = []
        self.post_checks = []
        self.oc_timeline = []  # (t, nonempty)
        self.busy_since = {}
        self.busy_intervals = defaultdict(list)
        self.tag = {}
        self.phase_begin = {}
        self.rows = {}
        self.psi = 0
        self.psi_hat = 0
        self.quiescent_checks = 0
        self._n = n

    # ------------------------------------------------------------------ utils
    def flag(self, check: str, rec, message: str) -> None:
        self._counts[check] += 1
        if self._counts[check] <= self.MAX_PER_CHECK:
            self.violations.append(Violation(check, rec[1], rec[0], message))
        else:
            self.violations.append(Violation(check, rec[1], rec[0], "(further)"))

    def _mine(self, detail) -> bool:
        return (detail or {}).get("inst", "tf") == self.inst

    # ------------------------------------------------------------------- main
    def run(self) -> CheckReport:
        recs = self.log.records
        group = []
        boundary = {"deliver", "drop", "inject", "start", "toggle"}
        self.prev_t = 0
        for rec in recs:
            if rec[2] in boundary and group:
                self._group(group)
                group = []
            group.append(rec)
        if group:
            self._group(group)
        self._finish()
        stats = {"phases": len(self.an.phase_lengths),
                 "max_phase": max(self.an.phase_lengths, default=0) / T,
                 "operational_channels": len(self.an.operational),
                 "retirements": self.an.retirement_steps,
                 "max_channels": self.an.max_channels,
                 "quiescent_checks": self.quiescent_checks}
        return CheckReport(self.violations, self.an, stats)

    def _group(self, group) -> None:
        n = self.n
        first = group[0]
        now = first[0]
        self.now = now
        self.cur = first
        act = None  # (role, node)
        msg = None  # (kind, src) for a delivery of this instance
        touched = set()
        sign = set()
        has_team = False
        transport_sends = 0
        pre_psi, pre_hat = self.psi, self.psi_hat
        for rec in group:
            kind = rec[2]
            handler = getattr(self, "_r_" + kind, None)
            if handler is None:
                continue
            res = handler(rec, touched, sign)
            if kind == "deliver" and res is not None:
                act, msg = res
            elif kind == "inject" and res is not None:
                act = res
            elif kind == "team" and res:
                has_team = True
            elif kind == "send" and res:
                transport_sends += 1
        if act is not None and act[0] == "p" and msg is not None and msg[0] == "Channel":
            if not any(r[2] == "send" and r[5] == "ChannelAck" and r[3] == act[1]
                       and r[4] == msg[1] and self._mine(r[7]) for r in group):
                self.flag("table9", first, f"p{act[1]} got Channel from u{msg[1] - n} "
                          "without answering ChannelAck")
        self._boundary(group, act, msg, touched, sign, has_team, transport_sends,
                       pre_psi, pre_hat)

    # --------------------------------------------------------------- handlers
    def _r_send(self, rec, touched, sign):
        t, seq, kind, src, dst, mtype, tokens, d = rec
        n = self.n
        eid = d["eid"]
        at = parse_time(d["at"])
        if not 0 < at - t <= T:
            self.flag("delay-bound", rec, f"delay {fmt_time(at - t)}")
        if (src % n) in self.faulty:
            self.flag("faulty-send", rec, f"send from faulty node {src % n}")
        tokens = tokens or 0
        self.global_inflight += 1
        self.link_fifo[(src % n, dst % n)].append(eid)
        mine = self._mine(d)
        self.inflight[eid] = (src, dst, mtype, d, tokens, mine, t)
        if not mine:
            return None
        self.inflight_tokens += tokens
        code = CODES.get(mtype)
        if code is not None:
            if src < n:
                pair = (src, dst - n)
                self.pair_link[(pair, 0)].append(code)
            else:
                pair = (dst, src - n)
                self.pair_link[(pair, 1)].append(code)
            touched.add(pair)
            return None
        if mtype != "Relayed" or src >= n:
            return None
        # first hop of a principal message over a channel
        u = dst - n
        mid = d.get("mid")
        ch = d.get("ch")
        if self.meds[src].get(u) != ch or ch is None:
            self.post_checks.append((rec, src, u, ch))
        peer = None
        info = self.ch_info.get(ch)
        if info is not None:
            peer = info[1][1] if info[1][0] == src else info[1][0]
        self.relays[mid] = (t, ch, src, u, peer)
        self.relay_order.append((t, mid))
        if d.get("inner") == "Transport":
            if self.sigma is not None and not self.pair_rule and tokens >= self.sigma:
                self.flag("transport-above-sigma", rec, f"transport of {tokens} >= sigma")
            if self.tok[src] != tokens:
                self.flag("transport-all", rec,
                          f"p{src} holds {self.tok[src]} but ships {tokens}")
            if self.pair_rule is None and self.sigma is not None and self.tok[src] >= self.sigma:
                self.flag("transport-above-sigma", rec, f"p{src} holds {self.tok[src]}")
            self.transports[mid] = (tokens, peer, u, ch)
            return True
        return None

    def _pop_transit(self, rec):
        t, seq, kind, dst, src, mtype, tokens, d = rec
        n = self.n
        eid = d["eid"]
        info = self.inflight.pop(eid, None)
        if info is None:
            self.flag("transit", rec, f"unknown envelope {eid}")
            return None
        self.global_inflight -= 1
        q = self.link_fifo[(src % n, dst % n)]
        if not q or q[0] != eid:
            self.flag("FIFO", rec, f"envelope {eid} overtook {q[0] if q else None}")
            if eid in q:
                q.remove(eid)
        else:
            q.popleft()
        if info[5]:
            self.inflight_tokens -= info[4]
            code = CODES.get(mtype)
            if code is not None:
                if src < n:
                    key = ((src, dst - n), 0)
                else:
                    key = ((dst, src - n), 1)
                pq = self.pair_link[key]
                if not pq or pq[0] != code:
                    self.flag("transit", rec, "pair link order mismatch")
                else:
                    pq.popleft()
        return info

    def _r_deliver(self, rec, touched, sign):
        info = self._pop_transit(rec)
        if info is None or not info[5]:
            return None
        t, seq, kind, dst, src, mtype, tokens, d = rec
        n = self.n
        if dst >= n:
            act = ("u", dst - n)
            if mtype in CODES:
                touched.add((src, dst - n))
            self.cur_relay = info[3] if mtype == "Relayed" else None
            return act, (mtype, src)
        act = ("p", dst)
        u = src - n
        if mtype in CODES:
            touched.add((dst, u))
        self.cur_relay = None
        if mtype == "Relayed":
            sd = info[3]
            mid = sd.get("mid")
            rel = self.relays.pop(mid, None)
            accepted = u in self.meds[dst]
            if rel is not None and accepted:
                t0, ch, p0, u0, peer = rel
                if self.meds[dst].get(u) != ch:
                    self.flag("G4", rec, f"relayed message crossed channels at p{dst}")
                if t - t0 > 2 * T:
                    self.flag("G4", rec, f"relayed message took {fmt_time(t - t0)}")
            if sd.get("inner") == "Transport":
                self.transports.pop(mid, None)
        return act, (mtype, src)

    def _r_drop(self, rec, touched, sign):
        info = self._pop_transit(rec)
        if info is not None and info[5] and info[4]:
            self.limbo += info[4]
            self.flag("limbo", rec, f"{info[4]} tokens dropped at a faulty node")
        return None

    def _r_inject(self, rec, touched, sign):
        t, seq, kind, node, peer, mtype, tokens, d = rec
        src = d.get("src", "adv")
        if src in ("fake", "deferred"):
            if self._mine(d):
                self.deferred -= tokens
        else:
            self.global_tokens += tokens
            if self._mine(d):
                self.injected += tokens
        if (node % self.n) in self.faulty:
            self.flag("faulty-inject", rec, f"injection into faulty node {node}")
        return ("p", node) if self._mine(d) else None

    def _r_start(self, rec, touched, sign):
        return None

    def _r_defer(self, rec, touched, sign):
        if self._mine(rec[7]):
            self.deferred += rec[6]

    def _r_team(self, rec, touched, sign):
        t, seq, kind, node, peer, mtype, tokens, d = rec
        self.global_tokens -= tokens
        if not self._mine(d):
            return False
        self.deleted += tokens
        self.an.team_times.append(t)
        if self.pair_rule:
            kinds = d.get("kinds", {})
            if sorted(kinds.values()) != [1, 1] or len(kinds) != 2:
                self.flag("pair-team", rec, f"pair team with kinds {kinds}")
        elif self.sigma is not None and tokens != self.sigma:
            self.flag("team-size", rec, f"team of {tokens} tokens")
        return True

    def _r_screen(self, rec, touched, sign):
        t, seq, kind, node, peer, mtype, tokens, d = rec
        if not self._mine(d):
            return
        if tokens:
            self.limbo += tokens
            self.flag("limbo", rec, f"{tokens} tokens screened at {node}")
        n = self.n
        if node >= n and self.cur_relay is not None:
            mid = self.cur_relay.get("mid")
            rel = self.relays.pop(mid, None)
            if rel is not None:
                t0, ch, p0, u0, peer_p = rel
                if peer_p is not None and self.meds[peer_p].get(u0) == ch:
                    self.flag("G4", rec, "relayed message screened while its target holds the channel")
            self.transports.pop(mid, None)

    def _r_toggle(self, rec, touched, sign):
        t, seq, kind, node, peer, mtype, tokens, d = rec
        if self.global_inflight or self.global_tokens or self.deferred:
            self.flag("toggle", rec, "status toggle at a non-quiescent time")
        if d.get("faulty"):
            self.faulty.add(node)
        else:
            self.faulty.discard(node)

    def _r_phase_begin(self, rec, touched, sign):
        if self._mine(rec[7]):
            self.phase_begin[rec[3]] = rec[0]

    def _r_phase_end(self, rec, touched, sign):
        if not self._mine(rec[7]):
            return
        p = rec[3]
        t0 = self.phase_begin.pop(p, None)
        if t0 is None:
            self.flag("phase", rec, f"phase end without a begin at p{p}")
            return
        self.an.phase_lengths.append(rec[0] - t0)
        if rec[0] - t0 > 8 * T:
            self.flag("phase-bound", rec, f"phase of p{p} lasted {fmt_time(rec[0] - t0)}")
        self.an.phase_ends[p].append(rec[0])

    def _r_chan_create(self, rec, touched, sign):
        d = rec[7]
        if self._mine(d):
            self.ch_info[d["ch"]] = (rec[3] - self.n, tuple(d["pair"]))

    def _r_var(self, rec, touched, sign):
        t, seq, kind, node, key, name, _, d = rec
        if not self._mine(d):
            return
        val = d["v"]
        n = self.n
        if name == "tok":
            old = self.tok[node]
            self.tok[node] = val
            self.sum_tok += val - old
            if (old > 0) != (val > 0):
                sign.add(node)
                if val > 0:
                    self.busy.add(node)
                    self.busy_since[node] = t
                else:
                    self.busy.discard(node)
                    self.busy_intervals[node].append(
                        (self.busy_since.pop(node, t), t, self.tag.get(node)))
        elif name == "tag":
            # pair rule: colour held by a busy primary; a change splits its busy span
            old = self.tag.get(node)
            if node in self.busy_since and old is not None and old != val:
                self.busy_intervals[node].append((self.busy_since[node], t, old))
                self.busy_since[node] = t
            self.tag[node] = val
        elif name == "pend":
            self.sum_pend += val - self.pend[node]
            self.pend[node] = val
        elif name == "phase":
            self.phase[node] = val
        elif name == "acked":
            u = key - n
            if val:
                self.acked[node].add(u)
            else:
                self.acked[node].discard(u)
            touched.add((node, u))
        elif name == "meds":
            u = key - n
            old = self.meds[node].get(u)
            if val is None:
                self.meds[node].pop(u, None)
            else:
                self.meds[node][u] = val
            touched.add((node, u))
            if old is not None:
                self._holder(old, -1, node, rec)
            if val is not None:
                self._holder(val, +1, node, rec)
            self.an.max_channels = max(self.an.max_channels, len(self.meds[node]))
            if self.U is not None and u not in self.U.get(node, ()):
                self.flag("G5", rec, f"p{node} holds a channel through u{u} outside U(p)")
        elif name == "await":
            self._set(self.await_[node], key - n, val)
        elif name == "delay":
            self._set(self.delay[node], key - n, val)
        elif name == "bt":
            self._set(self.bt[node - n], key, val)
            touched.add((key, node - n))
        elif name == "chan":
            u = node - n
            for p in self.chan[u]:
                touched.add((p, u))
            self.chan[u] = tuple(val) if val else ()
            for p in self.chan[u]:
                touched.add((p, u))
        elif name == "diff":
            self._set(self.diff[node - n], key, val)

    @staticmethod
    def _set(dct, key, val):
        if val is None:
            dct.pop(key, None)
        else:
            dct[key] = val

    def _holder(self, ch, delta, p, rec):
        before = self.holders[ch]
        after = before + delta
        self.holders[ch] = after
        t = rec[0]
        if before < 2 <= after:
            self.oc += 1
            info = self.ch_info.get(ch, (None, (None, None)))
            self.op_index[ch] = len(self.an.operational)
            self.an.operational.append([ch, t, None, info[1][0], info[1][1]])
        elif before >= 2 > after:
            self.oc -= 1
            self.an.operational[self.op_index[ch]][2] = t
            info = self.ch_info.get(ch)
            peer = None
            if info is not None:
                peer = info[1][1] if info[1][0] == p else info[1][0]
            self.g3_deadline[ch] = (t, peer, p, rec)
            self.new_retired.append((ch, p))
        if before == 1 and after == 0 and ch in self.g3_deadline:
            t_r = self.g3_deadline.pop(ch)[0]
            if t - t_r > 2 * T:
                self.flag("G3", rec, f"channel {ch} lingered {fmt_time(t - t_r)} after retirement")

    # --------------------------------------------------------------- boundary
    def _boundary(self, group, act, msg, touched, sign, has_team, transport_sends,
                  pre_psi, pre_hat):
        rec = group[-1]
        now = self.now
        n = self.n
        # conservation
        held = self.sum_tok + self.sum_pend + self.deferred
        if self.injected != self.deleted + held + self.inflight_tokens + self.limbo:
            self.flag("conservation", rec,
                      f"injected {self.injected} != deleted {self.deleted} + held {held} "
                      f"+ transit {self.inflight_tokens} + limbo {self.limbo}")
        # G1 and G3 retirement cause
        for p in sign:
            if self.meds[p] and self.tok[p] == 0:
                self.flag("G1", rec, f"p{p} has channels without tokens")
        if act is not None and act[0] == "p":
            p = act[1]
            if self.meds[p] and self.tok[p] == 0:
                self.flag("G1", rec, f"p{p} has channels without tokens")
        for ch, p in self.new_retired:
            if self.tok.get(p, 0) > 0:
                self.flag("G3", rec, f"channel {ch} stopped being operational while p{p} is busy")
        self.new_retired.clear()
        for r, src, u, ch in self.post_checks:
            if ch is None or self.meds[src].get(u) != ch:
                self.flag("G4", r, f"p{src} sends over a channel it does not hold")
        self.post_checks.clear()
        # configuration table
        self._tables(act, msg, touched, sign, rec)
        # in-flight transports
        for mid, (k, dst, u, ch) in self.transports.items():
            if dst is None or self.tok[dst] == 0 or self.meds[dst].get(u) != ch:
                self.flag("transport-in-transit", rec,
                          f"transport {mid} heads to p{dst} which is idle or lost the channel")
        # relay deadlines
        ro = self.relay_order
        while ro and ro[0][0] + 2 * T < now:
            t0, mid = ro.popleft()
            rel = self.relays.get(mid)
            if rel is None:
                continue
            _, ch, p0, u0, peer = rel
            if peer is not None and self.meds[peer].get(u0) == ch and self.tok[peer] > 0:
                self.flag("G4", rec, f"relayed message {mid} not delivered within 2")
                self.relays.pop(mid, None)
        # potentials
        self._potentials(rec, has_team, transport_sends, pre_psi, pre_hat)
        # operational-channel timeline
        nonempty = self.oc > 0
        if not self.oc_timeline or self.oc_timeline[-1][1] != nonempty:
            self.oc_timeline.append((now, nonempty))
        total = self.injected - self.deleted
        toks = self.an.tokens
        if not toks or toks[-1][1] != total:
            toks.append((now, total))
        # phase continuity (a new phase started right at a phase end)
        if act is not None and act[0] == "p":
            p = act[1]
            ends = self.an.phase_ends.get(p)
            if ends and ends[-1] == now:
                cont = self.an.phase_cont[p]
                while len(cont) < len(ends):
                    cont.append(False)
                cont[-1] = self.phase.get(p) is not None
        # quiescence
        if (self.global_inflight == 0 and self.global_tokens == 0 and self.deferred == 0):
            self._forgetful(rec)

    def _tables(self, act, msg, touched, sign, rec):
        U = self.U
        pairs = set(touched)
        if U is not None:
            for p in sign:
                for u in U.get(p, ()):
                    pairs.add((p, u))
        if not pairs:
            return
        faulty = self.faulty
        rows = self.rows
        start = frozenset({1})
        for pair in pairs:
            p, u = pair
            if p in faulty or u in faulty:
                rows[pair] = None
                continue
            new = matching_rows(self.tok[p] > 0, u in self.acked[p], u in self.meds[p],
                                self.bt[u].get(p), p in self.chan[u],
                                "".join(reversed(self.pair_link[(pair, 0)])),
                                "".join(reversed(self.pair_link[(pair, 1)])))
            if not new:
                self.flag("table8", rec, f"pair (p{p},u{u}) in no legal configuration: "
                          + self._describe(pair))
                rows[pair] = None
                continue
            old = rows.get(pair, start)
            rows[pair] = new
            if old is None or old == new and act is None:
                continue
            budget = {}
            required = None
            if act is not None:
                role, node = act
                if role == "p" and node == p:
                    budget = {TOK_UP: 2, TOK_ZERO: 2}
                    if msg is not None and msg[1] - self.n == u:
                        required = RECEIVE_COLUMN.get(("p", msg[0]))
                elif role == "u" and node == u:
                    budget = {MED: 2}
                    if msg is not None and msg[1] == p:
                        required = RECEIVE_COLUMN.get(("u", msg[0]))
            if not reachable(old, new, budget, required):
                self.flag("table9", rec, f"pair (p{p},u{u}) moved from rows {sorted(old)} to "
                          f"{sorted(new)} (act={act}, msg={msg})")

    def _describe(self, pair):
        p, u = pair
        return (f"tok={self.tok[p]} acked={u in self.acked[p]} med={u in self.meds[p]} "
                f"bt={self.bt[u].get(p)} chan={p in self.chan[u]} "
                f"pu={''.join(reversed(self.pair_link[(pair, 0)]))!r} "
                f"up={''.join(reversed(self.pair_link[(pair, 1)]))!r}")

    def _potentials(self, rec, has_team, transport_sends, pre_psi, pre_hat):
        R = defaultdict(int)
        for k, dst, u, ch in self.transports.values():
            if dst is not None:
                R[dst] += k
        psi = 0
        for p in self.busy:
            psi += self.tok[p] + R[p] - 1
        vals = [self.tok[p] + R[p] for p in self.busy]
        vals.extend(R[p] for p in R if p not in self.busy)
        vals.sort(reverse=True)
        hat = sum(vals[:2])
        if not has_team:
            if transport_sends:
                self.an.retirement_steps += 1
                if psi != pre_psi + transport_sends:
                    self.flag("psi-step", rec, f"psi went {pre_psi} -> {psi} at a retirement")
            elif psi < pre_psi:
                self.flag("psi", rec, f"psi dropped {pre_psi} -> {psi}")
            if hat < pre_hat:
                self.flag("psi_hat", rec, f"psi_hat dropped {pre_hat} -> {hat}")
        self.psi = psi
        self.psi_hat = hat
        series = self.an.psi_hat
        if not series or series[-1][1] != hat:
            series.append((self.now, hat))

    def _forgetful(self, rec):
        self.quiescent_checks += 1
        bad = []
        for name, dct in (("tok", self.tok), ("pend", self.pend)):
            bad += [f"{name}[p{k}]={v}" for k, v in dct.items() if v]
        bad += [f"phase[p{k}]={v}" for k, v in self.phase.items() if v is not None]
        for name, dct in (("busy_acked", self.acked), ("meds", self.meds),
                          ("awaiting", self.await_), ("delaying", self.delay)):
            bad += [f"{name}[p{k}]" for k, v in dct.items() if v]
        for name, dct in (("busy_toks", self.bt), ("diff", self.diff)):
            bad += [f"{name}[u{k}]" for k, v in dct.items() if v]
        bad += [f"chan[u{k}]" for k, v in self.chan.items() if v]
        if bad:
            self.flag("forgetful", rec, "non-initial state at a quiescent time: "
                      + ", ".join(sorted(bad)[:6]))

    # ------------------------------------------------------------------ finish
    def _finish(self):
        recs = self.log.records
        end = recs[-1][0] if recs else 0
        self.an.end_time = end
        head = self.log.header
        settled = head.get("settled", True)
        self.an.settled = settled
        last = recs[-1] if recs else (0, 0)
        if self.inflight and settled:
            self.flag("transit", last, f"{len(self.inflight)} envelopes never delivered")
        for p, t0 in self.phase_begin.items():
            if end - t0 > 8 * T:
                self.flag("phase-bound", last, f"phase of p{p} open for {fmt_time(end - t0)}")
        for ch, (t_r, peer, p, r) in self.g3_deadline.items():
            if settled or end - t_r > 2 * T:
                self.flag("G3", last, f"channel {ch} never left its peer p{peer}")
        for p, t0 in self.busy_since.items():
            self.busy_intervals[p].append((t0, None, self.tag.get(p)))
        self._guarantee2(end, last)
        self._accumulation(settled, last)

    def _guarantee2(self, end, last):
        """Two primaries busy for 4 units must see an operational channel.

        Under the pair rule only primaries holding different colours count.
        """
        tl = self.oc_timeline
        empties = []
        start = 0
        cur_empty = True
        for t, nonempty in tl:
            if nonempty and cur_empty:
                empties.append((start, t))
                cur_empty = False
            elif not nonempty and not cur_empty:
                start = t
                cur_empty = True
        if cur_empty:
            empties.append((start, end + 1))
        window = 4 * T
        spans = []
        for p, ivs in self.busy_intervals.items():
            if p in self.faulty:
                continue
            for a, b, tag in ivs:
                b = end if b is None else b
                if b - a >= window:
                    spans.append((a, b - window, tag))
        if len(spans) < 2:
            return
        spans.sort()
        for d, c in empties:
            hi = c - window - 1
            if hi < d:
                continue
            events = []
            for a, b, tag in spans:
                lo2, hi2 = max(a, d), min(b, hi)
                if lo2 <= hi2:
                    events.append((lo2, 1, tag))
                    events.append((hi2 + 1, -1, tag))
            events.sort(key=lambda e: (e[0], e[1]))
            depth = Counter()
            for t, delta, tag in events:
                depth[tag] += delta
                if self.pair_rule:
                    hit = sum(1 for k, c in depth.items() if c > 0 and k is not None) >= 2
                else:
                    hit = sum(depth.values()) >= 2
                if hit:
                    self.flag("G2", (t, last[1]),
                              f"two primaries busy on ({fmt_time(t)}, {fmt_time(t + window)}] "
                              "without an operational channel")
                    break

    def _accumulation(self, settled, last):
        if not settled or self.pair_rule or self.sigma is None:
            return
        left = self.injected - self.deleted
        k = self.injected % self.sigma
        if left != k:
            return  # not every possible team formed; liveness reports it separately
        holders = [p for p in set(self.tok) | set(self.pend) if self.tok[p] + self.pend[p] > 0]
        if k and (len(holders) != 1 or self.tok[holders[0]] + self.pend[holders[0]] != k):
            self.flag("accumulation", last,
                      f"{k} leftover tokens spread over {len(holders)} nodes")


def run_checkers(log: ExecutionLog, inst: str = "tf", **kw) -> CheckReport:
    """Check every invariant on a full log; see :class:`LogChecker`."""
    return LogChecker(log, inst=inst, **kw).run()
