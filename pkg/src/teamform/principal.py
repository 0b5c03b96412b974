"""Principal layer: phases of requests and responses over channels.

A busy primary with at least one channel runs phases.  Each phase it flips a
fair coin: a *center* asks every peer for tokens, an *arm* announces that it
is waiting.  An arm that is asked for tokens ships all of them and retires;
a center that collects at least ``sigma`` tokens forms teams.
"""

from __future__ import annotations

from collections import Counter

from .channel import RELAYED, ChannelEndpoint
from .kernel import Message, ProtocolError

TOKENS_PLEASE = "TokensPlease"
WAITING = "Waiting"
NO_TRANSPORT = "NoTransport"
TRANSPORT = "Transport"
GO_ON = "GoOn"

PRINCIPAL_KINDS = (TOKENS_PLEASE, WAITING, NO_TRANSPORT, TRANSPORT, GO_ON)

CENTER = "center"
ARM = "arm"

PLAIN = "tok"  # kind of an ordinary token


class SizeRule:
    """Teams of exactly ``sigma`` tokens of any kinds.

    ``order`` lists token kinds in the order they are consumed by a team;
    kinds not listed come last.
    """

    def __init__(self, sigma: int, order=(PLAIN,)):
        if sigma < 2:
            raise ValueError("team size must be at least 2")
        self.sigma = sigma
        self.order = tuple(order)

    def can_form(self, tok: int, bag: Counter) -> bool:
        return tok >= self.sigma

    def form(self, bag: Counter):
        bag = Counter({k: c for k, c in bag.items() if c > 0})
        kinds = [k for k in self.order if k in bag] + sorted(
            (k for k in bag if k not in self.order), key=str)
        teams = []
        while sum(bag.values()) >= self.sigma:
            team = Counter()
            need = self.sigma
            for k in kinds:
                take = min(need, bag[k])
                if take:
                    team[k] += take
                    bag[k] -= take
                    need -= take
                if not need:
                    break
            teams.append(team)
        return teams, +bag

    def tag(self, bag: Counter):
        return None

    def pair(self, cands):
        """Pick the two largest counts; earlier entries win ties."""
        p1 = None
        for p, k, _ in cands:
            if p1 is None or k > p1[1]:
                p1 = (p, k)
        p2 = None
        for p, k, _ in cands:
            if p != p1[0] and (p2 is None or k > p2[1]):
                p2 = (p, k)
        return (p1[0], p2[0])


class PairRule:
    """Teams of one token of each of two colors (the two-color variant).

    A channel only joins primaries holding opposite colors, so same-color
    tokens never travel towards each other.
    """

    sigma = 2

    def __init__(self, a, b):
        if a == b:
            raise ValueError("pair rule needs two distinct colors")
        self.colors = (a, b)

    def can_form(self, tok: int, bag: Counter) -> bool:
        a, b = self.colors
        return bag[a] > 0 and bag[b] > 0

    def form(self, bag: Counter):
        a, b = self.colors
        t = min(bag[a], bag[b])
        rest = Counter(bag)
        rest[a] -= t
        rest[b] -= t
        return [Counter({a: 1, b: 1}) for _ in range(t)], +rest

    def tag(self, bag: Counter):
        held = [k for k, c in bag.items() if c > 0]
        return held[0] if len(held) == 1 else None

    def pair(self, cands):
        p1 = None
        for p, k, tag in cands:
            if tag is not None and (p1 is None or k > p1[1]):
                p1 = (p, k, tag)
        if p1 is None:
            return None
        p2 = None
        for p, k, tag in cands:
            if tag is not None and tag != p1[2] and (p2 is None or k > p2[1]):
                p2 = (p, k)
        return None if p2 is None else (p1[0], p2[0])


class Principal:
    """Per-primary state of both layers; the channel half lives in ``channel``."""

    __slots__ = ("host", "v", "utilities", "rng", "tok", "bag", "pending", "pending_bag",
                 "phase", "awaiting", "delaying", "channel")

    def __init__(self, host, v: int, utilities, rng):
        self.host = host
        self.v = v
        self.utilities = utilities
        self.rng = rng
        self.tok = 0
        self.bag: Counter = Counter()
        self.pending = 0
        self.pending_bag: Counter = Counter()
        self.phase = None
        self.awaiting: dict[int, bool] = {}
        self.delaying: dict[int, bool] = {}
        self.channel = ChannelEndpoint(self)

    def tag(self):
        return self.host.rule.tag(self.bag)

    # token arrivals ---------------------------------------------------------
    def _gain(self, bag: Counter) -> None:
        old = self.tok
        self.bag.update(bag)
        self.tok = old + sum(bag.values())
        self.channel.tokens_changed(old, self.tok)

    def inject(self, bag: Counter) -> None:
        k = sum(bag.values())
        if k <= 0:
            raise ValueError("injection must carry tokens")
        if self.phase is not None:
            self.pending += k
            self.pending_bag.update(bag)
            return
        self._gain(bag)
        if self.host.rule.can_form(self.tok, self.bag):
            self.form_teams()

    # channel notifications --------------------------------------------------
    def channel_added(self, u: int) -> None:
        self.awaiting[u] = False
        self.delaying[u] = False
        if len(self.channel.meds) == 1:
            self.begin_new_phase()

    def channel_removed(self, u: int) -> None:
        self.awaiting.pop(u, None)
        self.delaying.pop(u, None)
        self.check_end_phase()

    def _send(self, u: int, kind: str, k: int = 0, bag=None) -> None:
        host = self.host
        inner = Message(host.name, kind, k, bag=bag, meta=host.relay_meta(self, u, kind))
        host.send_to_utility(self.v, u, Message(host.name, RELAYED, inner=inner))

    def relayed(self, u: int, msg: Message) -> None:
        kind = msg.kind
        phase = self.phase
        if phase is None:
            raise ProtocolError(f"p{self.v} got {kind} with no phase in progress")
        if kind == TOKENS_PLEASE:
            if phase == CENTER:
                self._send(u, NO_TRANSPORT)
            else:
                self._transport(u)
        elif kind == WAITING:
            if phase == CENTER:
                self.delaying[u] = True
            else:
                self._send(u, GO_ON)
        else:
            self.on_response(u, msg)

    def on_response(self, u: int, msg: Message) -> None:
        kind = msg.kind
        if kind == TRANSPORT:
            self.host.tokens_received(self, u, msg)
            self._gain(msg.bag)
        if (self.phase == ARM and kind == GO_ON) or (self.phase == CENTER and kind != GO_ON):
            self.awaiting[u] = False
            self.check_end_phase()

    # phases -----------------------------------------------------------------
    def _transport(self, u: int) -> None:
        k, bag = self.tok, self.bag
        self._send(u, TRANSPORT, k, bag)
        self.host.transport_sent(self, u, k, bag)
        self.phase = None
        self.host.phase_ended(self, abrupt=True)
        self.tok = 0
        self.bag = Counter()
        self.channel.tokens_changed(k, 0)
        if self.pending:
            self.host.defer(self, self.pending, self.pending_bag, "deferred")
            self.pending = 0
            self.pending_bag = Counter()

    def check_end_phase(self) -> None:
        if self.phase is None or any(self.awaiting.values()):
            return
        self.host.phase_ended(self, abrupt=False)
        if self.pending:
            bag = self.pending_bag
            self.pending = 0
            self.pending_bag = Counter()
            self.host.pending_folded(self, bag)
            self._gain(bag)
        if self.host.rule.can_form(self.tok, self.bag):
            self.form_teams()
        elif not self.channel.meds:
            self.phase = None
        else:
            self.begin_new_phase()

    def begin_new_phase(self) -> None:
        self.phase = CENTER if self.rng.getrandbits(1) else ARM
        self.host.phase_began(self)
        center = self.phase == CENTER
        for u in sorted(self.channel.meds):
            if center:
                self._send(u, TOKENS_PLEASE)
            else:
                if self.delaying[u]:
                    self._send(u, GO_ON)
                self._send(u, WAITING)
            self.delaying[u] = False
            self.awaiting[u] = True

    def form_teams(self) -> None:
        if not self.host.rule.can_form(self.tok, self.bag):
            raise ProtocolError(f"p{self.v} cannot form a team with {self.tok} tokens")
        teams, rest = self.host.rule.form(self.bag)
        old = self.tok
        self.phase = None
        self.tok = 0
        self.bag = Counter()
        self.host.teams_formed(self, teams)
        self.channel.tokens_changed(old, 0)
        r = sum(rest.values())
        if r:
            self.host.defer(self, r, rest, "fake")
