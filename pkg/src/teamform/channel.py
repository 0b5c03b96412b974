"""Channel layer: virtual circuits between busy primaries through mediators.

The primary side (:class:`ChannelEndpoint`) announces busy status to its
utilities, keeps them informed of its token count, and registers the
mediators that open channels for it.  The utility side (:class:`Mediator`)
tracks busy primaries, opens one channel at a time between the two richest
of them, and relays principal-layer messages once both ends acknowledged.
"""

from __future__ import annotations

from .kernel import Message, ProtocolError

BUSY = "Busy"
BUSY_ACK = "BusyAck"
TOKENS_UPDATE = "TokensUpdate"
NOT_BUSY = "NotBusy"
CHANNEL = "Channel"
NO_CHANNEL = "NoChannel"
CHANNEL_ACK = "ChannelAck"
RELAYED = "Relayed"

CHANNEL_KINDS = (BUSY, BUSY_ACK, TOKENS_UPDATE, NOT_BUSY, CHANNEL, NO_CHANNEL,
                 CHANNEL_ACK, RELAYED)

# single-letter codes used by the configuration table checker
CODES = {BUSY: "B", TOKENS_UPDATE: "T", NOT_BUSY: "N", BUSY_ACK: "A",
         CHANNEL: "C", NO_CHANNEL: "X"}


class ChannelEndpoint:
    """Primary-side state: ``busy_acked`` and ``meds`` (mediator -> channel id)."""

    __slots__ = ("owner", "busy_acked", "meds")

    def __init__(self, owner):
        self.owner = owner
        self.busy_acked: set[int] = set()
        self.meds: dict[int, int] = {}

    def _send(self, u: int, kind: str, k: int = 0, tag=None) -> None:
        o = self.owner
        o.host.send_to_utility(o.v, u, Message(o.host.name, kind, k, tag))

    def tokens_changed(self, old: int, new: int) -> None:
        """React to a change of the owner's token count."""
        o = self.owner
        if old == 0 and new > 0:
            for u in o.utilities:
                self._send(u, BUSY)
        elif old > 0 and new > old:
            tag = o.tag()
            for u in sorted(self.busy_acked):
                self._send(u, TOKENS_UPDATE, new, tag)
        elif old > 0 and new == 0:
            meds = self.meds
            for u in sorted(self.busy_acked):
                if u not in meds:
                    self._send(u, NOT_BUSY)
            self.busy_acked = set(meds)
            for u in sorted(meds):
                del meds[u]
                self._send(u, NOT_BUSY)
                self.busy_acked.discard(u)
                o.channel_removed(u)
        elif new < old:
            raise ProtocolError(f"token count of p{o.v} dropped from {old} to {new}")

    def receive(self, u: int, msg: Message) -> None:
        o = self.owner
        kind = msg.kind
        if kind == RELAYED:
            if u in self.meds:
                o.relayed(u, msg.inner)
            else:
                o.host.screened(o.v, u, msg.inner)
        elif kind == BUSY_ACK:
            if o.tok > 0:
                self.busy_acked.add(u)
                self._send(u, TOKENS_UPDATE, o.tok, o.tag())
            else:
                self._send(u, NOT_BUSY)
        elif kind == CHANNEL:
            self._send(u, CHANNEL_ACK)
            if o.tok > 0 and u in self.busy_acked:
                if u in self.meds:
                    raise ProtocolError(f"u{u} opened a second channel to p{o.v}")
                self.meds[u] = msg.meta["ch"]
                o.channel_added(u)
        elif kind == NO_CHANNEL:
            if u in self.meds:
                del self.meds[u]
                o.channel_removed(u)
        else:
            raise ProtocolError(f"primary p{o.v} got unexpected {kind}")


class Mediator:
    """Utility-side state: ``busy_toks``, ``chan`` and ``diff``.

    ``busy_toks`` maps a primary to 0 (acknowledged, count unknown) or its
    last reported count; absent keys stand for the undefined value.  Its
    insertion order is the order of last updates, which gives the
    first-come-first-served tie break for free.
    """

    __slots__ = ("host", "u", "busy_toks", "tags", "chan", "chan_id", "diff")

    def __init__(self, host, u: int):
        self.host = host
        self.u = u
        self.busy_toks: dict[int, int] = {}
        self.tags: dict[int, object] = {}
        self.chan: tuple[int, ...] = ()
        self.chan_id = None
        self.diff: dict[int, int] = {}

    def _send(self, p: int, kind: str, meta=None, inner=None) -> None:
        self.host.send_to_primary(self.u, p, Message(self.host.name, kind, inner=inner, meta=meta))

    def receive(self, p: int, msg: Message) -> None:
        kind = msg.kind
        bt = self.busy_toks
        if kind == RELAYED:
            chan = self.chan
            if p in chan and not self.diff.get(p):
                other = chan[1] if chan[0] == p else chan[0]
                self._send(other, RELAYED, inner=msg.inner)
            else:
                self.host.screened(self.host.n + self.u, p, msg.inner)
        elif kind == BUSY:
            if p not in bt:
                bt[p] = 0
                self._send(p, BUSY_ACK)
        elif kind == TOKENS_UPDATE:
            bt.pop(p, None)
            bt[p] = msg.k
            self.tags[p] = msg.tag
            self.create_channel()
        elif kind == NOT_BUSY:
            bt.pop(p, None)
            self.tags.pop(p, None)
            if p in self.chan:
                other = self.chan[1] if self.chan[0] == p else self.chan[0]
                self._send(other, NO_CHANNEL, meta={"ch": self.chan_id})
                self.host.channel_released(self.u, self.chan_id)
                self.chan = ()
                self.chan_id = None
                self.create_channel()
        elif kind == CHANNEL_ACK:
            left = self.diff.get(p, 0) - 1
            if left < 0:
                raise ProtocolError(f"u{self.u} got an unexpected ChannelAck from p{p}")
            if left:
                self.diff[p] = left
            else:
                del self.diff[p]
        else:
            raise ProtocolError(f"utility u{self.u} got unexpected {kind}")

    def create_channel(self) -> None:
        """Open a channel between the two richest busy primaries, if idle."""
        if self.chan:
            return
        cands = [(p, k, self.tags.get(p)) for p, k in self.busy_toks.items() if k > 0]
        if len(cands) < 2:
            return
        pair = self.host.rule.pair(cands)
        if pair is None:
            return
        ch = self.host.channel_opened(self.u, pair)
        self.chan = pair
        self.chan_id = ch
        for p in pair:
            self.diff[p] = self.diff.get(p, 0) + 1
            self._send(p, CHANNEL, meta={"ch": ch})
