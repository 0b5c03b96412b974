import pytest

from fakes import FakeHost, plain, principal, relayed
from teamform.channel import (BUSY, BUSY_ACK, CHANNEL, CHANNEL_ACK, NO_CHANNEL, NOT_BUSY,
                              TOKENS_UPDATE, Mediator)
from teamform.kernel import Message, ProtocolError


def msg(kind, k=0, ch=1, tag=None):
    return Message("tf", kind, k, tag=tag, meta={"ch": ch})


class TestEndpoint:
    def test_busy_broadcast(self):
        host = FakeHost()
        pr = principal(host, utilities=range(5))
        pr.inject(plain(2))
        assert host.kinds() == [BUSY] * 5
        assert pr.tok == 2

    def test_busy_ack_gets_update(self):
        host = FakeHost()
        pr = principal(host)
        pr.inject(plain(2))
        host.sent()
        pr.channel.receive(1, msg(BUSY_ACK))
        assert host.sent() == [(0, ("u", 1), TOKENS_UPDATE, None, 2)]
        assert pr.channel.busy_acked == {1}

    def test_increase_updates_acked_only(self):
        host = FakeHost()
        pr = principal(host)
        pr.inject(plain(1))
        pr.channel.receive(2, msg(BUSY_ACK))
        host.sent()
        pr.inject(plain(1))
        assert host.sent() == [(0, ("u", 2), TOKENS_UPDATE, None, 2)]

    def _with_channel(self, host, u=1):
        pr = principal(host, flips=[1])
        pr.inject(plain(1))
        pr.channel.receive(u, msg(BUSY_ACK))
        pr.channel.receive(u, msg(CHANNEL, ch=7))
        return pr

    def test_channel_registered(self):
        host = FakeHost()
        pr = self._with_channel(host)
        kinds = host.kinds()
        assert CHANNEL_ACK in kinds
        assert pr.channel.meds == {1: 7}
        # a new channel starts a phase; coin says center
        assert kinds[-1] == "TokensPlease"

    def test_channel_while_idle_only_acks(self):
        host = FakeHost()
        pr = principal(host)
        pr.channel.receive(1, msg(CHANNEL))
        assert host.kinds() == [CHANNEL_ACK]
        assert pr.channel.meds == {}

    def test_relayed_from_non_mediator_screened(self):
        host = FakeHost()
        pr = principal(host)
        pr.inject(plain(1))
        pr.channel.receive(2, relayed("TokensPlease"))
        assert host.events[-1] == ("screened", 0, 2, "TokensPlease")

    def test_not_busy_clears_meds(self):
        host = FakeHost()
        pr = self._with_channel(host)
        host.sent()
        pr.channel.tokens_changed(1, 0)
        pr.tok = 0
        assert host.kinds() == [NOT_BUSY]
        assert pr.channel.meds == {} and pr.channel.busy_acked == set()

    def test_no_channel_removes_mediator(self):
        host = FakeHost()
        pr = self._with_channel(host)
        pr.channel.receive(1, msg(NO_CHANNEL))
        assert pr.channel.meds == {}

    def test_token_drop_is_an_error(self):
        pr = principal(FakeHost())
        with pytest.raises(ProtocolError):
            pr.channel.tokens_changed(3, 2)


class TestMediator:
    def test_busy_once(self):
        host = FakeHost()
        m = Mediator(host, 0)
        m.receive(1, msg(BUSY))
        m.receive(1, msg(BUSY))
        assert host.kinds() == [BUSY_ACK]
        assert m.busy_toks == {1: 0}

    def test_fcfs_pairing(self):
        host = FakeHost()
        m = Mediator(host, 0)
        for p, k in ((1, 3), (2, 5), (3, 5)):
            m.receive(p, msg(BUSY))
            m.receive(p, msg(TOKENS_UPDATE, k))
        # the first update already paired p1 with p2; free it to recompute
        host.sent()
        m.chan = ()
        m.diff.clear()
        m.create_channel()
        assert m.chan == (2, 3)
        assert [(o[1], o[2]) for o in host.sent()] == [(2, CHANNEL), (3, CHANNEL)]
        assert m.diff == {2: 1, 3: 1}

    def test_single_candidate_no_channel(self):
        host = FakeHost()
        m = Mediator(host, 0)
        m.receive(1, msg(TOKENS_UPDATE, 4))
        assert m.chan == () and host.sent() == []

    def test_busy_channel_no_op(self):
        host = FakeHost()
        m = Mediator(host, 0)
        m.receive(1, msg(TOKENS_UPDATE, 4))
        m.receive(2, msg(TOKENS_UPDATE, 2))
        assert m.chan == (1, 2)
        host.sent()
        m.receive(3, msg(TOKENS_UPDATE, 9))
        assert m.chan == (1, 2) and host.sent() == []

    def _open(self):
        host = FakeHost()
        m = Mediator(host, 0)
        m.receive(1, msg(TOKENS_UPDATE, 4))
        m.receive(2, msg(TOKENS_UPDATE, 2))
        host.sent()
        return host, m

    def test_relay_screened_until_ack(self):
        host, m = self._open()
        m.receive(1, relayed("TokensPlease"))
        assert host.sent() == []
        assert host.events[-1][0] == "screened"
        m.receive(1, msg(CHANNEL_ACK))
        m.receive(1, relayed("TokensPlease"))
        assert host.sent() == [(("u", 0), 2, "Relayed", "TokensPlease", 0)]

    def test_unexpected_ack(self):
        host, m = self._open()
        m.receive(1, msg(CHANNEL_ACK))
        with pytest.raises(ProtocolError):
            m.receive(1, msg(CHANNEL_ACK))

    def test_not_busy_tears_down(self):
        host, m = self._open()
        m.receive(3, msg(TOKENS_UPDATE, 1))
        m.receive(1, msg(NOT_BUSY))
        out = host.sent()
        assert out[0] == (("u", 0), 2, NO_CHANNEL, None, 0)
        # the freed mediator immediately pairs the remaining busy primaries
        assert m.chan == (2, 3)
        assert ("released", 0, 1) in host.events
