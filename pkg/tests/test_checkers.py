import copy

import pytest

from teamform import channel, principal
from teamform.checkers import LogChecker, run_checkers
from teamform.config import RunConfig
from teamform.kernel import TICKS_PER_UNIT, fmt_time, parse_time
from teamform.runner import check, run

U = TICKS_PER_UNIT


def small(seed=0, **kw):
    d = dict(n=16, sigma=3, injections={"random": {"total": 9, "span": 5, "sigma": 2}}, seed=seed)
    d.update(kw)
    return RunConfig.from_dict(d)


@pytest.fixture(scope="module")
def clean():
    return run(small(seed=1))


def recheck(res, records):
    log = copy.copy(res.log)
    log.records = records
    return check(log, res.pu, "tf", res.config.sigma)


class TestClean:
    def test_empty_report(self, clean):
        rep = clean.reports["tf"]
        assert rep.ok and rep.violations == []
        assert rep.summary() == "0 violations"

    def test_analysis_filled(self, clean):
        an = clean.reports["tf"].analysis
        assert an.phase_ends and an.operational
        assert an.end_time > 0

    def test_run_checkers_helper(self, clean):
        rep = run_checkers(clean.log, "tf", sigma=3)
        assert rep.ok


class TestTamperedLogs:
    def test_team_of_wrong_size(self, clean):
        recs = list(clean.log.records)
        i = next(i for i, r in enumerate(recs) if r[2] == "team")
        r = recs[i]
        recs[i] = r[:6] + (r[6] + 1,) + r[7:]
        assert "team-size" in recheck(clean, recs).by_check()

    def test_delay_too_long(self, clean):
        recs = list(clean.log.records)
        i = next(i for i, r in enumerate(recs) if r[2] == "send")
        r = recs[i]
        d = dict(r[7], at=fmt_time(r[0] + 2 * U))
        recs[i] = r[:7] + (d,)
        assert "delay-bound" in recheck(clean, recs).by_check()

    def test_overtaking(self, clean):
        recs = list(clean.log.records)
        sends = {}
        pair = None
        for r in recs:
            if r[2] == "send":
                link = (r[3] % 16, r[4] % 16)
                if link in sends and parse_time(r[7]["at"]) > parse_time(sends[link][7]["at"]):
                    pair = (sends[link][7]["eid"], r[7]["eid"])
                    break
                sends[link] = r
        a, b = pair
        swapped = []
        for r in recs:
            if r[2] == "deliver" and r[7]["eid"] in pair:
                r = r[:7] + (dict(r[7], eid=b if r[7]["eid"] == a else a),)
            swapped.append(r)
        assert "FIFO" in recheck(clean, swapped).by_check()

    def test_deleted_token(self, clean):
        recs = list(clean.log.records)
        i = next(i for i, r in enumerate(recs) if r[2] == "inject")
        r = recs[i]
        recs[i] = r[:6] + (r[6] + 1,) + r[7:]
        rep = recheck(clean, recs)
        assert not rep.ok


class TestMutations:
    """Deliberately broken protocols must be caught."""

    def test_skipped_channel_ack(self, monkeypatch):
        orig = channel.ChannelEndpoint._send

        def no_ack(self, u, kind, k=0, tag=None):
            if kind != channel.CHANNEL_ACK:
                orig(self, u, kind, k, tag)

        monkeypatch.setattr(channel.ChannelEndpoint, "_send", no_ack)
        found = set()
        for s in range(3):
            found |= set(run(small(seed=s)).reports["tf"].by_check())
        assert "table9" in found

    def test_transport_above_sigma(self, monkeypatch):
        monkeypatch.setattr(principal.SizeRule, "can_form", lambda self, tok, bag: False)
        found = set()
        for s in range(3):
            found |= set(run(small(seed=s)).reports["tf"].by_check())
        assert "transport-above-sigma" in found

    def test_team_below_sigma(self, monkeypatch):
        monkeypatch.setattr(principal.SizeRule, "can_form",
                            lambda self, tok, bag: tok >= self.sigma - 1)
        orig = principal.SizeRule.form

        def form(self, bag):
            s = self.sigma
            self.sigma = s - 1
            try:
                return orig(self, bag)
            finally:
                self.sigma = s

        monkeypatch.setattr(principal.SizeRule, "form", form)
        found = set()
        for s in range(3):
            found |= set(run(small(seed=s)).reports["tf"].by_check())
        assert "team-size" in found


def test_limits_detail_per_check(clean, monkeypatch):
    monkeypatch.setattr(LogChecker, "MAX_PER_CHECK", 2)
    recs = []
    for r in clean.log.records:
        if r[2] == "send":
            r = r[:7] + (dict(r[7], at=fmt_time(r[0] + 2 * U)),)
        recs.append(r)
    rep = recheck(clean, recs)
    delay = [v for v in rep.violations if v.check == "delay-bound"]
    assert len(delay) > 2
    assert len([v for v in delay if v.message != "(further)"]) == 2


class TestChannelGeneration:
    """The four-unit channel-generation window, probed with scripted schedules."""

    @staticmethod
    def scripted(injections, **kw):
        cfg = RunConfig(n=8, sigma=2, policy="constant_max_delay", injections=injections, **kw)
        return run(cfg, seed=0)

    def test_doomed_channel_delays_the_next_one(self):
        # every utility pairs p0 and p1 at 3.25; p0 completes a team at 3.3,
        # before its Channel arrives, so p1 and p2 (busy since 1.2) are only
        # joined at 5.3
        res = self.scripted([{"time": 0, "node": 0, "count": 1},
                             {"time": 0.25, "node": 1, "count": 1},
                             {"time": 1.2, "node": 2, "count": 1},
                             {"time": 3.3, "node": 0, "count": 1}])
        rep = res.reports["tf"]
        assert set(rep.by_check()) == {"G2"}
        assert rep.violations[0].t == parse_time("6/5")
        created = [r[0] for r in res.log.of_kind("chan_create") if r[7]["pair"] == [1, 2]]
        assert min(created) + TICKS_PER_UNIT == parse_time("53/10")

    def test_without_the_extra_token_window_holds(self):
        res = self.scripted([{"time": 0, "node": 0, "count": 1},
                             {"time": 0.25, "node": 1, "count": 1},
                             {"time": 1.2, "node": 2, "count": 1}])
        assert res.ok

    def test_same_colour_primaries_need_no_channel(self):
        cfg = RunConfig(experiment="vtf", n=8, sigma_vec=[2, 2], policy="constant_max_delay",
                        injections=[{"time": 0, "node": 0, "count": 2, "color": 0},
                                    {"time": 10, "node": 3, "count": 2, "color": 0},
                                    {"time": 20, "node": 5, "count": 2, "color": 1}])
        res = run(cfg, seed=0)
        tags = {r[7]["v"] for r in res.log.of_kind("var") if r[5] == "tag"}
        assert tags >= {"L", "R"}
        assert res.ok
        assert len(res.outcome.teams) == 1
