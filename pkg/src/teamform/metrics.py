"""Run metrics, potentials and the statistics built on top of them."""

from __future__ import annotations

import bisect
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .channel import CODES
from .kernel import TICKS_PER_UNIT, ExecutionLog

T = TICKS_PER_UNIT

CHANNEL_KINDS = frozenset(CODES) | {"ChannelAck"}
CSV_FIELDS = ("seed", "n", "sigma", "policy", "messages_total", "load", "reaction_p50",
              "reaction_p95", "teams", "violations")


# -- message load ---------------------------------------------------------
@dataclass
class MetricsLedger:
    """Message and token totals of one run."""

    messages: Counter = field(default_factory=Counter)
    injected: int = 0
    fake: int = 0
    deferred: int = 0
    teams: int = 0
    reaction: list = field(default_factory=list)
    censored: list = field(default_factory=list)

    @property
    def total_messages(self) -> int:
        return sum(self.messages.values())

    @property
    def channel_messages(self) -> int:
        return sum(c for k, c in self.messages.items() if k in CHANNEL_KINDS)

    @property
    def principal_messages(self) -> int:
        return sum(c for k, c in self.messages.items() if k.startswith("Relayed"))

    def by_layer(self) -> dict:
        return {"channel": self.channel_messages, "principal": self.principal_messages,
                "other": self.total_messages - self.channel_messages - self.principal_messages}

    def fake_bound_holds(self) -> bool:
        """Real plus fake injections stay below twice the real ones."""
        return self.injected == 0 or self.injected + self.fake < 2 * self.injected


def tf_message_counts(counts: Counter) -> Counter:
    """Keep only TF messages from a kernel count table (drop reports and app traffic)."""
    keep = CHANNEL_KINDS
    return Counter({k: c for k, c in counts.items() if k in keep or k.startswith("Relayed")})


def message_load(messages: int, injected: int) -> float:
    """Messages per adversary-injected token."""
    if injected < 1:
        raise ValueError("message load needs at least one injected token")
    return messages / injected


def count_messages(log: ExecutionLog, inst: str = "tf") -> Counter:
    """Message counts by type from the send records of a full log."""
    out = Counter()
    for rec in log.of_kind("send"):
        d = rec[7]
        if d.get("inst", "tf") != inst:
            continue
        out[rec[5] if "inner" not in d else f"{rec[5]}:{d['inner']}"] += 1
    return out


def ledger_from_log(log: ExecutionLog, sigma: int, inst: str = "tf",
                    restart_after_team: bool = False) -> MetricsLedger:
    m = MetricsLedger()
    m.messages = count_messages(log, inst)
    for rec in log.records:
        kind = rec[2]
        d = rec[7] or {}
        if d.get("inst", "tf") != inst:
            continue
        if kind == "inject":
            src = d.get("src", "adv")
            if src == "fake":
                m.fake += rec[6]
            elif src == "deferred":
                m.deferred += rec[6]
            else:
                m.injected += rec[6]
        elif kind == "team":
            m.teams += 1
    m.reaction, m.censored = reaction_samples(log, sigma, inst, restart_after_team)
    return m


# -- reaction time --------------------------------------------------------
def token_events(log: ExecutionLog, inst: str = "tf"):
    """(tick, delta, is_team) for adversary injections and formations."""
    out = []
    for rec in log.records:
        kind = rec[2]
        if kind not in ("inject", "team"):
            continue
        d = rec[7] or {}
        if d.get("inst", "tf") != inst:
            continue
        if kind == "inject":
            if d.get("src", "adv") in ("fake", "deferred"):
                continue
            out.append((rec[0], rec[6], False))
        else:
            out.append((rec[0], -rec[6], True))
    return out


def reaction_samples(log: ExecutionLog, sigma: int, inst: str = "tf",
                     restart_after_team: bool = False, end: int | None = None):
    """Reaction samples in units, plus right-censored durations.

    A sample starts when the system-wide token count reaches ``sigma`` and
    ends at the first formation after that.  By default one sample is taken
    per maximal interval with at least ``sigma`` tokens; with
    ``restart_after_team`` a new sample starts at every formation that
    leaves ``sigma`` or more tokens behind.
    """
    if end is None:
        end = log.records[-1][0] if log.records else 0
    samples, censored = [], []
    count = 0
    start = None
    for t, delta, team in token_events(log, inst):
        count += delta
        if team and start is not None:
            samples.append((t - start) / T)
            start = None
            if restart_after_team and count >= sigma:
                start = t
            continue
        if count >= sigma and start is None and not team:
            start = t
        elif count < sigma and not team:
            start = None
    if start is not None:
        censored.append((end - start) / T)
    return samples, censored


# -- potentials -----------------------------------------------------------
@dataclass
class PotentialSnapshot:
    psi: int
    psi_hat: int
    values: dict  # busy primary -> tok + R


def potential_psi(tok: dict, R: dict | None = None) -> int:
    """Sum over busy primaries of ``tok + R - 1``."""
    R = R or {}
    return sum(t + R.get(p, 0) - 1 for p, t in tok.items() if t > 0)


def potential_psi_hat(tok: dict, R: dict | None = None) -> int:
    """Sum of the two largest ``tok + R`` values (the top value counts twice on a tie)."""
    R = R or {}
    vals = Counter()
    for p, t in tok.items():
        vals[p] += t
    for p, r in R.items():
        vals[p] += r
    top = sorted(vals.values(), reverse=True)[:2]
    return sum(top)


def snapshot(tok: dict, R: dict | None = None) -> PotentialSnapshot:
    R = R or {}
    values = {p: t + R.get(p, 0) for p, t in tok.items() if t > 0}
    return PotentialSnapshot(potential_psi(tok, R), potential_psi_hat(tok, R), values)


# -- statistics over checker analyses -------------------------------------
def _value_at(series, t):
    """Value of a step series [(t, v), ...] at time ``t`` (0 before the first step)."""
    i = bisect.bisect_right(series, (t, math.inf)) - 1
    return series[i][1] if i >= 0 else 0


def retirement_outcomes(analysis):
    """Outcome per operational-channel instance: did it retire within three phases.

    For each endpoint the third phase end strictly after the channel became
    operational bounds the retirement time.  Instances still operational at
    the end of the log are skipped.
    """
    out = []
    for ch, t0, t1, p1, p2 in analysis.operational:
        if t1 is None:
            continue
        ok = True
        for p in (p1, p2):
            ends = analysis.phase_ends.get(p, [])
            i = bisect.bisect_right(ends, t0)
            if len(ends) > i + 2 and ends[i + 2] < t1:
                ok = False
        out.append(ok)
    return out


def stagnant_windows(analysis, sigma: int, window: float = 53.0):
    """Outcomes of non-overlapping windows with no formation and >= sigma tokens.

    Each window starts at a state holding at least ``sigma`` tokens; the
    outcome is whether ``psi_hat`` strictly grew across it.
    """
    w = int(window * T)
    tokens = analysis.tokens
    teams = sorted(analysis.team_times)
    end = analysis.end_time
    out = []
    starts = [t for t, v in tokens]
    i = 0
    t = 0
    while t + w <= end:
        if _value_at(tokens, t) < sigma:
            j = bisect.bisect_right(starts, t)
            nxt = None
            while j < len(tokens):
                if tokens[j][1] >= sigma:
                    nxt = tokens[j][0]
                    break
                j += 1
            if nxt is None:
                break
            t = nxt
            continue
        k = bisect.bisect_right(teams, t)
        if k < len(teams) and teams[k] <= t + w:
            t = teams[k]
            continue
        out.append(_value_at(analysis.psi_hat, t + w) > _value_at(analysis.psi_hat, t))
        t += w
        i += 1
    return out


def binomial_lower_test(successes: int, trials: int, p0: float, alpha: float = 0.01):
    """One-sided test of ``p > p0``; returns (passes, p_value, lower bound)."""
    if trials == 0:
        return False, 1.0, 0.0
    res = stats.binomtest(successes, trials, p0, alternative="greater")
    low = res.proportion_ci(confidence_level=1 - alpha).low
    return res.pvalue < alpha, float(res.pvalue), float(low)


def loglog_slope(xs, ys) -> float:
    slope, _ = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope)


def fit_reaction(sigmas, ns, ys):
    """Nonnegative fit ``y ~ a*sigma + b*ln n + c``; returns (a, b, c, residual norm)."""
    A = np.column_stack([np.asarray(sigmas, float), np.log(np.asarray(ns, float)),
                         np.ones(len(ys))])
    coef, rnorm = optimize.nnls(A, np.asarray(ys, float))
    return float(coef[0]), float(coef[1]), float(coef[2]), float(rnorm)


def percentile(xs, q):
    return float(np.percentile(xs, q)) if len(xs) else float("nan")


def csv_row(seed, n, sigma, policy, ledger: MetricsLedger, violations: int) -> dict:
    msgs = ledger.total_messages
    return {"seed": seed, "n": n, "sigma": sigma, "policy": policy,
            "messages_total": msgs,
            "load": round(msgs / ledger.injected, 6) if ledger.injected else "",
            "reaction_p50": round(percentile(ledger.reaction, 50), 6) if ledger.reaction else "",
            "reaction_p95": round(percentile(ledger.reaction, 95), 6) if ledger.reaction else "",
            "teams": ledger.teams, "violations": violations}
