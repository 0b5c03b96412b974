"""Build and run one experiment from a :class:`~teamform.config.RunConfig`."""

from __future__ import annotations

import csv
import os
import random
from dataclasses import dataclass, field

import numpy as np

from . import lowerbound as lb
from .adversary import AntiGather, make_policy, random_injections, stream_seed
from .apps import LeaderElection, TriggerCounter, VectorTF, make_le
from .checkers import CheckReport, LogChecker
from .config import RunConfig
from .kernel import ExecutionLog, Simulator
from .metrics import MetricsLedger, csv_row, ledger_from_log, reaction_samples, tf_message_counts
from .principal import SizeRule
from .protocol import TeamFormation
from .pugraph import PUGraph
from .tracetree import TraceTree

INJECTION_STREAM = 13


@dataclass
class RunResult:
    config: RunConfig
    seed: int
    sim: Simulator | None = None
    pu: PUGraph | None = None
    instances: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)
    metrics: MetricsLedger | None = None
    row: dict = field(default_factory=dict)
    outcome: object = None

    @property
    def log(self) -> ExecutionLog:
        return self.sim.log

    @property
    def violations(self) -> list:
        return [v for r in self.reports.values() for v in r.violations]

    @property
    def ok(self) -> bool:
        return not self.violations


def build_injections(cfg: RunConfig, seed: int, n: int):
    spec = cfg.injections
    if spec is None or isinstance(spec, list):
        return list(spec or [])
    (kind, opts), = spec.items()
    rng = random.Random(stream_seed(seed, INJECTION_STREAM))
    opts = dict(opts)
    total = opts.pop("total")
    if kind == "random":
        return random_injections(n, total, rng, **opts)
    return AntiGather.spread(n, total, rng, **opts)


def build_policy(cfg: RunConfig, seed: int, *, epsilon=None, injections=None):
    kw = {"seed": seed, "epsilon": cfg.epsilon if epsilon is None else epsilon,
          "injections": build_injections(cfg, seed, cfg.n) if injections is None else injections,
          "fragile_size": cfg.fragile_size, "toggles": cfg.toggles}
    if cfg.policy == "scripted":
        kw["script"] = cfg.script
    return make_policy(cfg.policy, cfg.n, **kw)


def _header(cfg: RunConfig, seed: int, policy, sigma) -> dict:
    return {"version": 1, "config": cfg.to_dict(), "seed": seed, "sigma": sigma,
            "fragile": sorted(policy.fragile_set(cfg.n))}


def _simulator(cfg, seed, policy, sigma, verbose=None):
    if verbose is None:
        verbose = cfg.checkers or cfg.log_events
    return Simulator(cfg.n, policy, verbose=verbose, max_time=cfg.horizon(),
                     header=_header(cfg, seed, policy, sigma))


def _finish(sim: Simulator) -> None:
    sim.log.header["settled"] = sim.settled()
    sim.log.header["truncated"] = sim.truncated


def check(log: ExecutionLog, pu: PUGraph, inst: str = "tf", sigma=None,
          pair_rule: bool = False) -> CheckReport:
    U = [pu.utilities(p) for p in range(log.n)]
    return LogChecker(log, inst=inst, sigma=sigma, utilities=U,
                      pair_rule=pair_rule or None).run()


def run_tf(cfg: RunConfig, seed: int) -> RunResult:
    """Plain TF (also used by the conformance and trigger-counting experiments)."""
    sigma = cfg.team_size
    policy = build_policy(cfg, seed)
    sim = _simulator(cfg, seed, policy, sigma)
    pu = PUGraph(cfg.n, cfg.c, seed)
    trace = TraceTree(sim) if cfg.trace else None
    res = RunResult(cfg, seed, sim, pu)
    if cfg.experiment == "dtc":
        app = TriggerCounter(sim, pu, sigma, seed=seed, trace=trace)
        tf = app.tf
        res.outcome = app
    else:
        tf = TeamFormation(sim, pu, SizeRule(sigma), seed=seed, trace=trace)
    res.instances = {"tf": tf}
    if trace is not None:
        res.instances["trace"] = trace
    sim.start()
    sim.run()
    _finish(sim)
    if cfg.checkers:
        res.reports["tf"] = check(sim.log, pu, "tf", sigma)
    res.metrics = _metrics(cfg, sim, sigma)
    res.row = csv_row(seed, cfg.n, sigma, cfg.policy, res.metrics, len(res.violations))
    return res


def _metrics(cfg, sim, sigma, inst="tf") -> MetricsLedger:
    m = ledger_from_log(sim.log, sigma, inst, cfg.restart_after_team)
    m.messages = tf_message_counts(sim.counts)
    return m


def run_le(cfg: RunConfig, seed: int) -> RunResult:
    sigma = cfg.team_size
    # at least (1/2 + eps) n nodes stay non-faulty
    policy = build_policy(cfg, seed, epsilon=min(1.0, 0.5 + cfg.epsilon), injections=[])
    sim = _simulator(cfg, seed, policy, sigma)
    pu = PUGraph(cfg.n, cfg.c, seed)
    le = make_le(sim, pu, sigma, cfg.c_le, term_impl=cfg.term_impl,
                 explicit=cfg.experiment == "le_explicit", seed=seed)
    sim.start()
    le.start()
    sim.run()
    _finish(sim)
    res = RunResult(cfg, seed, sim, pu, {"tf": le.tf, "app": le})
    if cfg.checkers:
        res.reports["tf"] = check(sim.log, pu, "tf", sigma)
    res.metrics = _metrics(cfg, sim, sigma)
    res.outcome = le.outcome()
    res.row = csv_row(seed, cfg.n, sigma, cfg.policy, res.metrics, len(res.violations))
    return res


def run_vtf(cfg: RunConfig, seed: int) -> RunResult:
    policy = build_policy(cfg, seed)
    sim = _simulator(cfg, seed, policy, None)
    sim.log.header["sigma_vec"] = list(cfg.sigma_vec)
    pu = PUGraph(cfg.n, cfg.c, seed)
    app = VectorTF(sim, pu, cfg.sigma_vec, seed=seed)
    sim.start()
    sim.run()
    _finish(sim)
    res = RunResult(cfg, seed, sim, pu, {tf.name: tf for tf in app.instances()}, outcome=app)
    if cfg.checkers:
        for i, tf in enumerate(app.base):
            res.reports[tf.name] = check(sim.log, pu, tf.name, cfg.sigma_vec[i])
        for tf in app.diff.values():
            res.reports[tf.name] = check(sim.log, pu, tf.name, 2, pair_rule=True)
    res.metrics = _metrics(cfg, sim, cfg.sigma_vec[0], "c0")
    res.metrics.teams = len(app.teams)
    res.row = csv_row(seed, cfg.n, cfg.sigma_vec, cfg.policy, res.metrics, len(res.violations))
    return res


def run_lowerbound(cfg: RunConfig, seed: int) -> RunResult:
    prm = lb.CEParams(cfg.n, cfg.sigma, cfg.f)
    rng = np.random.default_rng(stream_seed(seed, 17))
    out = lb.simulate_ce(prm, cfg.trials, rng, cfg.mode)
    return RunResult(cfg, seed, outcome=out, row=lb.csv_row(out))


RUNNERS = {"tf": run_tf, "conformance": run_tf, "dtc": run_tf, "le_implicit": run_le,
           "le_explicit": run_le, "vtf": run_vtf, "lowerbound": run_lowerbound}


def run(cfg: RunConfig, seed: int | None = None) -> RunResult:
    """Run one seed of the configured experiment."""
    return RUNNERS[cfg.experiment](cfg, cfg.seed if seed is None else seed)


def replay_log(log: ExecutionLog) -> RunResult:
    """Re-run the configuration and seed embedded in a log header."""
    cfg = RunConfig.from_dict(log.header["config"])
    return run(cfg, log.header["seed"])


def first_divergence(a: list[str], b: list[str]):
    """Index of the first differing line, or None when identical."""
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    if len(a) != len(b):
        return min(len(a), len(b))
    return None


def write_csv(path, rows, fieldnames) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)
