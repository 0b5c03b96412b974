"""Command-line driver: ``teamform {run,sweep,replay,check-tables,lowerbound}``.

Exit status is 0 on success, 1 when a checker reports violations or a
replay diverges, and 2 on configuration errors.  ``TEAMFORM_OUT`` overrides
the default output directory.
"""

from __future__ import annotations

import argparse
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import lowerbound as lb
from .adversary import stream_seed
from .checkers import LogChecker
from .config import ConfigError, RunConfig
from .kernel import ExecutionLog
from .metrics import CSV_FIELDS
from .pugraph import PUGraph
from .runner import first_divergence, replay_log, run, write_csv


def parse_seeds(text: str) -> list[int]:
    """``"3"``, ``"1..500"`` or ``"1,4,9"``."""
    try:
        if ".." in text:
            a, b = text.split("..")
            return list(range(int(a), int(b) + 1))
        return [int(s) for s in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad seed list {text!r}") from None


def _out_dir(args) -> str:
    return args.out or os.environ.get("TEAMFORM_OUT") or "out"


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    over = {}
    if getattr(args, "policy", None):
        over["policy"] = args.policy
    if getattr(args, "log_events", False):
        over["log_events"] = True
    return cfg.replace(**over) if over else cfg


def _one(job):
    cfg, seed, out, keep_log = job
    res = run(cfg, seed)
    viol = [str(v) for v in res.violations]
    log_path = None
    if keep_log and res.sim is not None:
        log_path = os.path.join(out, f"log_seed{seed}.jsonl")
        res.log.dump(log_path)
    return seed, res.row, viol, log_path


def _execute(cfg: RunConfig, seeds, out: str, workers: int) -> int:
    os.makedirs(out, exist_ok=True)
    jobs = [(cfg, s, out, cfg.log_events) for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_one, jobs))
    else:
        results = [_one(j) for j in jobs]
    rows = [r[1] for r in results]
    fields = lb.CSV_FIELDS if cfg.experiment == "lowerbound" else CSV_FIELDS
    csv_path = os.path.join(out, "metrics.csv")
    write_csv(csv_path, rows, fields)
    bad = [(s, v) for s, _, v, _ in results if v]
    print(f"{len(rows)} run(s), metrics in {csv_path}")
    if cfg.experiment != "lowerbound" and len(rows) > 1:
        loads = [r["load"] for r in rows if r["load"] != ""]
        reacts = [r["reaction_p50"] for r in rows if r["reaction_p50"] != ""]
        if loads:
            print(f"median load {statistics.median(loads):.3f}")
        if reacts:
            print(f"median reaction {statistics.median(reacts):.3f}")
    if bad:
        path = os.path.join(out, "violations.txt")
        with open(path, "w") as fh:
            for s, vs in bad:
                for v in vs:
                    fh.write(f"seed {s}: {v}\n")
        print(f"violations in {len(bad)} run(s), see {path}")
        return 1
    print("0 violations")
    return 0


def cmd_run(args) -> int:
    cfg = _load_config(args)
    seeds = parse_seeds(args.seed) if args.seed is not None else cfg.seed_list()
    return _execute(cfg, seeds, _out_dir(args), args.workers)


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    seeds = parse_seeds(args.seeds) if args.seeds else cfg.seed_list()
    return _execute(cfg, seeds, _out_dir(args), args.workers)


def cmd_replay(args) -> int:
    try:
        log = ExecutionLog.load(args.log)
    except (OSError, ValueError, KeyError, StopIteration) as e:
        print(f"cannot read log: {e}")
        return 2
    with open(args.log) as fh:
        original = [line.rstrip("\n") for line in fh if line.strip()]
    res = replay_log(log)
    fresh = list(res.log.lines())
    i = first_divergence(original, fresh)
    if i is not None:
        seq = i - 1
        print(f"diverged at line {i + 1} (event seq {seq})")
        return 1
    n_viol = len(res.violations)
    print(f"identical, {n_viol} violations")
    for v in res.violations[:50]:
        print(f"  {v}")
    return 1 if n_viol else 0


def _instances(log: ExecutionLog) -> list[str]:
    names = []
    for rec in log.records:
        if rec[2] == "send" and rec[7].get("inst") not in ("trace", "app", None):
            name = rec[7]["inst"]
            if name not in names:
                names.append(name)
    return names or ["tf"]


def cmd_check_tables(args) -> int:
    try:
        log = ExecutionLog.load(args.log)
    except (OSError, ValueError, KeyError, StopIteration) as e:
        print(f"cannot read log: {e}")
        return 2
    head = log.header
    cfg = head.get("config", {})
    pu = PUGraph(log.n, cfg.get("c", 3.0), head.get("seed", 0))
    U = [pu.utilities(p) for p in range(log.n)]
    vec = head.get("sigma_vec")
    total = 0
    for name in _instances(log):
        pair = name.startswith("d")
        sigma = head.get("sigma")
        if vec is not None and name.startswith("c"):
            sigma = vec[int(name[1:])]
        rep = LogChecker(log, inst=name, sigma=2 if pair else sigma, utilities=U,
                         pair_rule=pair or None).run()
        print(f"{name}: {rep.summary()}")
        for v in rep.violations[:50]:
            print(f"  {v}")
        total += len(rep.violations)
    return 1 if total else 0


def cmd_lowerbound(args) -> int:
    if args.config:
        cfg = RunConfig.load(args.config)
        n, sigma, f, trials, mode = cfg.n, cfg.sigma, cfg.f, cfg.trials, cfg.mode
        seed = cfg.seed
    else:
        n, sigma, f, trials, mode, seed = args.n, args.sigma, args.f, args.trials, args.mode, 0
    if args.seed is not None:
        seed = parse_seeds(args.seed)[0]
    if None in (n, sigma, f):
        raise ConfigError("lowerbound needs --n, --sigma and --f (or --config)")
    prm = lb.CEParams(n, sigma, f)
    try:
        prm.validate()
    except lb.RegimeError as e:
        raise ConfigError(str(e)) from None
    rng = np.random.default_rng(stream_seed(seed, 17))
    res = lb.simulate_ce(prm, trials, rng, mode)
    row = lb.csv_row(res)
    out = _out_dir(args)
    path = os.path.join(out, "lowerbound.csv")
    write_csv(path, [row], lb.CSV_FIELDS)
    se = (row["p_no_hit_exact"] * (1 - row["p_no_hit_exact"]) / trials) ** 0.5
    print(f"p={prm.p:.4f} P[H=0] exact={row['p_no_hit_exact']:.4g} "
          f"empirical={row['p_no_hit_emp']:.4g} (se {se:.2g}); hit rate {res.hit_rate:.4g}")
    if row["tail_bound"] != "":
        print(f"P[H >= sigma-1]={row['tail_emp']:.4g} bound={row['tail_bound']:.4g}")
    print(f"written {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="teamform", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, seeds_flag):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument(seeds_flag, default=None,
                       help="seed, range a..b, or comma list (overrides the config)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--log-events", action="store_true", help="write full JSONL event logs")
        p.add_argument("--policy", default=None, help="override the adversary policy")
        p.add_argument("--workers", type=int, default=1, help="parallel worker processes")

    p = sub.add_parser("run", help="run the configured experiment")
    common(p, "--seed")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="run a range of seeds")
    common(p, "--seeds")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("replay", help="re-run a logged run and compare byte for byte")
    p.add_argument("log")
    p.set_defaults(func=cmd_replay)
    p = sub.add_parser("check-tables", help="run every checker over a JSONL log")
    p.add_argument("log")
    p.set_defaults(func=cmd_check_tables)
    p = sub.add_parser("lowerbound", help="Monte-Carlo of the central-entity process")
    p.add_argument("--config", default=None)
    p.add_argument("--n", type=int)
    p.add_argument("--sigma", type=int)
    p.add_argument("--f", type=int)
    p.add_argument("--trials", type=int, default=100000)
    p.add_argument("--mode", choices=lb.MODES, default="bernoulli")
    p.add_argument("--seed", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_lowerbound)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (TypeError, KeyError) as e:
        if args.cmd in ("run", "sweep"):
            print(f"config error: {e}", file=sys.stderr)
            return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
