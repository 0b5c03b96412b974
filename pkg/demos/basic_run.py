"""Run Team Formation once and look at what happened.

Twelve tokens land on random nodes of a 32-node network.  With sigma = 3 the
protocol gathers them into four teams; the checkers replay the log and
confirm that every invariant held.
"""

from teamform import RunConfig, run
from teamform.kernel import TICKS_PER_UNIT

cfg = RunConfig(n=32, sigma=3, policy="uniform_random",
                injections={"random": {"total": 12, "span": 5}})
res = run(cfg, seed=7)

m = res.metrics
print(f"teams formed:      {m.teams}")
print(f"tokens injected:   {m.injected} (fake {m.fake}, deferred {m.deferred})")
print(f"messages:          {m.total_messages}  {m.by_layer()}")
print(f"reaction times:    {[round(x, 2) for x in m.reaction]}")
print(f"checker verdict:   {res.reports['tf'].summary()}")

print("\nfirst team-formation events:")
for rec in res.log.records:
    if rec[2] == "team":
        print(f"  t={rec[0] / TICKS_PER_UNIT:7.3f} node {rec[3]} {rec[7]}")
