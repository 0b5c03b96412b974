"""Leader election on top of Team Formation.

Each node becomes a candidate with probability c_le ln(n)/n and injects one
token.  The node that completes a team of sigma_le tokens is the leader; TERM
tokens then tell the remaining candidates to stand down.
"""

from collections import Counter

from teamform import RunConfig, run

for impl in ("accumulation_based", "term_tokens"):
    cfg = RunConfig(experiment="le_implicit", n=128, epsilon=0.1, term_impl=impl)
    print(f"{impl}: sigma_le = {cfg.team_size}")
    for seed in range(5):
        out = run(cfg, seed).outcome
        counts = Counter(out.status.values())
        print(f"  seed {seed}: {out.T} candidates, leaders {out.leaders}, "
              f"in window {out.in_window}, statuses {dict(counts)}")

cfg = RunConfig(experiment="le_explicit", n=128, epsilon=0.1)
out = run(cfg, 3).outcome
print(f"\nexplicit variant: leader {out.leaders}, {out.announcements} announcements, "
      f"{len(set(out.port_map.values()))} distinct leader port(s) learned")
