"""The central-entity process behind the message lower bound.

A central entity plays 2f rounds; each hits with probability
p = (3f + 1.5 sigma)/n.  When no round hits, the adversary can keep every
team from forming.  The exact miss probability (1-p)^(2f) is compared with
a Bernoulli Monte-Carlo estimate.  The mechanistic sampler plays the actual
port-exploration game; its per-round hit rate stays below p.
"""

import numpy as np

from teamform.lowerbound import CEParams, no_hit_probability, simulate_ce

rng = np.random.default_rng(17)
for n, sigma, f in [(100, 2, 10), (400, 8, 40), (1000, 20, 60)]:
    prm = CEParams(n, sigma, f)
    exact = no_hit_probability(prm)
    bern = simulate_ce(prm, 200_000, rng).p_no_hit
    mech = simulate_ce(prm, 2_000, rng, mode="mechanistic").hit_rate
    print(f"n={n:5d} sigma={sigma:3d} f={f:3d}  P[no hit] exact={exact:.3e} "
          f"sampled={bern:.3e}  hit rate p={prm.p:.3f} mechanistic={mech:.3f}")
