"""Randomized run configurations shared by the acceptance and property tests."""

from __future__ import annotations

import random

from teamform.config import RunConfig

POLICIES = ("uniform_random", "constant_max_delay", "anti_gather_heuristic")


def safety_configs(count: int, master_seed: int = 2024):
    """``count`` (config, seed) pairs over n in {8..64}, sigma in {2,3,8}, every policy.

    Half of the runs have a fragile set (epsilon 0.5).  Bursts are sized in
    multiples of sigma and separated by long gaps, so the system goes
    quiescent between them and fragile nodes toggle mid-run.
    """
    rng = random.Random(master_seed)
    out = []
    for i in range(count):
        n = rng.choice((8, 16, 32, 64))
        sigma = rng.choice((2, 3, 8))
        policy = rng.choice(POLICIES)
        epsilon = rng.choice((1.0, 0.5))
        total = rng.randint(1, 4 * sigma)
        if policy == "anti_gather_heuristic" and rng.random() < 0.5:
            inj = {"spread": {"total": total, "span": rng.choice((0, 5))}}
        else:
            inj = {"random": {"total": total, "span": 5, "bursts": rng.randint(1, 3),
                              "gap": 30, "sigma": sigma, "unit": sigma}}
        cfg = RunConfig.from_dict({"n": n, "sigma": sigma, "policy": policy,
                                   "epsilon": epsilon, "injections": inj, "seed": i})
        out.append(cfg)
    return out


# criterion number -> (passed, detail); filled by the acceptance tests and
# printed at the end of the session
ACCEPTANCE: dict = {}


def report(num: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[num] = (ok, detail)
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
