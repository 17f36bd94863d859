"""Reference rejection rate of the sign-change test under Exponential(1) - 1.

Stand-alone on purpose: it shares no code with the package, so the frozen
value in tests/test_acceptance.py is an independent check of the harness.

    python tools/size_distortion_oracle.py --reps 1000000 --seed 20240611
"""

import argparse
import itertools
import math

import numpy as np


def rejection_rate(n, level, reps, seed, block=50_000):
    signs = np.array(list(itertools.product([1.0, -1.0], repeat=n)))  # (M, n)
    M = len(signs)
    k = M - math.floor(M * level + 1e-9)
    rng = np.random.Generator(np.random.PCG64(seed))
    total, done = 0.0, 0
    while done < reps:
        r = min(block, reps - done)
        x = rng.exponential(1.0, (r, n)) - 1.0
        stats = np.abs(x @ signs.T) / n  # |mean| of every signed copy
        obs = stats[:, 0]  # first sign vector is all +1
        ordered = np.sort(stats, axis=1)
        crit = ordered[:, k - 1]
        above = (stats > crit[:, None]).sum(axis=1)
        ties = (stats == crit[:, None]).sum(axis=1)
        a = (M * level - above) / ties
        phi = np.where(obs > crit, 1.0, np.where(obs == crit, a, 0.0))
        total += phi.sum()
        done += r
    return total / reps


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=5)
    ap.add_argument("--level", type=float, default=0.05)
    ap.add_argument("--reps", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=20240611)
    a = ap.parse_args()
    rate = rejection_rate(a.n, a.level, a.reps, a.seed)
    se = math.sqrt(rate * (1 - rate) / a.reps)
    print(f"rate={float(rate)!r} se={se!r} reps={a.reps} seed={a.seed}")
