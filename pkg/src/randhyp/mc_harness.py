"""Monte Carlo size studies for the randomization test.

Replicates are generated in fixed blocks of ``BLOCK`` samples, block ``b``
drawing from the ``b``-th child of ``SeedSequence(seed)``.  The data are
therefore a function of ``(seed, dgp, n, reps)`` alone, and results are
reduced in block order so that threading never changes a single bit.
Randomized decisions enter the rate through their fractional value rather
than an auxiliary coin flip.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import engine
from .core import ValidationError
from .dgps import get_dgp
from .groups import BLOCK_ROTATION, DEFAULT_CAP, ExplicitGroup, SampledGroup, block_rotation_group, group_from_json, realize_group
from .linear_classify import empirical_invariance_check
from .statistics import get_statistic

BLOCK = 1000
MIN_REPS = 1000
# cap on floats held by one orbit evaluation
_ORBIT_BUDGET = 4_000_000


@dataclass(frozen=True)
class RateEstimate:
    """Mean rejection rate with a binomial standard error.

    Averaging fractional decisions gives a variance no larger than the
    binomial one, so ``se`` is conservative.
    """

    rate: float
    se: float
    ci_lo: float
    ci_hi: float
    reps: int
    level: float

    @classmethod
    def from_values(cls, phi: np.ndarray, level: float) -> "RateEstimate":
        R = len(phi)
        rate = math.fsum(phi.tolist()) / R
        se = math.sqrt(max(rate * (1.0 - rate), 0.0) / R)
        return cls(rate, se, rate - 1.96 * se, rate + 1.96 * se, R, level)

    @property
    def ci95(self) -> tuple[float, float]:
        return self.ci_lo, self.ci_hi


def _resolve_group(group, n: int, seed):
    if callable(group) and not isinstance(group, (ExplicitGroup, SampledGroup)):
        group = group(n)
    elif isinstance(group, (str, dict)):
        group = group_from_json(group, n=n, seed=seed)
    return group


def _block_results(b, child, draw, group, stat, levels, n, phi_fn):
    rng = np.random.default_rng(child)
    X = draw(rng, (BLOCK if b is None else b, n))
    if isinstance(group, SampledGroup):
        # fresh draws per block keep the sampled elements independent of the data
        gseed = int(child.spawn(1)[0].generate_state(1, dtype=np.uint64)[0])
        G = SampledGroup(group.sampler, group.n, group.draws, gseed, group.include_identity).realize()
    else:
        G = group
    M = len(G)
    step = max(1, _ORBIT_BUDGET // (M * n))
    phis = {lv: [] for lv in levels}
    pvals = []
    for s in range(0, len(X), step):
        for i, lv in enumerate(levels):
            phi, p = phi_fn(X[s:s + step], G, stat, lv)
            phis[lv].append(np.asarray(phi, dtype=float))
            if i == 0:
                pvals.append(np.asarray(p, dtype=float))
    return {lv: np.concatenate(v) for lv, v in phis.items()}, np.concatenate(pvals)


def _default_phi(X, G, stat, level):
    return engine.phi_batch(X, G, stat, level)


def simulate(dgp, group, statistic, levels, n: int, reps: int, seed: int | None = 0,
             phi_batch=None, workers: int = 1):
    """Decisions and p-values for ``reps`` samples of size ``n``.

    Returns ``({level: phi array}, p-value array)``.  ``phi_batch`` replaces
    the engine call ``(X, group, statistic, level) -> (phi, p)``; it exists
    for stubbing.
    """
    if reps < MIN_REPS:
        raise ValidationError(f"reps must be at least {MIN_REPS}")
    draw = get_dgp(dgp)
    stat = get_statistic(statistic)
    levels = [engine.check_level(lv) for lv in levels]
    group = _resolve_group(group, n, seed)
    if not isinstance(group, SampledGroup):
        group = realize_group(group, DEFAULT_CAP)
    phi_fn = phi_batch or _default_phi
    sizes = [BLOCK] * (reps // BLOCK) + ([reps % BLOCK] if reps % BLOCK else [])
    children = np.random.SeedSequence(0 if seed is None else seed).spawn(len(sizes))
    jobs = [(b, c, draw, group, stat, levels, n, phi_fn) for b, c in zip(sizes, children)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _block_results(*a), jobs))
    else:
        parts = [_block_results(*a) for a in jobs]
    phis = {lv: np.concatenate([p[0][lv] for p in parts]) for lv in levels}
    return phis, np.concatenate([p[1] for p in parts])


def estimate_rejection_rate(dgp, group, statistic="abs_mean", level: float = 0.05, n: int = 10,
                            reps: int = 10_000, seed: int | None = 0, phi_batch=None,
                            workers: int = 1) -> RateEstimate:
    """Monte Carlo estimate of ``E[phi]`` under ``dgp``.

    ``group`` may be a group object, a JSON group spec (``n`` is filled in),
    or a callable ``n -> group``.
    """
    phis, _ = simulate(dgp, group, statistic, [level], n, reps, seed, phi_batch, workers)
    return RateEstimate.from_values(phis[level], level)


COLUMNS = ("dgp", "n", "level", "reps", "rate", "se", "ci_lo", "ci_hi", "seed")


def size_study(dgps, ns, levels, group, statistic="abs_mean", reps: int = 10_000,
               seed: int | None = 0, workers: int = 1) -> list[dict]:
    """One row per (dgp, n, level).  All levels for a given (dgp, n) share data."""
    rows = []
    for d_i, dgp in enumerate(dgps):
        for n_i, n in enumerate(ns):
            cell_seed = np.random.SeedSequence(0 if seed is None else seed, spawn_key=(d_i, n_i))
            cell_seed = int(cell_seed.generate_state(1, dtype=np.uint64)[0])
            phis, _ = simulate(dgp, group, statistic, levels, n, reps, cell_seed, workers=workers)
            for lv in levels:
                est = RateEstimate.from_values(phis[lv], lv)
                rows.append({"dgp": dgp if isinstance(dgp, str) else getattr(dgp, "__name__", "custom"),
                             "n": n, "level": lv, "reps": reps, "rate": est.rate, "se": est.se,
                             "ci_lo": est.ci_lo, "ci_hi": est.ci_hi, "seed": seed})
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def gaussian_rotation_demo(n: int = 9, reps: int = 10_000, seed: int | None = 0, level: float = 0.05,
                           statistic="max_abs", mode: str = "cyclic_per_block",
                           check_reps: int = 100_000) -> dict:
    """Block-rotation test under N(3, 4) data versus uniform(0, 1) data.

    Under the Gaussian the rotations preserve the joint law, so the size
    matches ``level``.  Under the uniform they do not: the marginal of a
    rotated coordinate is no longer uniform and the size drifts.
    """
    G = block_rotation_group(n, mode).realize()
    gauss = estimate_rejection_rate("normal_3_4", G, statistic, level, n, reps, seed)
    unif = estimate_rejection_rate("uniform", G, statistic, level, n, reps, seed)
    inv_gauss = empirical_invariance_check(BLOCK_ROTATION, "normal_3_4", check_reps, seed)
    inv_unif = empirical_invariance_check(BLOCK_ROTATION, "uniform", check_reps, seed)
    return {
        "n": n,
        "group_order": len(G),
        "level": level,
        "statistic": get_statistic(statistic).name,
        "gaussian": asdict(gauss),
        "uniform": asdict(unif),
        "invariance_gaussian": inv_gauss.to_json(),
        "invariance_uniform": inv_unif.to_json(),
    }
