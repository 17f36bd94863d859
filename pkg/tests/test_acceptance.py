"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from oracles import matrix_power_order, realizable_count_diffs
from randhyp import core
from randhyp.dense_construct import (
    WidthBoundViolated,
    match_moment_density,
    match_quantile_density,
    match_variance_density,
    numeric_check_mixture,
)
from randhyp.engine import group_average_phi_levels
from randhyp.finite_null import (
    EqualMass,
    Moment,
    NullSpec,
    Quantile,
    SymmetricAboutZero,
    decide_randomization_hypothesis,
)
from randhyp.groups import (
    BLOCK_ROTATION,
    block_rotation_group,
    haar_orthogonal,
    permutation_group,
    sign_change_group,
    verify_group_axioms,
)
from randhyp.linear_classify import GroupClassification as GC
from randhyp.linear_classify import classify_generator, empirical_invariance_check
from randhyp.mc_harness import estimate_rejection_rate

# Exponential(1) - 1, n = 5, abs_mean, level 0.05, sign-change group:
#   python3 tools/size_distortion_oracle.py --reps 1000000 --seed 20240611
ORACLE_RATE = 0.086248
ORACLE_SE = 0.00028072991022689404


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail, elapsed):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}  {detail}  ({elapsed:.2f}s)")
    return emit


def test_criterion_1_exact_level_identity(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    levels = [0.05, 0.1, 1 / 3]
    stats = ["mean", "abs_mean", "t_stat"]
    worst, checks = 0.0, 0
    groups = {}
    for i in range(200):
        n = int(rng.integers(2, 11))
        # every fourth sample is integer-valued so that ties occur
        x = rng.integers(-2, 3, n).astype(float) if i % 4 == 0 else rng.standard_normal(n) * rng.uniform(0.1, 5)
        fams = [("sign", n)] + ([("perm", n)] if n <= 9 else [])
        for fam in fams:
            if fam not in groups:
                groups[fam] = sign_change_group(n) if fam[0] == "sign" else permutation_group(n, mode="full")
            for s in stats:
                vals = group_average_phi_levels(x, groups[fam], s, levels)
                for lv, v in zip(levels, vals):
                    worst = max(worst, abs(v - lv))
                    checks += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 10
    report(1, ok, f"{checks} averages, max |avg phi - level| = {worst:.2e}", elapsed)
    assert worst <= 1e-12
    assert elapsed < 10


@pytest.mark.slow
def test_criterion_2_monte_carlo_exactness(report):
    results = []
    t0 = time.perf_counter()
    est = estimate_rejection_rate("normal", sign_change_group(10), "abs_mean", 0.05, 10, 100_000, seed=101)
    results.append(("sign-change N(0,1) n=10", est, time.perf_counter() - t0))
    t0 = time.perf_counter()
    G = block_rotation_group(9).realize()
    est = estimate_rejection_rate("normal_3_4", G, "max_abs", 0.05, 9, 100_000, seed=202)
    results.append(("block-rotation N(3,4) n=9", est, time.perf_counter() - t0))
    ok = all(abs(e.rate - 0.05) <= 0.0035 and dt < 120 for _, e, dt in results)
    detail = "; ".join(f"{name}: {e.rate:.5f} [{e.ci_lo:.5f}, {e.ci_hi:.5f}]" for name, e, _ in results)
    report(2, ok, detail, sum(dt for *_, dt in results))
    for _, e, dt in results:
        assert abs(e.rate - 0.05) <= 0.0035
        assert dt < 120


def test_criterion_3_witness_decisions(report):
    t0 = time.perf_counter()
    out = []
    sym = decide_randomization_hypothesis(NullSpec(core.Alphabet((-1.0, 0.0, 1.0)), SymmetricAboutZero()), 1)
    out.append(sym.status == "satisfied" and sorted(sym.witness[0] + sym.witness[1]) == [-1.0, 1.0]
               and len(sym.group) == 2 and verify_group_axioms(sym.group).passes)
    eq = decide_randomization_hypothesis(NullSpec(core.Alphabet((-1.0, 0.0, 1.0)), EqualMass(-1.0, 1.0)), 1)
    swapped = eq.group[1].apply(np.array([-1.0, 0.0, 1.0])).tolist() if eq.group else None
    out.append(eq.status == "satisfied" and swapped == [1.0, 0.0, -1.0] and verify_group_axioms(eq.group).passes)
    r2 = math.sqrt(2)
    edge = decide_randomization_hypothesis(NullSpec(core.Alphabet((-1.0, 0.0, 1.0, r2)), Moment(2, 1.0)), 1)
    out.append(edge.status == "satisfied" and {edge.witness[0][0], edge.witness[1][0]} == {0.0, r2}
               and verify_group_axioms(edge.group).passes)
    elapsed = time.perf_counter() - t0
    ok = all(out) and elapsed < 1
    report(3, ok, f"symmetric / equal-mass / edge case: {out}", elapsed)
    assert all(out)
    assert elapsed < 1


def _ledger_ok(spec, n):
    v = decide_randomization_hypothesis(spec, n)
    expected = realizable_count_diffs(n, spec.alphabet.K)
    entries = v.ledger
    worst_violation = min(abs(e.violation) for e in entries)
    worst_residual = max(e.residual for e in entries)
    ok = (v.status == "not_satisfied" and {e.d for e in entries} == expected
          and all(e.status == "no" and min(e.counterexample) >= 0 for e in entries)
          and worst_violation > 1e-6 and worst_residual <= 1e-10)
    return ok, len(entries), worst_violation, worst_residual


def test_criterion_4_impossibility_at_desk_scale(report):
    t0 = time.perf_counter()
    moment = _ledger_ok(NullSpec(core.Alphabet((1.0, 2.0, 3.0, 4.0, 5.0)), Moment(1, 3.0)), 2)
    quant = _ledger_ok(NullSpec(core.Alphabet((0.0, 1.0, 2.0, 3.0)), Quantile(1.5, 0.3)), 2)
    elapsed = time.perf_counter() - t0
    ok = moment[0] and quant[0] and elapsed < 60
    detail = (f"moment: {moment[1]} diffs, min|viol|={moment[2]:.3g}, max resid={moment[3]:.1e}; "
              f"quantile: {quant[1]} diffs, min|viol|={quant[2]:.3g}, max resid={quant[3]:.1e}")
    report(4, ok, detail, elapsed)
    assert moment[0] and quant[0]
    assert elapsed < 60


def test_criterion_5_classifier_table(report):
    t0 = time.perf_counter()
    A = np.asarray(BLOCK_ROTATION)
    cases = [
        (np.eye(3), GC.ALL_DISTRIBUTIONS),
        (-np.eye(3), GC.SYMMETRIC_ABOUT_ZERO),
        (np.diag([2.0, 0.5, 1.0]), GC.EMPTY),
        (haar_orthogonal(3, np.random.default_rng(7)), GC.GAUSSIAN_ZERO_MEAN),
        (A, GC.GAUSSIAN_ANY_MEAN_VAR),
    ]
    got = [classify_generator(M) for M, _ in cases]
    order = matrix_power_order(A.tolist())
    row_err = float(np.max(np.abs(A @ np.ones(3) - 1.0)))
    elapsed = time.perf_counter() - t0
    ok = got == [e for _, e in cases] and order == 6 and row_err <= 1e-12 and elapsed < 1
    report(5, ok, f"labels {[g.value for g in got]}, order(A)={order}, |A1-1|={row_err:.1e}", elapsed)
    assert got == [e for _, e in cases]
    assert order == 6 and row_err <= 1e-12
    assert elapsed < 1


def _random_base(rng, m_max=4, span=3.0, max_width=0.3):
    m = int(rng.integers(1, m_max + 1))
    starts = np.sort(rng.uniform(-span, span, m))
    ivs = []
    prev_end = -np.inf
    for s in starts:
        a = max(s, prev_end + 0.01)
        b = a + rng.uniform(0.02, max_width)
        ivs.append((a, b))
        prev_end = b
    w = rng.uniform(0.1, 1.0, m)
    w /= w.sum()
    h = [wi / (b - a) for wi, (a, b) in zip(w, ivs)]
    d = core.PiecewiseDensity(tuple(ivs), tuple(h))
    return core.PiecewiseDensity(d.intervals, tuple(x / d.mass() for x in d.heights))


def test_criterion_6_constructors(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(66)
    worst_mass, worst_target, count = 0.0, 0.0, 0
    for i in range(50):
        t = (1, 2, 3)[i % 3]
        beta = rng.uniform(-4, 4) if t % 2 else rng.uniform(1.0, 16.0)
        for c in (
            match_moment_density(_random_base(rng), t, beta),
            match_quantile_density(_random_base(rng), rng.uniform(-2, 2), rng.uniform(0.05, 0.95)),
            match_variance_density(_random_base(rng), rng.uniform(0.05, 10.0)),
        ):
            chk = numeric_check_mixture(c)
            worst_mass = max(worst_mass, chk.total_mass_error)
            worst_target = max(worst_target, chk.target_residual)
            count += 1
    try:
        match_moment_density(core.PiecewiseDensity.uniform(3.0, 4.0), 2, 1.0)
        typed = False
    except WidthBoundViolated:
        typed = True
    elapsed = time.perf_counter() - t0
    ok = worst_mass < 1e-10 and worst_target < 1e-8 and typed and elapsed < 30
    report(6, ok, f"{count} mixtures, max mass err={worst_mass:.1e}, max target resid={worst_target:.1e}, "
                  f"width-bound error raised={typed}", elapsed)
    assert worst_mass < 1e-10 and worst_target < 1e-8
    assert typed
    assert elapsed < 30


@pytest.mark.slow
def test_criterion_7_rotation_invariance_demo(report):
    t0 = time.perf_counter()
    R = np.array([[1.0, -1.0], [1.0, 1.0]]) / math.sqrt(2)
    gauss_passes = sum(empirical_invariance_check(R, "normal", 100_000, seed=s).passed for s in range(100))
    unif = empirical_invariance_check(R, "uniform_sym", 100_000, seed=0)
    elapsed = time.perf_counter() - t0
    ok = gauss_passes >= 99 and not unif.passed and elapsed < 60
    report(7, ok, f"Gaussian passes {gauss_passes}/100; uniform max distance "
                  f"{max(unif.distances):.4f} vs threshold {unif.threshold:.4f}", elapsed)
    assert gauss_passes >= 99
    assert not unif.passed
    assert elapsed < 60


@pytest.mark.slow
def test_criterion_8_size_distortion_report(report):
    t0 = time.perf_counter()
    est = estimate_rejection_rate("exponential_centered", sign_change_group(5), "abs_mean", 0.05, 5, 100_000,
                                  seed=8)
    tol = 5 * math.sqrt(est.se ** 2 + ORACLE_SE ** 2)
    elapsed = time.perf_counter() - t0
    ok = abs(est.rate - ORACLE_RATE) <= tol
    report(8, ok, f"rate {est.rate:.5f}, 95% CI [{est.ci_lo:.5f}, {est.ci_hi:.5f}], "
                  f"oracle {ORACLE_RATE} (tolerance {tol:.5f}), nominal 0.05", elapsed)
    assert abs(est.rate - ORACLE_RATE) <= tol
