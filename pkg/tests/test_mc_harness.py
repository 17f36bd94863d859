import numpy as np
import pytest

from randhyp import core
from randhyp.engine import phi_batch
from randhyp.groups import SampledGroup, sign_change_group
from randhyp.mc_harness import (
    RateEstimate,
    estimate_rejection_rate,
    rows_to_csv,
    simulate,
    size_study,
)


def test_reps_floor():
    with pytest.raises(core.ValidationError):
        estimate_rejection_rate("normal", sign_change_group(4), reps=10)


def test_same_seed_same_bits():
    a = estimate_rejection_rate("normal", sign_change_group(6), "abs_mean", 0.1, 6, 3000, seed=9)
    b = estimate_rejection_rate("normal", sign_change_group(6), "abs_mean", 0.1, 6, 3000, seed=9)
    assert a == b


def test_threads_do_not_change_result():
    a = estimate_rejection_rate("laplace", sign_change_group(5), "t_stat", 0.05, 5, 4500, seed=2)
    b = estimate_rejection_rate("laplace", sign_change_group(5), "t_stat", 0.05, 5, 4500, seed=2, workers=4)
    assert a == b


def test_stub_phi_batch_is_used():
    calls = []

    def stub(X, G, stat, level):
        calls.append(X.shape)
        return np.full(len(X), 0.5), np.full(len(X), 0.5)

    est = estimate_rejection_rate("normal", sign_change_group(3), "mean", 0.05, 3, 2000, seed=0, phi_batch=stub)
    assert est.rate == 0.5
    assert sum(s[0] for s in calls) == 2000


def test_rate_estimate_standard_error():
    est = RateEstimate.from_values(np.array([1.0, 0.0, 1.0, 0.0]), 0.05)
    assert est.rate == 0.5
    assert est.se == pytest.approx(0.25)
    assert est.ci95 == (est.ci_lo, est.ci_hi)


def test_data_depend_only_on_seed_not_group():
    # blocks are drawn from the seed alone, so two groups see identical samples
    seen = {}

    def grab(tag):
        def stub(X, G, stat, level):
            seen.setdefault(tag, []).append(X.copy())
            return phi_batch(X, G, stat, level)
        return stub

    simulate("normal", sign_change_group(4), "mean", [0.1], 4, 2000, 5, phi_batch=grab("a"))
    simulate("normal", SampledGroup("sign_change", 4, 8, seed=1), "mean", [0.1], 4, 2000, 5, phi_batch=grab("b"))
    assert np.array_equal(np.concatenate(seen["a"]), np.concatenate(seen["b"]))


def test_exact_size_for_sign_change_small():
    est = estimate_rejection_rate("normal", sign_change_group(8), "abs_mean", 0.0625, 8, 20_000, seed=1)
    assert abs(est.rate - 0.0625) <= 5 * est.se


def test_sampled_group_is_also_exact():
    G = SampledGroup("permutation", 6, 40, seed=3)
    est = estimate_rejection_rate("exponential_centered", G, "t_stat", 0.1, 6, 20_000, seed=4)
    # with i.i.d. draws plus identity the test remains exact under exchangeability
    assert abs(est.rate - 0.1) <= 5 * est.se


def test_size_study_rows_and_csv():
    rows = size_study(["normal", "uniform_sym"], [4, 6], [0.05, 0.25], {"kind": "sign_change"}, reps=1000, seed=3)
    assert len(rows) == 8
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == "dgp,n,level,reps,rate,se,ci_lo,ci_hi,seed"
    assert len(text.splitlines()) == 9


def test_group_factory_callable():
    est = estimate_rejection_rate("normal", sign_change_group, "mean", 0.25, 3, 1000, seed=0)
    assert 0 <= est.rate <= 1
