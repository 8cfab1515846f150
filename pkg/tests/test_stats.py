import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmgeval import stats
from oracles import hand_ranks, spearman_by_hand


def test_monotone_and_antitone():
    up = stats.spearman([1, 2, 3], [10, 20, 30])
    assert up.coefficient == 1.0
    assert up.p_value == 0.0
    down = stats.spearman([1, 2, 3], [3, 2, 1])
    assert down.coefficient == -1.0
    assert down.p_value == 0.0


def test_tied_data_matches_hand_ranked_oracle():
    x = [1, 1, 2, 3]
    y = [2, 1, 4, 3]
    got = stats.spearman(x, y)
    assert got.coefficient == pytest.approx(spearman_by_hand(x, y), abs=1e-14)
    assert got.n == 4


def test_error_cases():
    with pytest.raises(ValueError):
        stats.spearman([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        stats.spearman([1, 2], [1, 2])
    with pytest.raises(stats.UndefinedCorrelation):
        stats.spearman([5, 5, 5], [1, 2, 3])
    with pytest.raises(stats.UndefinedCorrelation):
        stats.spearman([1, 2, 3], [7, 7, 7])


def test_invariance_properties():
    rng = random.Random(3)
    x = [rng.random() for _ in range(12)]
    y = [rng.random() for _ in range(12)]
    base = stats.spearman(x, y).coefficient
    transformed = stats.spearman(x, [math.exp(5 * v) for v in y]).coefficient
    assert transformed == pytest.approx(base, abs=1e-14)
    swapped = stats.spearman(y, x).coefficient
    assert swapped == pytest.approx(base, abs=1e-14)
    assert stats.spearman(x, x).coefficient == 1.0


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(min_value=-50, max_value=50), min_size=1, max_size=30))
def test_average_ranks_match_hand_oracle(values):
    got = stats.average_ranks(values)
    assert got.tolist() == hand_ranks(values)


def test_p_value_decreases_with_correlation_strength():
    n = 10
    previous = 1.1
    for rho in (0.05, 0.2, 0.4, 0.6, 0.8, 0.95):
        p = stats._p_value_t(rho, n)
        assert p < previous
        previous = p
    # sign does not matter
    assert stats._p_value_t(-0.6, n) == stats._p_value_t(0.6, n)


def test_betainc_against_scipy():
    special = pytest.importorskip("scipy.special")
    for a, b in [(0.5, 0.5), (2.0, 3.0), (6.5, 0.5), (7.0, 7.0)]:
        for x in (0.0, 0.01, 0.2, 0.5, 0.77, 0.99, 1.0):
            assert stats.betainc(a, b, x) == pytest.approx(
                float(special.betainc(a, b, x)), abs=1e-12
            )


def test_student_t_sf_against_scipy():
    t_dist = pytest.importorskip("scipy.stats").t
    for df in (1, 2, 5, 13, 30):
        for t in (-4.0, -1.0, 0.0, 0.5, 2.0, 8.0):
            assert stats.student_t_sf(t, df) == pytest.approx(
                float(t_dist.sf(t, df)), abs=1e-12
            )


def test_spearman_agrees_with_scipy_on_random_samples():
    sp_stats = pytest.importorskip("scipy.stats")
    rng = random.Random(41)
    for trial in range(25):
        n = rng.randrange(5, 20)
        x = [rng.random() for _ in range(n)]
        # inject ties on some trials
        y = [round(rng.random(), 1 if trial % 3 == 0 else 6) for _ in range(n)]
        got = stats.spearman(x, y)
        want = sp_stats.spearmanr(x, y)
        assert got.coefficient == pytest.approx(float(want.statistic), abs=1e-12)
        assert got.p_value == pytest.approx(float(want.pvalue), abs=1e-9)


def test_exact_permutation_p_value():
    res = stats.spearman([1, 2, 3, 4, 5], [2, 4, 6, 8, 10], method="exact")
    assert res.coefficient == 1.0
    # only the identity and the full reversal reach |rho| = 1
    assert res.p_value == pytest.approx(2 / 120)
    with pytest.raises(ValueError):
        stats.spearman(list(range(11)), list(range(11)), method="exact")
    with pytest.raises(ValueError):
        stats.spearman([1, 2, 3], [1, 2, 3], method="bootstrap")


def test_exact_and_t_methods_agree_in_direction():
    rng = random.Random(8)
    x = [rng.random() for _ in range(8)]
    y = [v + 0.3 * rng.random() for v in x]
    approx = stats.spearman(x, y, method="t")
    exact = stats.spearman(x, y, method="exact")
    assert approx.coefficient == exact.coefficient
    # both should flag a strong positive association
    assert approx.p_value < 0.05
    assert exact.p_value < 0.05


def test_correlation_result_validation():
    with pytest.raises(ValueError):
        stats.CorrelationResult(coefficient=1.5, p_value=0.5, n=10)
    with pytest.raises(ValueError):
        stats.CorrelationResult(coefficient=0.5, p_value=-0.1, n=10)
    with pytest.raises(ValueError):
        stats.CorrelationResult(coefficient=0.5, p_value=0.5, n=2)


def test_descriptive_basics():
    out = stats.descriptive([1, 2, 3])
    assert out["mean"] == 2
    assert out["median"] == 2
    assert stats.descriptive([5])["median"] == 5
    with pytest.raises(ValueError):
        stats.descriptive([])
    with pytest.raises(ValueError):
        stats.descriptive([1], bucket_width=0)


def test_descriptive_histogram_buckets():
    out = stats.descriptive([0, 10, 49, 50, 120], bucket_width=50)
    assert out["histogram"] == [
        {"lo": 0.0, "hi": 50.0, "count": 3},
        {"lo": 50.0, "hi": 100.0, "count": 1},
        {"lo": 100.0, "hi": 150.0, "count": 1},
    ]
    negatives = stats.descriptive([-10, -1, 5], bucket_width=10)
    assert negatives["histogram"][0]["lo"] == -10.0


def test_descriptive_uniform_sample_mean_within_three_sigma():
    rng = random.Random(2026)
    n = 20000
    sample = [rng.random() for _ in range(n)]
    sigma = math.sqrt(1 / 12 / n)
    assert abs(stats.descriptive(sample)["mean"] - 0.5) < 3 * sigma
