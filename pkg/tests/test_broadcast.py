import json
import math

import numpy as np
import pytest
from scipy import stats

from treecast import (
    ParamError,
    assign_color,
    majority_estimator,
    simulate_broadcast,
    validate_params,
)
from treecast.oracle import exact_delta_distribution

VSI0 = validate_params("vsi", alpha=0.0)
VSI1 = validate_params("vsi", alpha=1.0)
SE1 = validate_params("se", alpha=1.0)


def test_assign_color_degenerate(rng):
    assert all(assign_color(1, 0.0, rng) == 1 for _ in range(20))
    assert all(assign_color(1, 1.0, rng) == -1 for _ in range(20))
    with pytest.raises(ParamError):
        assign_color(2, 0.5, rng)
    with pytest.raises(ParamError):
        assign_color(1, -0.1, rng)


def test_assign_color_flip_frequency(rng):
    q = 0.3
    n_draws = 1_000_000
    flips = sum(assign_color(-1, q, rng) == 1 for _ in range(n_draws))
    sigma = math.sqrt(q * (1 - q) / n_draws)
    assert abs(flips / n_draws - q) < 3 * sigma


def test_majority_estimator_signs(rng):
    assert majority_estimator(5, rng) == 1
    assert majority_estimator(-2, rng) == -1


def test_majority_estimator_tie_is_fair_coin(rng):
    n_draws = 100_000
    total = sum(majority_estimator(0, rng) for _ in range(n_draws))
    assert abs(total / n_draws) < 3 / math.sqrt(n_draws)


@pytest.mark.parametrize("method", ["fused", "tree"])
def test_no_flips_all_red(method):
    res = simulate_broadcast(VSI1, 0.0, 100, np.random.default_rng(0), method=method)
    assert res.final.d1 == 100 and res.final.d2 == 99
    assert res.pair_counts == (99, 0, 0, 0)
    res = simulate_broadcast(SE1, 0.0, 100, np.random.default_rng(0), method=method)
    assert res.final.d1 == 100 and res.final.d2 == 2 * 99


@pytest.mark.parametrize("method", ["fused", "tree"])
def test_certain_flip_at_n2(method):
    res = simulate_broadcast(VSI1, 1.0, 2, np.random.default_rng(0), method=method)
    assert res.final.d1 == 0 and res.pair_counts == (0, 1, 0, 0)


def test_unknown_method():
    with pytest.raises(ParamError):
        simulate_broadcast(VSI1, 0.1, 5, np.random.default_rng(0), method="other")


@pytest.mark.parametrize("method", ["fused", "tree"])
def test_pair_count_identities(method):
    for seed in range(40):
        res = simulate_broadcast(
            SE1, 0.3, 60, np.random.default_rng(seed), method=method
        )
        rr, rb, br, bb = res.pair_counts
        assert rr + rb + br + bb == 59
        assert res.final.d1 == 1 + rr + br - rb - bb


def test_negative_d1_frequency_matches_hand_value(rng):
    # two-step enumeration gives P(d1(3) = -1) = q/2
    q = 0.2
    reps = 100_000
    hits = 0
    for _ in range(reps):
        hits += simulate_broadcast(VSI0, q, 3, rng).final.d1 == -1
    sigma = math.sqrt(0.1 * 0.9 / reps)
    assert abs(hits / reps - 0.1) < 4 * sigma


def _chisq_vs_oracle(params, q, n, method, reps=5000):
    dist = exact_delta_distribution(params, q, n)
    keys = sorted(dist.entries)
    index = {k: i for i, k in enumerate(keys)}
    counts = np.zeros(len(keys))
    for i in range(reps):
        res = simulate_broadcast(
            params, q, n, np.random.default_rng(i), method=method
        )
        counts[index[(res.final.d1, res.final.d2)]] += 1
    expected = np.array([dist.entries[k] for k in keys]) * reps
    keep = expected >= 5.0
    obs = np.append(counts[keep], counts[~keep].sum())
    exp = np.append(expected[keep], expected[~keep].sum())
    _, pvalue = stats.chisquare(obs, exp * obs.sum() / exp.sum())
    return pvalue


@pytest.mark.parametrize("method", ["fused", "tree"])
@pytest.mark.parametrize(
    "params,q",
    [(VSI1, 0.25), (validate_params("se", neg_d=3), 0.15)],
)
def test_both_methods_match_oracle(params, q, method):
    assert _chisq_vs_oracle(params, q, 16, method) > 1e-3


def test_trajectory_contents():
    res = simulate_broadcast(
        VSI1, 0.2, 50, np.random.default_rng(4), record_trajectory=True
    )
    assert res.ns.tolist() == list(range(1, 51))
    assert res.d1s[0] == 1 and res.d2s[0] == 0
    states = res.trajectory
    assert states[-1] == res.final
    bare = simulate_broadcast(VSI1, 0.2, 50, np.random.default_rng(4))
    assert bare.trajectory is None
    assert bare.final == res.final  # recording must not change the draw


def test_json_serialization():
    res = simulate_broadcast(SE1, 0.3, 20, np.random.default_rng(9))
    payload = json.loads(res.to_json())
    assert set(payload) == {"N", "delta1", "delta2", "pair_counts"}
    assert payload["N"] == 20
    assert payload["delta1"] == res.final.d1
    assert payload["delta2"] == res.final.d2
    assert payload["pair_counts"] == list(res.pair_counts)
