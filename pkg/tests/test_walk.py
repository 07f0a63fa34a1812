import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from treecast import (
    DeltaState,
    INITIAL_STATE,
    ParamError,
    detect_stopping_times,
    increment_distribution,
    red_attach_prob,
    run_walk,
    stopping_bounds,
    validate_params,
    walk_step,
    y_value,
    z_alpha,
)
from treecast.oracle import exact_delta_distribution
from treecast.walk import WalkResult, write_trajectory_csv

VSI0 = validate_params("vsi", alpha=0.0)
VSI1 = validate_params("vsi", alpha=1.0)
SE1 = validate_params("se", alpha=1.0)

ALL_PARAMS = [
    VSI0,
    VSI1,
    validate_params("vsi", neg_d=2),
    validate_params("se", alpha=0.0),
    SE1,
    validate_params("se", neg_d=3),
]


def test_z_alpha_values():
    assert z_alpha(VSI0, 17) == 1.0
    assert z_alpha(VSI1, 2) == 1.5
    assert abs(z_alpha(SE1, 10**12) - 3.0) < 1e-9


def test_red_attach_prob_cases():
    assert red_attach_prob(VSI1, INITIAL_STATE) == 1.0
    assert red_attach_prob(VSI1, DeltaState(3, -1, 1)) == 0.5  # d1 + d2 = 0
    # explicit weights on the two-vertex tree with a red root: 2 vs 1
    assert abs(red_attach_prob(VSI1, DeltaState(2, 0, 1)) - 2 / 3) < 1e-15


def test_red_attach_prob_exact_walls_for_negative_alpha():
    params = validate_params("vsi", neg_d=2)
    # all-red tree: d1 = n, d2 = n - 1 -> probability exactly 1
    assert red_attach_prob(params, DeltaState(5, 5, 4)) == 1.0
    # mirrored all-blue-but-root weight state -> exactly 0
    assert red_attach_prob(params, DeltaState(5, -5, -4)) == 0.0


def test_increment_distribution_exact_example():
    dist = dict(increment_distribution(VSI1, 0.2, DeltaState(2, 0, 1)))
    assert abs(dist[(1, 1)] - 8 / 15) < 1e-15
    assert abs(dist[(-1, 1)] - 2 / 15) < 1e-15
    assert abs(dist[(1, -1)] - 1 / 15) < 1e-15
    assert abs(dist[(-1, -1)] - 4 / 15) < 1e-15


def test_increment_distribution_degenerate_q():
    assert dict(increment_distribution(VSI1, 0.0, INITIAL_STATE))[(1, 1)] == 1.0
    assert dict(increment_distribution(SE1, 0.0, INITIAL_STATE))[(1, 2)] == 1.0


@given(
    params_ix=st.integers(0, len(ALL_PARAMS) - 1),
    q=st.floats(0.0, 1.0),
    seed=st.integers(0, 2**32 - 1),
    steps=st.integers(0, 40),
)
@settings(max_examples=100, deadline=None)
def test_increment_distribution_properties(params_ix, q, seed, steps):
    params = ALL_PARAMS[params_ix]
    rng = np.random.default_rng(seed)
    state = INITIAL_STATE
    for _ in range(steps):
        state = walk_step(state, params, q, rng)
    state.check(params)
    dist = increment_distribution(params, q, state)
    probs = [p for _, p in dist]
    assert all(0.0 <= p <= 1.0 for p in probs)
    assert abs(sum(probs) - 1.0) < 1e-12
    # at q = 1/2 the first coordinate is a fair step
    half = dict(increment_distribution(params, 0.5, state))
    up = sum(p for (dd1, _), p in half.items() if dd1 == 1)
    assert abs(up - 0.5) < 1e-12


def test_walk_step_deterministic_edges(rng):
    assert walk_step(INITIAL_STATE, VSI1, 0.0, rng) == DeltaState(2, 2, 1)
    assert walk_step(INITIAL_STATE, VSI1, 1.0, rng) == DeltaState(2, 0, 1)
    assert walk_step(INITIAL_STATE, SE1, 0.0, rng) == DeltaState(2, 2, 2)
    assert walk_step(INITIAL_STATE, SE1, 1.0, rng) == DeltaState(2, 0, 0)


def test_walk_step_frequencies_match_increment_distribution(rng):
    params = SE1
    state = DeltaState(4, 0, 2)
    expected = dict(increment_distribution(params, 0.3, state))
    counts = {key: 0 for key in expected}
    n_draws = 200_000
    for _ in range(n_draws):
        nxt = walk_step(state, params, 0.3, rng)
        counts[(nxt.d1 - state.d1, nxt.d2 - state.d2)] += 1
    _, pvalue = stats.chisquare(
        list(counts.values()), [expected[k] * n_draws for k in counts]
    )
    assert pvalue > 1e-3


def test_run_walk_trivial():
    res = run_walk(VSI1, 0.3, 1, np.random.default_rng(0))
    assert res.final == INITIAL_STATE
    with pytest.raises(ParamError):
        run_walk(VSI1, 0.3, 0, np.random.default_rng(0))
    with pytest.raises(ParamError):
        run_walk(VSI1, 1.5, 10, np.random.default_rng(0))


@pytest.mark.parametrize("params", ALL_PARAMS)
def test_run_walk_invariants_over_million_steps(params):
    # every state along a 1e6-step run satisfies the parity, range and
    # |d1 + alpha*d2| <= Z(n)*n invariants (checked vectorized)
    res = run_walk(
        params, 0.2, 1_000_001, np.random.default_rng(5), record_trajectory=True
    )
    res.final.check(params)
    ns, d1s, d2s = res.ns, res.d1s, res.d2s
    assert (np.abs(d1s) <= ns).all()
    assert (((d1s - ns) % 2) == 0).all()
    if params.family.value == "vsi":
        assert (np.abs(d2s) <= ns - 1).all()
        assert (((d2s - (ns - 1)) % 2) == 0).all()
    else:
        assert (np.abs(d2s) <= 2 * (ns - 1)).all()
        assert ((d2s % 2) == 0).all()
    comb = np.abs(d1s + params.alpha * d2s)
    zn = params.alpha * (1.0 - 1.0 / ns) + 1.0
    if params.family.value == "se":
        zn = 2.0 * params.alpha * (1.0 - 1.0 / ns) + 1.0
    assert (comb <= zn * ns * (1 + 1e-12)).all()


@pytest.mark.parametrize("params", ALL_PARAMS)
def test_walk_step_invariants_short_run(params):
    rng = np.random.default_rng(11)
    state = INITIAL_STATE
    for _ in range(3000):
        state = walk_step(state, params, 0.35, rng)
        state.check(params)


def test_run_walk_martingale_mean_at_half(rng):
    # at q = 1/2 the color difference is a martingale started at 1
    reps, n = 10_000, 10_000
    total = 0
    for i in range(reps):
        total += run_walk(VSI0, 0.5, n, np.random.default_rng(i)).final.d1
    mean = total / reps
    sigma = math.sqrt(n - 1) / math.sqrt(reps)
    assert abs(mean - 1.0) < 3 * sigma


def _chisq_against_dp(params, q, n, reps, sampler, min_expected=5.0):
    dist = exact_delta_distribution(params, q, n)
    keys = sorted(dist.entries)
    index = {k: i for i, k in enumerate(keys)}
    counts = np.zeros(len(keys) + 1)
    for i in range(reps):
        res = sampler(np.random.default_rng(i))
        counts[index.get(res, len(keys))] += 1
    expected = np.array([dist.entries[k] for k in keys] + [0.0]) * reps
    assert counts[-1] == 0  # nothing outside the exact support
    keep = expected >= min_expected
    keep[-1] = False
    pooled_obs = np.append(counts[keep], counts[~keep].sum())
    pooled_exp = np.append(expected[keep], expected[~keep].sum())
    _, pvalue = stats.chisquare(pooled_obs, pooled_exp * pooled_obs.sum() / pooled_exp.sum())
    return pvalue


@pytest.mark.parametrize(
    "params,q",
    [(VSI0, 0.3), (VSI1, 0.15), (validate_params("se", neg_d=3), 0.25)],
)
def test_run_walk_distribution_matches_oracle(params, q):
    def sampler(rng):
        final = run_walk(params, q, 200, rng).final
        return final.d1, final.d2

    assert _chisq_against_dp(params, q, 200, 4000, sampler) > 1e-3


def test_trajectory_recording_and_stride():
    res = run_walk(VSI1, 0.2, 100, np.random.default_rng(3), record_trajectory=True)
    assert res.ns.tolist() == list(range(1, 101))
    assert res.d1s[0] == 1 and res.d2s[0] == 0
    assert res.final.d1 == res.d1s[-1] and res.final.d2 == res.d2s[-1]
    strided = run_walk(
        VSI1, 0.2, 100, np.random.default_rng(3), record_trajectory=True, stride=10
    )
    assert strided.ns.tolist() == list(range(1, 101, 10))
    assert (strided.d1s == res.d1s[::10]).all()


def test_track_y_values():
    res = run_walk(VSI1, 0.1, 50, np.random.default_rng(8), track_y=True)
    assert res.y is not None
    assert res.y[0] == 1.0  # initial state has combined value 1


def test_y_value():
    assert y_value(INITIAL_STATE, VSI1) == 1.0
    assert y_value(DeltaState(4, 4, 3), VSI1) == 4 / 49
    with pytest.raises(ValueError):
        y_value(DeltaState(3, -1, 1), VSI1)


def test_stopping_bounds_reference_values():
    sc = stopping_bounds(VSI0, 0.01, gamma=0.25, c_tilde=0.3)
    assert abs(sc.a_bound - 0.01**-0.25) < 1e-12
    assert abs(sc.a_bound - 3.1623) < 1e-3
    assert sc.m2 == 1.0 and abs(sc.beta - 2 / 3) < 1e-15
    assert abs(sc.b_bound - math.sqrt(3.3 / (1 / 3))) < 1e-12
    assert abs(sc.b_bound - 3.1464) < 1e-3
    assert sc.a_gt_b and sc.drift_positive
    assert abs(stopping_bounds(VSI0, 0.1).rho - 0.8) < 1e-15


def test_stopping_bounds_default_c_tilde():
    sc = stopping_bounds(VSI0, 0.01)
    assert sc.c_tilde == pytest.approx(0.1)
    assert sc.b_bound == pytest.approx(math.sqrt(9.3))


def test_stopping_bounds_flags():
    # binary-cap VSI: the lower-boundary radicand is negative
    sc = stopping_bounds(validate_params("vsi", neg_d=2), 0.01)
    assert math.isnan(sc.b_bound) and not sc.a_gt_b
    # q too large for the escape analysis at gamma = 1/4
    sc = stopping_bounds(VSI0, 0.05)
    assert sc.a_bound < sc.b_bound and not sc.a_gt_b
    with pytest.raises(ParamError):
        stopping_bounds(VSI0, 0.0)
    with pytest.raises(ParamError):
        stopping_bounds(VSI0, 0.1, gamma=0.5)


def test_detect_stopping_times_deterministic_all_red():
    # q=0 keeps everything red: combined = Z(n) * n crosses A Z(n) sqrt(n)
    # at the first n with sqrt(n) > A
    sc = stopping_bounds(VSI0, 0.01, c_tilde=0.3)
    res = run_walk(VSI0, 0.0, 200, np.random.default_rng(0), record_trajectory=True)
    tau_high, tau_low = detect_stopping_times(res, sc, VSI0)
    expected = next(n for n in range(1, 201) if math.sqrt(n) > sc.a_bound)
    assert tau_high == expected
    assert tau_low == math.inf


def test_detect_stopping_times_no_crossing():
    sc = stopping_bounds(VSI0, 0.01, c_tilde=0.3)
    ns = np.arange(1, 51)
    d1s = np.ones(50, dtype=np.int64)  # flat trajectory never crosses
    d2s = np.zeros(50, dtype=np.int64)
    assert detect_stopping_times((ns, d1s, d2s), sc, VSI0) == (math.inf, math.inf)


def test_detect_stopping_times_synthetic_drop():
    sc = stopping_bounds(VSI0, 0.01, c_tilde=0.3)
    n = 60
    ns = np.arange(1, n + 1)
    d1s = np.round(4.0 * np.sqrt(ns)).astype(np.int64)  # above A = 3.16 boundary
    d1s[0] = 1
    d2s = np.zeros(n, dtype=np.int64)
    tau_high, _ = detect_stopping_times((ns, d1s, d2s), sc, VSI0)
    assert tau_high < 50
    d1s[49:] = 0  # drops below the B boundary at n = 50
    tau_high, tau_low = detect_stopping_times((ns, d1s, d2s), sc, VSI0)
    assert tau_low == 50


def test_detect_stopping_times_requires_undecimated():
    sc = stopping_bounds(VSI0, 0.01, c_tilde=0.3)
    res = run_walk(
        VSI0, 0.1, 100, np.random.default_rng(1), record_trajectory=True, stride=5
    )
    with pytest.raises(ParamError):
        detect_stopping_times(res, sc, VSI0)


def test_detect_stopping_times_n_dependent_boundary():
    sc = stopping_bounds(VSI1, 0.0001, c_tilde=0.3)
    res = run_walk(VSI1, 0.0, 400, np.random.default_rng(0), record_trajectory=True)
    th_lim, _ = detect_stopping_times(res, sc, VSI1)
    th_n, _ = detect_stopping_times(res, sc, VSI1, b_mode="n_dependent")
    assert th_lim == th_n  # the upper boundary is unaffected by b_mode


def test_trajectory_csv(tmp_path):
    res = run_walk(VSI1, 0.2, 30, np.random.default_rng(2), record_trajectory=True)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(res, VSI1, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "n,delta1,delta2,combined,y"
    assert len(lines) == 31
    first = lines[1].split(",")
    assert first[:3] == ["1", "1", "0"] and float(first[3]) == 1.0
    with pytest.raises(ParamError):
        write_trajectory_csv(WalkResult(res.final), VSI1, path)
