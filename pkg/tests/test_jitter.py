import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import largest_gap_naive
from stability2d.jitter import (
    JitterStabilitySelection,
    NoiseGrid,
    delta_average,
    largest_gap_select,
    parse_grid,
    perturb_design,
    selection_frequencies,
    stability_path,
    theorem2_epsilon,
    top_k_select,
)
from stability2d.selectors import SelectorSpec


def _problem(seed=0, n=50, p=40):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[[3, 7, 11]] = [3.0, 2.0, 1.5]
    return X, X @ beta + rng.standard_normal(n)


def test_parse_grid():
    g = parse_grid("0.05:2.5:10")
    assert g.m == 10 and g.deltas[0] == 0.05 and g.deltas[-1] == 2.5
    assert g.deltas[1] - g.deltas[0] == pytest.approx((2.5 - 0.05) / 9)
    lg = parse_grid("0.01:5:25:log", B=7)
    assert lg.B == 7 and lg.deltas[-1] == pytest.approx(5.0)
    assert lg.deltas[1] / lg.deltas[0] == pytest.approx(lg.deltas[2] / lg.deltas[1])
    assert parse_grid("0:0:1").deltas == (0.0,)
    for bad in ("1:2", "1:2:3:lin", "2:1:3", "a:b:c"):
        with pytest.raises(ValueError):
            parse_grid(bad)


def test_noise_grid_validation():
    with pytest.raises(ValueError):
        NoiseGrid((0.5, 0.5))
    with pytest.raises(ValueError):
        NoiseGrid((-0.1, 0.5))
    with pytest.raises(ValueError):
        NoiseGrid((0.1,), B=0)


def test_perturb_design():
    X = np.zeros((20_000, 3))
    assert perturb_design(X, 0.0, 1) is not None and np.array_equal(perturb_design(X, 0.0, 1), X)
    W = perturb_design(X, 1.5, 1)
    assert W.std() == pytest.approx(1.5, rel=0.02)
    assert np.array_equal(W, perturb_design(X, 1.5, 1))


def test_zero_noise_frequencies_are_binary():
    X, y = _problem()
    f = selection_frequencies(X, y, SelectorSpec.lasso(0.3), 0.0, 25, 0)
    assert set(np.unique(f)) <= {0.0, 1.0}


def test_frequencies_are_multiples_of_one_over_B():
    X, y = _problem()
    f = selection_frequencies(X, y, SelectorSpec.lasso(0.3), 0.7, 20, 4)
    assert np.all((f >= 0) & (f <= 1))
    assert np.allclose(f * 20, np.round(f * 20))


def test_path_independent_of_worker_count():
    X, y = _problem(1)
    grid = NoiseGrid((0.0, 0.3, 1.0), B=12, base_seed=(5, 2))
    a = stability_path(X, y, SelectorSpec.lasso(0.3), grid, workers=1)
    b = stability_path(X, y, SelectorSpec.lasso(0.3), grid, workers=3)
    assert np.array_equal(a.freqs, b.freqs)
    rows = list(a.to_rows())
    assert len(rows) == 3 * X.shape[1] and rows[0][1] == 1


def test_strong_signal_survives_jitter():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((100, 40))
    y = 3 * X[:, 3] + 2 * X[:, 7] + 1.5 * X[:, 11] + 0.5 * rng.standard_normal(100)
    path = stability_path(X, y, SelectorSpec.lasso(0.5), parse_grid("0.05:1:5", B=20), workers=1)
    avg = delta_average(path)
    assert top_k_select(avg, 3).selected_set == {3, 7, 11}
    assert {3, 7, 11} <= largest_gap_select(avg).selected_set


def test_largest_gap_examples():
    r = largest_gap_select([0.9, 0.1, 0.85, 0.05])
    assert r.selected_set == {0, 2} and r.s_hat == 2 and r.tau_hat == pytest.approx(0.475)
    tie = largest_gap_select([1.0, 0.5, 0.0])
    assert tie.s_hat == 1 and tie.selected_set == {0}
    flat = largest_gap_select([0.3, 0.3, 0.3])
    assert flat.selected.size == 0 and "degenerate" in flat.diagnostics


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from([i / 20 for i in range(21)]), min_size=2, max_size=30))
def test_largest_gap_matches_brute_force(freqs):
    res = largest_gap_select(freqs)
    want, tau = largest_gap_naive(freqs)
    assert res.selected_set == want
    if tau is not None:
        assert res.tau_hat == pytest.approx(tau)
        # everything selected scores above everything not selected
        sel = [freqs[j] for j in want]
        rest = [f for j, f in enumerate(freqs) if j not in want]
        assert not rest or min(sel) > max(rest)


def test_top_k_ties_go_to_lower_index():
    r = top_k_select([0.5, 0.9, 0.5, 0.5], 2)
    assert list(r.selected) == [0, 1]
    with pytest.raises(ValueError):
        top_k_select([0.1, 0.2], 3)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.data())
def test_top_k_properties(freqs, data):
    k = data.draw(st.integers(1, len(freqs)))
    r = top_k_select(freqs, k)
    assert r.selected.size == k
    chosen = min(freqs[j] for j in r.selected)
    assert all(f <= chosen for j, f in enumerate(freqs) if j not in set(r.selected))


def test_theorem2_epsilon_value():
    # sqrt(log(2 * 10 * 1000 / 0.05) / 200), evaluated by hand: log(4e5) = 12.89922
    assert theorem2_epsilon(10, 1000, 100, 0.05) == pytest.approx(math.sqrt(12.899219826 / 200), abs=1e-9)
    assert theorem2_epsilon(10, 1000, 100, 0.05) == pytest.approx(0.2540, abs=1e-4)
    with pytest.raises(ValueError):
        theorem2_epsilon(10, 1000, 100, 1.5)


def test_estimator():
    X, y = _problem(3)
    est = JitterStabilitySelection(deltas=[0.1, 0.5, 1.0], B=10, lam=0.3, random_state=1).fit(X, y)
    assert est.path_.freqs.shape == (3, X.shape[1])
    assert set(est.get_support(indices=True)) == set(est.result_.selected)
    top = JitterStabilitySelection(deltas=[0.1, 0.5], B=10, lam=0.3, n_features_to_select=2).fit(X, y)
    assert top.get_support().sum() == 2
    assert top.transform(X).shape == (X.shape[0], 2)
