import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import nogueira_naive
from stability2d.metrics import f1_score, nogueira_stability, selection_matrix


def test_f1_cases():
    assert f1_score([], []) == 1.0
    assert f1_score([1], []) == 0.0
    assert f1_score([], [1]) == 0.0
    assert f1_score([1, 2], [1, 2]) == 1.0
    # tp=1, fp=1, fn=1 -> 2/4
    assert f1_score([1, 3], [1, 2]) == 0.5


def test_identical_selections_are_perfectly_stable():
    Z = selection_matrix([{0, 3}, {0, 3}, {0, 3}], 6)
    assert nogueira_stability(Z) == pytest.approx(1.0)


def test_hand_computed_value():
    # p_hat = (1, .5, .5, 0), s2 = 2*(0, .25, .25, 0) -> mean .25; kbar = 2, q = .5
    Z = np.array([[1, 1, 0, 0], [1, 0, 1, 0]])
    assert nogueira_stability(Z) == pytest.approx(1 - 0.25 / 0.25)


def test_undefined_cases():
    assert math.isnan(nogueira_stability(np.zeros((3, 4))))
    assert math.isnan(nogueira_stability(np.ones((3, 4))))
    with pytest.raises(ValueError):
        nogueira_stability(np.zeros((1, 4)))
    with pytest.raises(ValueError):
        nogueira_stability(np.full((2, 2), 0.5))


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 8), st.integers(2, 10), st.data())
def test_matches_definition_and_invariances(R, p, data):
    Z = np.array(data.draw(st.lists(st.lists(st.integers(0, 1), min_size=p, max_size=p), min_size=R, max_size=R)))
    kbar = Z.sum(axis=1).mean()
    if kbar in (0, p):
        return
    phi = nogueira_stability(Z)
    assert phi == pytest.approx(nogueira_naive(Z), abs=1e-12)
    assert phi <= 1 + 1e-12
    perm_r = np.random.default_rng(R).permutation(R)
    perm_c = np.random.default_rng(p).permutation(p)
    assert nogueira_stability(Z[perm_r][:, perm_c]) == pytest.approx(phi, abs=1e-12)
