import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import block_projection_analytic
from stability2d.datagen import (
    CovarianceSpec,
    GroundTruth,
    Standardizer,
    add_observation_noise,
    build_block_covariance,
    correlation_form,
    generate_response,
    nearest_pd,
    projected_covariance,
    sample_mvn,
    standardize,
    write_matrix_csv,
)
from stability2d._validation import DegenerateColumnError

TABLE_S = (199, 399, 599, 799, 999)


def test_block_layout():
    M = build_block_covariance(CovarianceSpec(6, (0, 3), 0.5, 0.1, 0.3))
    assert M[0, 3] == 0.5
    assert M[1, 2] == 0.1
    assert M[0, 1] == 0.3 and M[4, 3] == 0.3
    assert np.all(np.diag(M) == 1.0)
    assert np.array_equal(M, M.T)


def test_spec_validation():
    with pytest.raises(ValueError):
        CovarianceSpec(5, (0, 0))
    with pytest.raises(ValueError):
        CovarianceSpec(5, (5,))
    with pytest.raises(ValueError):
        CovarianceSpec(5, (0,), rho_mix=1.0)


@pytest.mark.parametrize("rho_irr,rho_mix", [(0.05, 0.4), (0.1, 0.5), (0.1, 0.9)])
def test_projection_matches_block_eigen_oracle(rho_irr, rho_mix):
    spec = CovarianceSpec(1000, TABLE_S, 0.5, rho_irr, rho_mix)
    rel, irr, mix, _ = block_projection_analytic(1000, 5, 0.5, rho_irr, rho_mix)
    P = projected_covariance(spec)
    assert P[199, 399] == pytest.approx(rel, abs=1e-10)
    assert P[0, 1] == pytest.approx(irr, abs=1e-10)
    assert P[0, 199] == pytest.approx(mix, abs=1e-10)
    assert np.all(np.diag(P) == 1.0)


def test_projection_frozen_values():
    # frozen from the block-eigenstructure oracle
    M = build_block_covariance(CovarianceSpec(1000, TABLE_S))
    assert np.linalg.eigvalsh(M)[0] == pytest.approx(-10.093504165143838, rel=1e-9)
    P = projected_covariance(CovarianceSpec(1000, TABLE_S))
    assert P[199, 399] == pytest.approx(0.8120983981732175, abs=1e-10)
    assert P[0, 1] == pytest.approx(0.05170470913513126, abs=1e-10)
    assert P[0, 199] == pytest.approx(0.21152348866332665, abs=1e-10)
    assert np.linalg.eigvalsh(P)[0] > 0


def test_nearest_pd_leaves_pd_input_alone():
    M = build_block_covariance(CovarianceSpec(10, (0, 1), 0.5, 0.1, 0.2))
    out = nearest_pd(M)
    assert np.array_equal(out, M) and out is not M


def test_nearest_pd_rejects_asymmetric():
    with pytest.raises(ValueError):
        nearest_pd(np.array([[1.0, 0.5], [0.4, 1.0]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 40), st.floats(-0.9, 0.9), st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_projection_is_pd_correlation(p, rr, ri, rm):
    spec = CovarianceSpec(p, tuple(range(max(1, p // 3))), rr, ri, rm)
    P = projected_covariance(spec)
    assert np.allclose(P, P.T)
    assert np.allclose(np.diag(P), 1.0)
    assert np.linalg.eigvalsh(P)[0] > 0
    np.linalg.cholesky(P)


def test_correlation_form():
    C = correlation_form(np.array([[4.0, 2.0], [2.0, 9.0]]))
    assert C[0, 1] == pytest.approx(2.0 / 6.0)
    assert np.all(np.diag(C) == 1.0)


def test_sample_mvn_reproduces_covariance():
    Sigma = projected_covariance(CovarianceSpec(4, (0, 1), 0.6, 0.2, 0.3))
    X = sample_mvn(40_000, Sigma, 3).values
    assert np.abs(np.cov(X.T) - Sigma).max() < 0.03
    assert np.array_equal(X, sample_mvn(40_000, Sigma, 3).values)


def test_sample_mvn_rejects_indefinite():
    with pytest.raises(np.linalg.LinAlgError):
        sample_mvn(5, np.array([[1.0, 2.0], [2.0, 1.0]]), 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(1, 8), st.integers(0, 10_000))
def test_standardize_moments(n, p, seed):
    X = np.random.default_rng(seed).normal(3.0, 2.0, (n, p))
    d = standardize(X)
    assert np.allclose(d.values.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(d.values.std(axis=0, ddof=1), 1.0)
    assert np.allclose(d.values * d.col_scales + d.col_means, X)


def test_standardize_degenerate_column():
    X = np.ones((5, 3))
    X[:, 0] = np.arange(5)
    with pytest.raises(DegenerateColumnError) as exc:
        standardize(X)
    assert exc.value.column == 1


def test_standardizer_transformer():
    X = np.random.default_rng(0).normal(size=(20, 3))
    t = Standardizer().fit(X)
    assert np.allclose(t.transform(X), standardize(X).values)


def test_ground_truth_and_response():
    truth = GroundTruth.from_support(6, (1, 4), (2.0, -1.0), sigma_eps=0.0)
    assert truth.active_set == (1, 4)
    X = np.random.default_rng(1).normal(size=(10, 6))
    assert np.allclose(generate_response(X, truth, 0), 2 * X[:, 1] - X[:, 4])
    noisy = GroundTruth.from_support(6, (1,), (1.0,), sigma_eps=1.0)
    assert not np.allclose(generate_response(X, noisy, 0), X[:, 1])


def test_observation_noise():
    X = np.random.default_rng(2).normal(size=(50_000, 2))
    assert add_observation_noise(X, 0.0, 1).values is not None
    assert np.array_equal(add_observation_noise(X, 0.0, 1).values, X)
    W = add_observation_noise(X, 2.0, 1).values - X
    assert W.std() == pytest.approx(2.0, rel=0.02)
    with pytest.raises(ValueError):
        add_observation_noise(X, -1.0, 1)


def test_write_matrix_csv_header(tmp_path):
    path = tmp_path / "m.csv"
    write_matrix_csv(path, np.array([[1.0, 2.0]]))
    assert path.read_text().splitlines()[0] == "feature_1,feature_2"
