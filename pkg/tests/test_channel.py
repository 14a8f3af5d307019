"""Channel sampling, correlation model, block view, diagnostics."""

import numpy as np
import pytest

from slprecode import channel


def test_iid_shape_and_moments():
    rng = np.random.default_rng(0)
    H = channel.sample_iid(4, 6, variance=2.0, rng=rng)
    assert H.shape == (4, 6)
    big = channel.sample_iid(200, 200, variance=2.0, rng=rng)
    assert np.mean(np.abs(big) ** 2) == pytest.approx(2.0, rel=0.05)
    assert abs(np.mean(big)) < 0.05


def test_iid_seed_reproducible():
    a = channel.sample_iid(3, 3, rng=123)
    b = channel.sample_iid(3, 3, rng=123)
    np.testing.assert_array_equal(a, b)


def test_iid_rejects_bad_args():
    with pytest.raises(ValueError):
        channel.sample_iid(0, 2)
    with pytest.raises(ValueError):
        channel.sample_iid(2, 2, variance=0.0)


@pytest.mark.parametrize("a", [0.0, 0.5, 0.9, 0.3 + 0.4j, -0.7])
def test_correlation_matrix_hermitian_psd_unit_diagonal(a):
    C = channel.correlation_matrix(5, a)
    np.testing.assert_allclose(np.diag(C).real, 1.0, atol=1e-14)
    np.testing.assert_allclose(C, C.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(C).min() > -1e-12


def test_correlation_matrix_entries():
    a = 0.6 + 0.2j
    C = channel.correlation_matrix(4, a)
    assert C[2, 0] == pytest.approx(a ** 2)
    assert C[0, 2] == pytest.approx(np.conj(a) ** 2)


def test_correlation_matrix_rejects_unit_magnitude():
    with pytest.raises(ValueError):
        channel.correlation_matrix(3, 1.0)


def test_correlated_sample_covariance():
    a = 0.9
    M = 3
    C = channel.correlation_matrix(M, a)
    rng = np.random.default_rng(7)
    H = channel.sample_correlated(20000, M, a, rng=rng)
    emp = H.conj().T @ H / len(H)
    np.testing.assert_allclose(emp, C, atol=0.05)


def test_correlated_seed_reproducible():
    a = channel.sample_correlated(2, 4, 0.5, rng=9)
    b = channel.sample_correlated(2, 4, 0.5, rng=9)
    np.testing.assert_array_equal(a, b)


def test_spatio_temporal_rows_match_dense_action():
    rng = np.random.default_rng(3)
    M, N = 3, 5
    h = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    G = channel.spatio_temporal(h, N)
    p = rng.standard_normal(N * M) + 1j * rng.standard_normal(N * M)
    X = p.reshape(N, M)
    for n in range(N):
        row = G.row(n)
        assert row.shape == (N * M,)
        assert row @ p == pytest.approx(h @ X[n], abs=1e-12)
        assert G.apply(p, n) == pytest.approx(h @ X[n], abs=1e-12)


def test_spatio_temporal_row_is_sparse_placement():
    h = np.array([1.0 + 2j, -3.0])
    G = channel.spatio_temporal(h, 3)
    row = G.row(1)
    assert np.count_nonzero(row) == 2
    np.testing.assert_array_equal(row[2:4], h)


def test_colinearity_reference_channel(h_ref):
    c = channel.colinearity(h_ref[0], h_ref[1])
    assert c.real == pytest.approx(0.9771, abs=1e-3)
    assert c.imag == pytest.approx(-0.2088, abs=1e-3)
    assert abs(c) == pytest.approx(0.9992, abs=1e-3)
    assert np.degrees(np.angle(c)) == pytest.approx(-12.06, abs=0.05)


def test_colinearity_bounds_and_self():
    rng = np.random.default_rng(11)
    for _ in range(50):
        h1 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        h2 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        c = channel.colinearity(h1, h2)
        assert abs(c) <= 1 + 1e-12
    assert channel.colinearity(h1, h1) == pytest.approx(1.0)
    assert channel.colinearity(h1, 3j * h1) == pytest.approx(-1j)


def test_colinearity_zero_row_raises():
    with pytest.raises(ValueError):
        channel.colinearity(np.zeros(3), np.ones(3))


def test_channel_json_roundtrip(h_ref):
    text = channel.to_json(h_ref)
    back = channel.from_json(text)
    np.testing.assert_array_equal(back, h_ref)
