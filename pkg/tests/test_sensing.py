from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ppcs.dictionaries import make_db10, make_dct
from ppcs.keys import gen_bipolar, permute_columns
from ppcs.sensing import (
    make_dbbd_phi,
    make_gaussian_phi,
    mutual_coherence,
    norm_spread,
    random_sparse_unit_vectors,
    sense,
)


def test_gaussian_moments():
    m, n = 128, 512
    a = make_gaussian_phi(m, n, seed=4).matrix
    assert abs(a.mean()) < 3 * (1 / m) / math.sqrt(m * n)
    assert abs(a.var() / (1 / m) ** 2 - 1) < 0.05


def test_gaussian_deterministic_and_shape_guard():
    assert make_gaussian_phi(8, 32, 1) == make_gaussian_phi(8, 32, 1)
    assert make_gaussian_phi(8, 32, 1) != make_gaussian_phi(8, 32, 2)
    with pytest.raises(ValueError):
        make_gaussian_phi(32, 32, 0)
    assert make_gaussian_phi(32, 32, 0, allow_square=True).shape == (32, 32)


def test_dbbd_small():
    np.testing.assert_array_equal(make_dbbd_phi(2, 4).matrix, [[1, 1, 0, 0], [0, 0, 1, 1]])


def test_dbbd_structure():
    phi = make_dbbd_phi(128, 512).matrix
    assert set(np.unique(phi)) == {0.0, 1.0}
    assert np.all(phi.sum(axis=1) == 4)
    np.testing.assert_array_equal(phi @ np.ones(512), 4 * np.ones(128))
    np.testing.assert_array_equal(phi @ phi.T, 4 * np.eye(128))
    for i, row in enumerate(phi):
        np.testing.assert_array_equal(np.flatnonzero(row), np.arange(4 * i, 4 * i + 4))
    with pytest.raises(ValueError):
        make_dbbd_phi(3, 10)


def test_sense_examples():
    phi = make_dbbd_phi(2, 4)
    np.testing.assert_array_equal(sense(phi, [1, 2, 3, 4]), [3, 7])
    np.testing.assert_array_equal(sense(phi, np.zeros(4)), [0, 0])
    with pytest.raises(ValueError):
        sense(phi, np.zeros(5))


def test_sense_is_linear(rng):
    phi = make_gaussian_phi(16, 64, 0)
    x, z = rng.normal(size=(2, 64))
    np.testing.assert_allclose(sense(phi, 2 * x - 3 * z), 2 * sense(phi, x) - 3 * sense(phi, z), atol=1e-12)


def test_coherence_examples():
    assert mutual_coherence(np.eye(4), np.eye(4)) == pytest.approx(2.0, abs=1e-15)
    assert mutual_coherence(np.eye(2), make_dct(2)) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        mutual_coherence(np.array([[0.0, 0.0], [1.0, 0.0]]), np.eye(2))
    with pytest.raises(ValueError):
        mutual_coherence(np.eye(2), np.array([[1.0, 0.0], [0.0, 0.0]]))


@given(st.integers(0, 2**31), st.sampled_from([(16, 64), (8, 64), (32, 64)]), st.floats(0.1, 10))
def test_coherence_invariant_and_in_range(seed, shape, alpha):
    m, n = shape
    psi = make_db10(n, 1) if seed % 2 else make_dct(n)
    p = gen_bipolar(n, alpha, seed)
    for phi in (make_gaussian_phi(m, n, seed), make_dbbd_phi(m, n)):
        mu = mutual_coherence(phi, psi)
        assert 1 - 1e-12 <= mu <= math.sqrt(n) + 1e-12
        assert abs(mutual_coherence(phi, permute_columns(psi.matrix, p)) - mu) < 1e-12


def test_norm_spread_orthonormal():
    q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(12, 12)))
    lo, hi = norm_spread(q, random_sparse_unit_vectors(12, 3, 50, seed=1))
    assert abs(lo - 1) < 1e-12 and abs(hi - 1) < 1e-12


def test_norm_spread_zero_matrix_and_bad_samples():
    samples = random_sparse_unit_vectors(6, 2, 5, seed=0)
    assert norm_spread(np.zeros((3, 6)), samples) == (0.0, 0.0)
    with pytest.raises(ValueError):
        norm_spread(np.eye(6), [2 * samples[0]])
    with pytest.raises(ValueError):
        norm_spread(np.eye(6), [])


def test_norm_spread_matched_pair():
    # ||A P s|| == ||A (P s)||: spreads agree on the mapped sample set
    rng = np.random.default_rng(3)
    a = rng.normal(size=(10, 40))
    alpha = 2.5
    p = gen_bipolar(40, alpha, 9)
    samples = random_sparse_unit_vectors(40, 4, 30, seed=2)
    mapped = [p.dense() @ s / alpha for s in samples]
    lo1, hi1 = norm_spread(permute_columns(a, p) / alpha, samples)
    lo2, hi2 = norm_spread(a, mapped)
    assert lo1 == pytest.approx(lo2, rel=1e-12) and hi1 == pytest.approx(hi2, rel=1e-12)
