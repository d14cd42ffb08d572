import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from petqst.errors import NegativeEigenvalue, NonHermitian, NonSquare
from petqst.numerics import (
    derive_rng,
    from_eig,
    hermitian_eig,
    make_rng,
    matrix_sqrt_psd,
    rand_uniform,
    rand_uniform_matrix,
)

from conftest import random_hermitian


def test_identity_eig():
    w, v = hermitian_eig(np.eye(4))
    assert np.allclose(w, 1.0)
    assert np.allclose(np.abs(v), np.eye(4))


def test_diagonal_eig_sorted():
    w, _ = hermitian_eig(np.diag([0.75, 0.25]))
    assert np.allclose(w, [0.25, 0.75])


def test_pauli_x():
    w, v = hermitian_eig(np.array([[0, 1], [1, 0]], dtype=complex))
    assert np.allclose(w, [-1.0, 1.0], atol=1e-14)
    # eigenvector of -1 is (1, -1)/sqrt2 up to phase
    assert abs(abs(np.vdot(v[:, 0], [1, -1])) - np.sqrt(2)) < 1e-12


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 16])
def test_eig_against_lapack(n):
    rng = np.random.default_rng(n)
    m = random_hermitian(rng, n)
    w, v = hermitian_eig(m)
    assert np.allclose(w, np.linalg.eigvalsh(m), atol=1e-11)
    assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-11)
    assert np.allclose(from_eig(w, v), m, atol=1e-11)


def test_eig_stack_matches_single():
    rng = np.random.default_rng(3)
    stack = np.stack([random_hermitian(rng, 4) for _ in range(5)])
    w, _ = hermitian_eig(stack)
    for k in range(5):
        assert np.allclose(w[k], hermitian_eig(stack[k]).eigenvalues, atol=1e-13)


def test_degenerate_spectrum():
    rng = np.random.default_rng(9)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    m = q @ np.diag([1.0, 1.0, 2.0, 2.0]) @ q.conj().T
    w, v = hermitian_eig(m)
    assert np.allclose(w, [1, 1, 2, 2], atol=1e-12)
    assert np.allclose(from_eig(w, v), m, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_eig_properties(n, seed):
    m = random_hermitian(np.random.default_rng(seed), n)
    w, v = hermitian_eig(m)
    assert np.all(np.diff(w) >= -1e-12)
    assert abs(w.sum() - np.trace(m).real) < 1e-10
    assert np.allclose(m @ v, v * w, atol=1e-10)


def test_eig_rejects_bad_input():
    with pytest.raises(NonSquare):
        hermitian_eig(np.zeros((2, 3)))
    with pytest.raises(NonHermitian):
        hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))


def test_sqrt_examples():
    assert np.allclose(matrix_sqrt_psd(np.eye(3)), np.eye(3))
    assert np.allclose(matrix_sqrt_psd(np.array([[4.0]])), [[2.0]])
    assert np.allclose(matrix_sqrt_psd(np.diag([0.25, 0.75])), np.diag([0.5, np.sqrt(0.75)]))


def test_sqrt_squares_back():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    m = a @ a.conj().T
    r = matrix_sqrt_psd(m)
    assert np.allclose(r @ r, m, atol=1e-10)
    assert np.allclose(r, r.conj().T, atol=1e-12)


def test_sqrt_clamps_roundoff_only():
    assert np.allclose(matrix_sqrt_psd(np.diag([1.0, -1e-12])), np.diag([1.0, 0.0]))
    with pytest.raises(NegativeEigenvalue):
        matrix_sqrt_psd(np.diag([1.0, -1e-6]))


def test_rng_pinned_stream():
    got = rand_uniform(make_rng(42), (8,))
    expected = [
        0.0860776307352848, 0.14155732377913238, 0.270093035047747, 0.8740378646728408,
        0.1701645267309651, 0.5068124238377856, 0.3310936371254201, 0.8362997087202262,
    ]
    assert got.tolist() == expected


def test_derived_streams_are_independent_and_repeatable():
    a = rand_uniform(derive_rng(42, 1, 2), (3,))
    assert a.tolist() == rand_uniform(derive_rng(42, 1, 2), (3,)).tolist()
    assert not np.allclose(a, rand_uniform(derive_rng(42, 1, 3), (3,)))


def test_uniform_matrix():
    m = rand_uniform_matrix(make_rng(5), 2)
    assert m.shape == (2, 2) and np.all((m > 0) & (m < 1))
    assert np.array_equal(m, rand_uniform_matrix(make_rng(5), 2))
    big = rand_uniform(make_rng(6), (10**6,))
    assert abs(big.mean() - 0.5) < 0.005
