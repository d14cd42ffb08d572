import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from petqst.errors import InvalidSpec, InvalidState, OutOfRange
from petqst.numerics import make_rng
from petqst.qstate import (
    NoiseSpec,
    StateSpec,
    apply_noise,
    basis_state,
    bell_phi_minus,
    density_matrix_violations,
    depolarize,
    exp_state_error,
    fidelity,
    generate_state,
    maximally_mixed,
    purity,
    validate_density_matrix,
)


def lapack_fidelity(a, b):
    w, v = np.linalg.eigh(a)
    ra = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    w2 = np.linalg.eigvalsh(ra @ b @ ra)
    return np.sum(np.sqrt(np.clip(w2, 0, None)))


def test_sparse_mixed_state():
    rho = generate_state(make_rng(0), StateSpec(2, zeros=2, rank=2))
    assert rho.shape == (4, 4)
    assert np.sum(np.abs(np.diag(rho)) < 1e-15) == 2
    w = np.linalg.eigvalsh(rho)
    assert np.sum(w > 1e-10) == 2
    assert density_matrix_violations(rho) == []


def test_pure_state():
    rho = generate_state(make_rng(1), StateSpec(1, zeros=0, rank=1, pure=True))
    assert abs(purity(rho) - 1.0) < 1e-10


def test_full_rank_spectrum_statistics():
    rng = make_rng(2)
    spectra = np.array([np.linalg.eigvalsh(generate_state(rng, StateSpec(2, 0, 4))) for _ in range(10_000)])
    mean = spectra.mean(axis=0)
    assert abs(mean.sum() - 1.0) < 1e-12
    assert np.all(np.diff(mean) > 0.02)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.data())
def test_generated_states_are_valid(n, data):
    d = 2**n
    zeros = data.draw(st.integers(0, d - 2))
    pure = data.draw(st.booleans())
    rank = 1 if pure else data.draw(st.integers(2, d - zeros))
    seed = data.draw(st.integers(0, 2**32 - 1))
    rho = generate_state(make_rng(seed), StateSpec(n, zeros, rank, pure))
    validate_density_matrix(rho)
    assert np.sum(np.diag(rho).real > 0) == d - zeros
    assert np.linalg.matrix_rank(rho, tol=1e-9) == rank


@pytest.mark.parametrize("spec", [StateSpec(2, 3, 1), StateSpec(2, 0, 5), StateSpec(2, 2, 3), StateSpec(2, 0, 2, pure=True)])
def test_invalid_specs(spec):
    with pytest.raises(InvalidSpec):
        spec.validate()


def test_purity_examples():
    assert purity(bell_phi_minus()) == pytest.approx(1.0)
    assert purity(maximally_mixed(2)) == pytest.approx(0.25)
    assert purity(np.diag([0.75, 0.25])) == pytest.approx(0.625)


def test_fidelity_examples():
    bell = bell_phi_minus()
    assert fidelity(bell, bell) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(basis_state(1, 0), basis_state(1, 1)) == pytest.approx(0.0, abs=1e-12)
    assert fidelity(basis_state(1, 0), maximally_mixed(1)) == pytest.approx(1 / np.sqrt(2), abs=1e-12)


def test_fidelity_against_lapack_and_symmetric():
    rng = make_rng(4)
    for _ in range(20):
        a = generate_state(rng, StateSpec(2, 0, 3))
        b = generate_state(rng, StateSpec(2, 1, 2))
        f = fidelity(a, b)
        # b is rank deficient: sqrt of round-off eigenvalues limits agreement to ~1e-8
        assert f == pytest.approx(lapack_fidelity(a, b), abs=1e-7)
        assert f == pytest.approx(fidelity(b, a), abs=1e-7)
        assert 0.0 <= f <= 1.0 + 1e-12


def test_fidelity_batched():
    rng = make_rng(5)
    a = np.stack([generate_state(rng, StateSpec(2, 0, 2)) for _ in range(4)])
    b = np.stack([generate_state(rng, StateSpec(2, 0, 4)) for _ in range(4)])
    f = fidelity(a, b)
    assert f.shape == (4,)
    assert np.allclose(f, [fidelity(x, y) for x, y in zip(a, b)])


def test_depolarize_examples():
    bell = bell_phi_minus()
    assert np.array_equal(depolarize(bell, 0.0), bell)
    assert np.allclose(depolarize(bell, 1.0), np.eye(4) / 4)
    assert np.allclose(depolarize(basis_state(1), 0.5), np.diag([0.75, 0.25]))
    with pytest.raises(OutOfRange):
        depolarize(bell, 1.2)
    with pytest.raises(OutOfRange):
        depolarize(bell, -0.1)


def test_exp_state_error_examples():
    bell = bell_phi_minus()
    assert np.array_equal(exp_state_error(make_rng(0), bell, 0.0), bell)
    a = exp_state_error(make_rng(0), bell, 1.0)
    b = exp_state_error(make_rng(0), maximally_mixed(2), 1.0)
    assert np.allclose(a, b)
    validate_density_matrix(a)
    mixed = exp_state_error(make_rng(1), bell, 0.1)
    d = np.diag(mixed).real
    assert np.all((d >= 0) & (d <= 1))
    validate_density_matrix(mixed)
    with pytest.raises(OutOfRange):
        exp_state_error(make_rng(0), bell, 1.5)


def test_noise_spec_parsing():
    assert NoiseSpec.parse("depol:0.05") == NoiseSpec("depolarizing", 0.05)
    assert NoiseSpec.parse("exp:0.1") == NoiseSpec("exp-state", 0.1)
    assert NoiseSpec.parse("none") == NoiseSpec()
    assert NoiseSpec.parse("depol:0.05").label() == "depolarizing:0.05"
    with pytest.raises(InvalidSpec):
        NoiseSpec.parse("bitflip:0.1")
    with pytest.raises(InvalidSpec):
        NoiseSpec.parse("depol:x")
    with pytest.raises(OutOfRange):
        NoiseSpec("depolarizing", 2.0).validate(2)


def test_apply_noise_none_is_identity():
    bell = bell_phi_minus()
    assert apply_noise(make_rng(0), bell, NoiseSpec()) is bell


def test_invalid_state_detection():
    with pytest.raises(InvalidState):
        validate_density_matrix(np.diag([0.5, 0.6]))
    with pytest.raises(InvalidState):
        validate_density_matrix(np.diag([1.5, -0.5]))
    assert density_matrix_violations(np.zeros((2, 3)))
