import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_excitation
from pqesim.qubit import FermionExcitation, PauliString, QubitOperator, jordan_wigner_excitation
from pqesim.state import (
    ExcitationRotation,
    StateVector,
    apply_exp_kappa,
    apply_pauli_string,
    apply_trotter_evolution,
    compile_operator,
    expectation,
    overlap,
    sample_basis,
    trotter_term_order,
)

N = 6


def random_state(seed, n=N):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return StateVector(v / np.linalg.norm(v), n)


excitations = st.integers(1, 3).flatmap(
    lambda k: st.permutations(range(N)).map(
        lambda perm: FermionExcitation(tuple(sorted(perm[:k])), tuple(sorted(perm[k:2 * k])))))
angles = st.floats(-3.0, 3.0, allow_nan=False)
seeds = st.integers(0, 2**31)


@given(st.integers(0, (1 << N) - 1), st.integers(0, (1 << N) - 1), seeds)
@settings(max_examples=50)
def test_pauli_action_matches_matrix(x, z, seed):
    psi = random_state(seed)
    p = PauliString(x, z, N)
    assert np.allclose(apply_pauli_string(psi, p).amplitudes, p.to_matrix() @ psi.amplitudes)


@given(excitations, angles, seeds)
@settings(max_examples=40, deadline=None)
def test_exp_kappa_matches_expm(exc, t, seed):
    psi = random_state(seed)
    dense = scipy.linalg.expm(t * dense_excitation(exc.holes, exc.particles, N)) @ psi.amplitudes
    kappa = jordan_wigner_excitation(exc, N)
    assert np.allclose(apply_exp_kappa(psi, kappa, t).amplitudes, dense, atol=1e-12)
    fast = ExcitationRotation(exc, N).apply(psi.amplitudes.copy(), t)
    assert np.allclose(fast, dense, atol=1e-12)


@given(excitations, angles, seeds)
@settings(max_examples=40, deadline=None)
def test_rotation_preserves_norm_and_inverts(exc, t, seed):
    psi = random_state(seed)
    rot = ExcitationRotation(exc, N)
    vec = rot.apply(psi.amplitudes.copy(), t)
    assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(rot.apply(vec, -t), psi.amplitudes, atol=1e-12)


@given(excitations, seeds)
@settings(max_examples=30, deadline=None)
def test_generator_matches_dense(exc, seed):
    psi = random_state(seed)
    out = ExcitationRotation(exc, N).apply_generator(psi.amplitudes)
    assert np.allclose(out, dense_excitation(exc.holes, exc.particles, N) @ psi.amplitudes)


def test_exp_kappa_rejects_bad_generators():
    psi = random_state(0, 2)
    herm = QubitOperator([(1.0, PauliString.from_label("X0", 2))])
    with pytest.raises(ValueError):
        apply_exp_kappa(psi, herm, 0.1)
    noncommuting = QubitOperator([(1j, PauliString.from_label("X0", 2)),
                                  (1j, PauliString.from_label("Z0", 2))])
    with pytest.raises(ValueError):
        apply_exp_kappa(psi, noncommuting, 0.1)


def random_operator(seed, n=4, terms=6, hermitian=True):
    rng = np.random.default_rng(seed)
    op = QubitOperator([(complex(rng.normal(), 0 if hermitian else rng.normal()),
                         PauliString(int(rng.integers(1 << n)), int(rng.integers(1 << n)), n))
                        for _ in range(terms)])
    return op


@given(seeds)
@settings(max_examples=30)
def test_compiled_operator_matches_dense(seed):
    op = random_operator(seed, hermitian=False)
    assert np.allclose(compile_operator(op).toarray(), op.to_matrix())


def test_expectation_checks():
    psi = random_state(3, 4)
    herm = random_operator(1)
    assert expectation(psi, herm) == pytest.approx(
        np.vdot(psi.amplitudes, herm.to_matrix() @ psi.amplitudes).real)
    with pytest.raises(ValueError):
        expectation(psi, QubitOperator([(1j, PauliString.from_label("X0", 4))]))
    with pytest.raises(ValueError):
        expectation(random_state(3, 3), herm)


def test_state_vector_ceiling_and_shape():
    with pytest.raises(ValueError):
        StateVector(np.zeros(3), 2)
    with pytest.raises(ValueError):
        StateVector(np.zeros(2), 21)
    a, b = StateVector.basis(2, 1), StateVector.basis(2, 1)
    assert overlap(a, b) == 1


def test_trotter_single_slice_is_ordered_product():
    h = random_operator(7)
    psi = random_state(5, 4)
    dt = 0.3
    expected = psi.amplitudes.copy()
    for (x, z), c in trotter_term_order(h):
        expected = scipy.linalg.expm(-1j * dt * c.real * PauliString(x, z, 4).to_matrix()) @ expected
    assert np.allclose(apply_trotter_evolution(psi, h, dt).amplitudes, expected)


def test_trotter_converges_to_exact_evolution():
    h = random_operator(8)
    psi = random_state(6, 4)
    exact = scipy.linalg.expm(-1j * 0.5 * h.to_matrix()) @ psi.amplitudes
    errs = [np.linalg.norm(apply_trotter_evolution(psi, h, 0.5, k).amplitudes - exact)
            for k in (4, 8, 16)]
    assert errs[2] < errs[1] < errs[0]
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.2)
    backward = apply_trotter_evolution(psi, h, -0.5, 64).amplitudes
    assert np.allclose(backward, scipy.linalg.expm(0.5j * h.to_matrix()) @ psi.amplitudes, atol=1e-2)


def test_sampling_is_reproducible():
    psi = random_state(9, 3)
    a = sample_basis(psi, 1000, seed=11)
    assert a == sample_basis(psi, 1000, seed=11)
    assert sum(a.values()) == 1000
    with pytest.raises(ValueError):
        sample_basis(psi, 0)
