import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from crinkit import opalg
from crinkit.errors import DimensionError, InstanceTooLarge, NumericalFailure

SEEDS = st.integers(min_value=0, max_value=2**32 - 1)
DIMS = st.integers(min_value=2, max_value=6)


def test_hermitian_rejects_garbage():
    with pytest.raises(NumericalFailure):
        opalg.hermitian(np.array([[0, 1], [0, 0]]))


def test_hermitian_records_defect():
    h = opalg.hermitian(np.array([[1, 1e-12], [0, 2]]))
    assert h.herm_defect == pytest.approx(1e-12)
    assert np.allclose(h.mat, h.mat.conj().T)


def test_non_square_is_dimension_error():
    with pytest.raises(DimensionError):
        opalg.arr(np.zeros((2, 3)))


def test_dimension_cap():
    with pytest.raises(InstanceTooLarge):
        opalg.tensor(np.eye(70), np.eye(70))


def test_unitary_eig_phase_gate():
    es = opalg.unitary_eig(np.diag([1, 1j]))
    assert np.allclose(es.phases, [0, np.pi / 2])


def test_unitary_eig_hadamard():
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    assert np.allclose(opalg.unitary_eig(h).phases, [0, np.pi])


def test_unitary_eig_separates_conjugate_phases():
    # cos(theta) is shared by exp(i theta) and exp(-i theta)
    v = opalg.haar_unitary(4, np.random.default_rng(3))
    u = v @ np.diag(np.exp(1j * np.array([0.7, -0.7, 0.7, 2.0]))) @ v.conj().T
    es = opalg.unitary_eig(u)
    assert np.allclose(np.sort(es.phases), np.sort(np.mod([0.7, -0.7, 0.7, 2.0], 2 * np.pi)))
    assert np.allclose((es.vectors * es.values) @ es.vectors.conj().T, u, atol=1e-12)


def test_partial_trace_of_product():
    rng = np.random.default_rng(0)
    a = opalg.gue(2, rng)
    b = opalg.gue(3, rng)
    ab = np.kron(a, b)
    assert np.allclose(opalg.partial_trace(ab, (2, 3), "A"), a * np.trace(b))
    assert np.allclose(opalg.partial_trace(ab, (2, 3), "B"), b * np.trace(a))


@seed(11)
@settings(max_examples=40, deadline=None)
@given(s=SEEDS, dim=DIMS)
def test_herm_eig_reconstructs(s, dim):
    h = opalg.gue(dim, np.random.default_rng(s))
    es = opalg.herm_eig(h)
    assert np.all(np.diff(es.values) >= 0)
    assert np.allclose((es.vectors * es.values) @ es.vectors.conj().T, h, atol=1e-10)


@seed(12)
@settings(max_examples=40, deadline=None)
@given(s=SEEDS, dim=DIMS)
def test_unitary_eig_reconstructs(s, dim):
    u = opalg.haar_unitary(dim, np.random.default_rng(s))
    es = opalg.unitary_eig(u)
    assert np.all(np.diff(es.phases) >= 0)
    assert np.all((es.phases >= 0) & (es.phases < 2 * np.pi))
    assert np.allclose((es.vectors * es.values) @ es.vectors.conj().T, u, atol=1e-10)


@seed(13)
@settings(max_examples=30, deadline=None)
@given(s=SEEDS, dim=DIMS)
def test_conserved_pair_commutes(s, dim):
    u = opalg.haar_unitary(dim, np.random.default_rng(s))
    h1, h2 = opalg.conserved_pair(u, s)
    assert np.linalg.norm(opalg.commutator(h1.mat + h2.mat, u)) < 1e-10


@seed(14)
@settings(max_examples=30, deadline=None)
@given(s=SEEDS, dim=DIMS, t=st.floats(min_value=-3, max_value=3))
def test_mat_exp_is_unitary_and_additive(s, dim, t):
    h = opalg.gue(dim, np.random.default_rng(s))
    u = opalg.mat_exp_i(h, t).mat
    assert np.allclose(u.conj().T @ u, np.eye(dim), atol=1e-10)
    assert np.allclose(opalg.mat_exp_i(h, t / 2).mat @ opalg.mat_exp_i(h, t / 2).mat, u, atol=1e-9)


def test_random_instance_is_deterministic():
    a1, u1 = opalg.random_instance(4, 7)
    a2, u2 = opalg.random_instance(4, 7)
    assert np.array_equal(a1.mat, a2.mat) and np.array_equal(u1.mat, u2.mat)
