import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from crinkit import crin, opalg, protocols as P
from crinkit.errors import DimensionError, PreconditionError

SEEDS = st.integers(min_value=0, max_value=2**32 - 1)
DIMS = st.integers(min_value=2, max_value=4)


def _conserved(dim, s):
    rng = np.random.default_rng(s)
    u = opalg.haar_unitary(dim, rng)
    h1, h2 = opalg.conserved_pair(u, s)
    return h1.mat, h2.mat, u


class SquaredWeights:
    """Not affine in the state: OBS atoms with squared, renormalized weights."""

    def __call__(self, h1, u):
        return P.obs_povm(h1, u)

    def distribution(self, h1, u, rho):
        d = P.evaluate(P.obs_povm(h1, u), rho)
        w = d.probs ** 2
        return P.OutcomeDistribution(tuple(zip(d.values, w / w.sum())))


def dimension_aware(h1, u):
    # outcome values depend on the total dimension, so an idle ancilla shows up
    base = P.obs_povm(h1, u)
    shift = 1e-3 * base.dim
    return P.Povm([(z + shift, m) for z, m in base.atoms], "custom")


@seed(31)
@settings(max_examples=25, deadline=None)
@given(s=SEEDS, dim=DIMS)
def test_obs_passes_all_conditions(s, dim):
    h1, h2, u = _conserved(dim, s)
    ups = [opalg.haar_unitary(2, np.random.default_rng(s + 1))]
    for r in crin.run_all(P.obs_povm, h1, h2, u, ups):
        assert r.passed, (r.condition, r.worst_violation)


def test_tpm_breaks_conservation_only():
    runs = crin.random_suite(P.tpm_povm, 12, dims=(3, 4), seed=5)
    worst = {c: max(reps[i].worst_violation for _, _, reps in runs) for i, c in enumerate("1234")}
    assert worst["1"] > 0.1
    assert max(worst["2"], worst["3"], worst["4"]) < 1e-9


def test_operator_lemma_holds_for_obs():
    h1, h2, u = _conserved(4, 9)
    assert crin.check_operator_equality_lemma(h1, h2, u).passed
    assert not crin.check_operator_equality_lemma(h1, h2, u, protocol=P.tpm_povm).passed


def test_witness_states_expose_tpm_failure():
    h1, h2, u = _conserved(3, 4)
    atol = 1e-8
    w = crin.lemma_witness_states(P.tpm_povm(h1, u), crin.reflect_povm(P.tpm_povm(h2, u)), atol)
    assert w
    r = crin.check_conservation(P.tpm_povm, h1, h2, u, states=w)
    assert r.worst_violation > 1e-3


def test_reality_on_joint_eigenvectors():
    # diagonal H1 and a diagonal U: every basis vector is a joint eigenvector
    h1 = np.diag([0.0, 1.0, 3.0])
    u = np.diag(np.exp(1j * np.array([0.1, 0.2, 0.3])))
    found, _ = crin.joint_eigenvectors(h1, u)
    assert len(found) == 3
    for proto in (P.obs_povm, P.tpm_povm):
        assert crin.check_reality(proto, h1, u).passed


def test_reality_detects_a_bad_protocol():
    h1 = np.diag([0.0, 1.0])
    u = np.diag([1.0, 1j])

    def shifted(h, v):
        return P.Povm([(z + 0.5, m) for z, m in P.obs_povm(h, v).atoms], "custom")
    r = crin.check_reality(shifted, h1, u)
    assert not r.passed and r.worst_violation == pytest.approx(1.0)


def test_reality_vacuous_when_nothing_is_shared():
    h1, _, u = _conserved(3, 2)
    r = crin.check_reality(P.obs_povm, h1, u)
    assert r.passed and r.info["n_joint"] == 0


def test_linearity_catches_nonlinear_fixture():
    h1, _, u = _conserved(3, 1)
    assert crin.check_linearity(P.obs_povm, h1, u).passed
    assert not crin.check_linearity(SquaredWeights(), h1, u).passed


def test_no_signaling_catches_dimension_dependence():
    h1, _, u = _conserved(3, 1)
    ups = [opalg.haar_unitary(2, np.random.default_rng(0))]
    assert crin.check_no_signaling(P.obs_povm, h1, u, ups).passed
    assert not crin.check_no_signaling(dimension_aware, h1, u, ups).passed


def test_precondition_and_dimension_errors():
    h1, h2, u = _conserved(3, 1)
    with pytest.raises(PreconditionError):
        crin.check_conservation(P.obs_povm, h1, h2 + np.diag([1.0, 0, 0]), u)
    with pytest.raises(DimensionError):
        crin.check_conservation(P.obs_povm, h1, np.eye(2), u)


def test_pinning_is_zero_for_obs_and_positive_for_tpm():
    h1, u = opalg.random_instance(4, 3)
    assert crin.pinning_diagnostic(P.obs_povm(h1, u), h1, u).worst_violation < 1e-10
    assert crin.pinning_diagnostic(P.tpm_povm(h1, u), h1, u).worst_violation > 1e-3


@seed(32)
@settings(max_examples=15, deadline=None)
@given(s=SEEDS, dim=DIMS)
def test_pinning_grows_with_perturbation(s, dim):
    h1, u = opalg.random_instance(dim, s)
    scores = [crin.pinning_diagnostic(crin.perturbed_obs(h1, u, e, s), h1, u).worst_violation
              for e in (0.0, 1e-3, 1e-2, 1e-1)]
    assert scores[0] < 1e-10
    assert scores[1] < scores[2] < scores[3]


def test_binned_masses_by_interval():
    d = P.OutcomeDistribution(((-1.0, 0.25), (0.2, 0.5), (3.0, 0.25)))
    m = crin.binned_masses(d, np.array([-1.5, -0.5, 0.5, 1.5]))
    assert np.allclose(m, [0.25, 0.5, 0.0])
