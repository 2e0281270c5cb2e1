import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from crinkit import formats, opalg, protocols as P
from crinkit.errors import DimensionError, ParseError, PovmError

SEEDS = st.integers(min_value=0, max_value=2**32 - 1)
DIMS = st.integers(min_value=2, max_value=5)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
HAD = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
UP = np.diag([1.0, 0.0]).astype(complex)


def _random_state(dim, rng):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    r = a @ a.conj().T
    return r / np.trace(r).real


def test_obs_identity_evolution_is_sharp_zero():
    d = P.evaluate(P.obs_povm(SX, np.eye(2)), UP)
    assert d.atoms == ((0.0, 1.0),)


def test_tpm_hadamard_fixture():
    d = P.evaluate(P.tpm_povm(SZ, HAD), UP)
    nz = [(z, p) for z, p in d.atoms if p > 1e-12]
    assert np.allclose(nz, [(-2, 0.5), (0, 0.5)])


def test_obs_hadamard_has_variation_spectrum():
    # U^dagger sz U = sx for the Hadamard gate
    d = P.evaluate(P.obs_povm(SZ, HAD), UP)
    assert np.allclose(sorted(d.values), np.linalg.eigvalsh(SX - SZ))


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        P.variation_operator(SX, np.eye(3))
    with pytest.raises(DimensionError):
        P.evaluate(P.obs_povm(SX, HAD), np.eye(3) / 3)


def test_bad_povm_rejected():
    with pytest.raises(PovmError):
        P.make_povm([(0.0, np.eye(2)), (1.0, np.eye(2))])
    with pytest.raises(PovmError):
        P.make_povm([(0.0, np.diag([1.5, 1.0])), (1.0, np.diag([-0.5, 0.0]))])


@seed(21)
@settings(max_examples=40, deadline=None)
@given(s=SEEDS, dim=DIMS)
def test_povms_are_complete_and_positive(s, dim):
    h, u = opalg.random_instance(dim, s)
    for povm in (P.obs_povm(h, u), P.tpm_povm(h, u)):
        P.check_povm(povm.atoms)


@seed(22)
@settings(max_examples=40, deadline=None)
@given(s=SEEDS, dim=DIMS)
def test_first_moments(s, dim):
    rng = np.random.default_rng(s)
    h, u = opalg.random_instance(dim, s)
    rho = _random_state(dim, rng)
    delta = P.variation_operator(h, u)
    mean, _ = P.moments(P.evaluate(P.obs_povm(h, u), rho))
    assert mean == pytest.approx(np.trace(delta @ rho).real, abs=1e-9)
    # TPM sees only the part of rho diagonal in the H1 eigenbasis
    v = opalg.herm_eig(h).vectors
    deph = v @ np.diag(np.diag(v.conj().T @ rho @ v)) @ v.conj().T
    mean, _ = P.moments(P.evaluate(P.tpm_povm(h, u), rho))
    assert mean == pytest.approx(np.trace(delta @ deph).real, abs=1e-9)


@seed(23)
@settings(max_examples=30, deadline=None)
@given(s=SEEDS, dim=DIMS)
def test_obs_variance_matches_operator(s, dim):
    rng = np.random.default_rng(s)
    h, u = opalg.random_instance(dim, s)
    rho = _random_state(dim, rng)
    d = P.variation_operator(h, u)
    m1 = np.trace(d @ rho).real
    var = np.trace(d @ d @ rho).real - m1 ** 2
    assert P.moments(P.evaluate(P.obs_povm(h, u), rho))[1] == pytest.approx(var, abs=1e-9)


@seed(24)
@settings(max_examples=30, deadline=None)
@given(s=SEEDS, dim=DIMS)
def test_char_fn_at_zero_and_symmetry(s, dim):
    rng = np.random.default_rng(s)
    h, u = opalg.random_instance(dim, s)
    rho = _random_state(dim, rng)
    cf = P.char_fn(P.obs_povm(h, u), rho, [0.0, 0.7, -0.7])
    assert cf.values[0] == pytest.approx(1.0)
    assert cf.values[2] == pytest.approx(np.conj(cf.values[1]))


def test_distance_is_zero_for_identical_and_detects_shift():
    a = P.OutcomeDistribution(((0.0, 0.5), (1.0, 0.5)))
    b = P.OutcomeDistribution(((0.0, 0.5), (1.5, 0.5)))
    assert P.distribution_distance(a, a) == (0.0, 0.0)
    tv, w1 = P.distribution_distance(a, b)
    assert tv == pytest.approx(0.5) and w1 == pytest.approx(0.25)


def test_canonicalize_merges_close_atoms():
    d = P.OutcomeDistribution(((0.0, 0.25), (1e-12, 0.25), (1.0, 0.5)))
    c = P.canonicalize(d, 1e-9)
    assert len(c.atoms) == 2 and c.atoms[0][1] == pytest.approx(0.5)


def test_povm_document_round_trip():
    h, u = opalg.random_instance(3, 5)
    povm = P.tpm_povm(h, u)
    back = P.povm_from_doc(P.povm_to_doc(povm))
    assert np.array_equal(back.values, povm.values)
    for (_, a), (_, b) in zip(back.atoms, povm.atoms):
        assert np.array_equal(a, b)


def test_distribution_text_round_trip():
    d = P.evaluate(P.obs_povm(*opalg.random_instance(4, 2)), np.eye(4) / 4)
    assert tuple(formats.distribution_from_text(formats.distribution_to_text(d))) == d.atoms


def test_matrix_parse_errors_carry_location(tmp_path):
    f = tmp_path / "m.json"
    f.write_text('{"dim": 2, "entries": [[1, 0], [0, 0], "x", [1, 0]]}')
    with pytest.raises(ParseError, match="row 1, col 0"):
        formats.read_matrix(f)
    f.write_text('{"dim": 2,\n "entries": [')
    with pytest.raises(ParseError, match="line 2"):
        formats.read_matrix(f)
