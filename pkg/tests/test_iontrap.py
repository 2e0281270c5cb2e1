import math

import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from crinkit import iontrap as I, protocols as P
from crinkit.errors import TruncationError

PARAMS = I.IonParams()
D = I.derived(PARAMS)


def test_derived_quantities():
    assert D.lam == pytest.approx(0.1718, abs=1e-4)
    assert D.g == pytest.approx(math.sqrt(D.lam))
    assert D.tau == pytest.approx(math.pi / PARAMS.omega)
    # the Poisson mean has its own closed form in the raw parameters
    p = PARAMS
    assert D.lam == pytest.approx(p.hbar * p.delta_s ** 2 * p.k_sw ** 2 / (2 * p.mass * p.omega ** 3), rel=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        I.IonParams(mass=-1.0)
    with pytest.raises(ValueError):
        I.params_from_doc({"omega": 1.0, "spin": 2})


def test_hermite_small_cases():
    assert I.hermite(0, 0.3) == 1.0
    assert I.hermite(1, 0.3) == pytest.approx(0.6)
    assert I.hermite(3, 1.0) == -4.0


@seed(51)
@settings(max_examples=60, deadline=None)
@given(n=st.integers(0, 20), x=st.floats(-5, 5))
def test_hermite_recurrence_matches_explicit_sum(n, x):
    a, b = I.hermite(n, x), I.hermite_sum(n, x)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-9 * 10.0 ** n)


def test_hermite_overflow_falls_back_to_log_scale():
    v = I.hermite(200, 50.0)
    assert isinstance(v, I.Scaled) and v.sign == 1
    # integer x keeps the recurrence exact in Python ints
    prev, cur = 1, 100
    for k in range(1, 200):
        prev, cur = cur, 100 * cur - 2 * k * prev
    assert v.log_abs == pytest.approx(math.log(cur), rel=1e-12)


@pytest.mark.parametrize("x", [0.0, 0.5, 3.0, 10.0, 20.0])
def test_kummer_identities(x):
    assert I.kummer_1f1(0.7, 1.3, 0.0) == 1.0
    assert I.kummer_1f1(1, 1, x) == pytest.approx(math.exp(x), rel=1e-10)
    assert I.kummer_1f1(0.5, 0.5, x) == pytest.approx(math.exp(x), rel=1e-10)


def test_kummer_against_scipy():
    from scipy.special import hyp1f1
    for a, b, x in [(1.5, 0.5, 2.0), (3.5, 1.5, 0.3), (0.25, 2.5, 7.0)]:
        assert I.kummer_1f1(a, b, x) == pytest.approx(hyp1f1(a, b, x), rel=1e-10)


def test_f_integral_gaussian_moments():
    s = 0.8
    assert I.f_integral(0, 0, 0.4, s) == pytest.approx(math.sqrt(2 * math.pi) * s, rel=1e-12)
    assert I.f_integral(1, 0, 0.4, s) == pytest.approx(-0.4 * math.sqrt(2 * math.pi) * s, rel=1e-12)


@pytest.mark.parametrize("n", range(9))
def test_f_integral_closed_form_vs_quadrature(n):
    for s in range(n // 2 + 1):
        for a, sigma in [(1.0, 1.0), (D.g, 1.0), (-0.7, 1.9)]:
            closed = I.f_integral(n, s, a, sigma, check=False)
            assert closed == pytest.approx(I.f_integral_quad(n, s, a, sigma), rel=1e-8, abs=1e-14)


def test_amplitude_matches_poisson_all_levels():
    probs = [I.tpm_hho_amplitude(PARAMS, n) for n in range(41)]
    for n, p in enumerate(probs):
        assert p == pytest.approx(I.poisson(n, D.lam), rel=1e-12, abs=1e-300)
    assert sum(probs) == pytest.approx(1.0, abs=1e-9)


def test_amplitude_fig1_values():
    assert I.tpm_hho_amplitude(PARAMS, 0) == pytest.approx(0.842, abs=1e-3)
    assert I.tpm_hho_amplitude(PARAMS, 1) == pytest.approx(0.145, abs=1e-3)


def test_amplitude_vs_truncated_matrix():
    m = I.hho_transition_probs(PARAMS, 10, 64)
    for n in range(11):
        assert m[n] == pytest.approx(I.tpm_hho_amplitude(PARAMS, n), abs=1e-12)


def test_he_distribution_bins():
    gauss, masses = I.tpm_he_distribution(PARAMS, n_bins=12)
    assert gauss.mean == pytest.approx(-D.lam) and gauss.sd == pytest.approx(D.g)
    assert masses["I1-"] == pytest.approx(0.214, abs=1e-3)
    assert masses["I0"] == pytest.approx(0.733, abs=1e-3)
    assert sum(masses.values()) == pytest.approx(1.0, abs=1e-9)


def test_obs_coherent_descriptor():
    g = I.obs_coherent_distribution(PARAMS, 0)
    assert g.mean == pytest.approx(D.lam) and g.sd == pytest.approx(D.g)


@pytest.mark.parametrize("basis", ["fock", "adapted"])
def test_operator_structure(basis):
    ops = I.model_operators(PARAMS, 40, basis)
    sz = np.kron(np.eye(41), I.SZ)
    assert np.linalg.norm(ops.h @ sz - sz @ ops.h) <= 1e-10
    c = ops.x @ ops.p - ops.p @ ops.x
    interior = 2 * 35
    assert np.allclose(c[:interior, :interior], 2j * np.eye(interior), atol=1e-10)
    assert np.allclose(ops.u_tau.conj().T @ ops.u_tau, np.eye(82), atol=1e-10)


def test_variation_matches_displacement_form():
    ops = I.model_operators(PARAMS, 64, "fock")
    delta = P.variation_operator(ops.h_ho, ops.u_tau)
    sz = np.kron(np.eye(65), I.SZ)
    want = D.g * (ops.x @ sz + D.g * np.eye(130))
    k = 2 * 40
    assert np.allclose(delta[:k, :k], want[:k, :k], atol=1e-6 * np.abs(want[:k, :k]).max())


def test_adapted_basis_commutes_exactly_enough():
    ops = I.model_operators(PARAMS, 64, "adapted")
    later = ops.u_tau.conj().T @ ops.h_e @ ops.u_tau
    assert np.linalg.norm(later @ ops.h_e - ops.h_e @ later) <= 1e-9


def test_leakage_guard():
    ops = I.model_operators(PARAMS, 16, "fock")
    with pytest.raises(TruncationError):
        I.normalized_state(ops, 3.0, -1)
    _, lk = I.normalized_state(ops, 3.0, -1, strict=False)
    assert lk > 1e-6


def test_gil_pelaez_recovers_gaussian_mass():
    g = I.Gaussian(-0.3, 0.5)
    assert I.interval_mass_from_cf(g.cf, -1.0, 0.2) == pytest.approx(g.mass(-1.0, 0.2), abs=1e-12)


def test_fig1_routes_agree():
    closed = I.fig1_closed_form(PARAMS)
    mat = I.fig1_matrix(PARAMS)
    assert mat["p_hho_I1_plus"] == pytest.approx(closed["p_hho_I1_plus"], abs=1e-10)
    assert mat["p_he_I1_minus"] == pytest.approx(closed["p_he_I1_minus"], abs=1e-10)
    assert mat["p_he_I0"] == pytest.approx(closed["p_he_I0"], abs=1e-10)


def test_fig5_records():
    q = I.fig5_quantities(PARAMS, 20j)
    assert q["alpha_tau"] == pytest.approx(complex(-D.g, 20))
    assert q["commutator"] == pytest.approx(2 * D.g * 20)
    assert q["slack"] >= 0
    implied, gap = I.reference_consistency()
    assert implied == pytest.approx(9.72) and gap < 5e-3


@seed(52)
@settings(max_examples=40, deadline=None)
@given(re=st.floats(-30, 30), im=st.floats(-30, 30))
def test_uncertainty_slack_nonnegative(re, im):
    assert I.fig5_quantities(PARAMS, complex(re, im))["slack"] >= -1e-12


def test_fig5_matrix_populations():
    p0, pt, _ = I.fig5_matrix_populations(PARAMS, 2j)
    q = I.fig5_quantities(PARAMS, 2j)
    assert 0.5 * np.abs(p0 - I.poisson_vector(q["poisson_mean_0"], 64)).sum() < 1e-10
    assert 0.5 * np.abs(pt - I.poisson_vector(q["poisson_mean_t"], 64)).sum() < 1e-10


def test_obs_moments_from_matrices():
    ops = I.model_operators(PARAMS, 64, "adapted")
    for alpha in (0, 1.5j, 1 - 1j):
        psi, _ = I.normalized_state(ops, alpha, -1)
        d = P.evaluate(P.obs_povm(ops.h_ho, ops.u_tau), np.outer(psi, psi.conj()))
        mean, var = P.moments(d)
        g = I.obs_coherent_distribution(PARAMS, alpha)
        assert mean == pytest.approx(g.mean, abs=1e-6)
        assert var == pytest.approx(g.sd ** 2, abs=1e-6)


def test_spin_energy_descriptors_from_matrices():
    ops = I.model_operators(PARAMS, 64, "adapted")
    alpha = 1 + 2j
    q = I.fig5_quantities(PARAMS, alpha)
    psi, _ = I.normalized_state(ops, alpha, -1)
    later = ops.u_tau @ psi
    for vec, g in ((psi, q["he_0"]), (later, q["he_t"])):
        m1 = np.vdot(vec, ops.h_e @ vec).real
        m2 = np.vdot(vec, ops.h_e @ ops.h_e @ vec).real
        assert m1 == pytest.approx(g.mean, abs=1e-8)
        assert math.sqrt(m2 - m1 ** 2) == pytest.approx(g.sd, abs=1e-8)
