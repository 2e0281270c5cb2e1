"""Trapped-ion model: a harmonic oscillator coupled to a spin through its position.

Internally positions are x = X / sigma_X with sigma_X = sqrt(hbar / 2 m omega)
the ground-state width, and energies are in units of hbar*omega. With
b the oscillator lowering operator,

    x = b + b^dagger,   p = i (b^dagger - b),   [x, p] = 2i,
    H_HO = N + 1/2,     H_e = (w_z / 2 + g x / 2) sigma_z,

where w_z = omega_z / omega and g = a / sigma_X is the dimensionless coupling
(the Poisson mean of the displacement is lam = g^2). The evolution window is
half an oscillator period, so U = exp(-i pi H).

Two truncated bases are offered. "fock" is the plain number basis. "adapted"
uses, in spin sector s = +-1, the displaced number states D(-s g / 2)|n>,
which are the exact eigenstates of that sector's Hamiltonian; there U is
diagonal and U^dagger x' U = -x' holds exactly on the truncation.
"""

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext

import numpy as np

from . import opalg, protocols
from .errors import NumericalFailure, TruncationError

HBAR = 1.054571817e-34
TWO_PI = 2 * math.pi
DIGITS = 80


@dataclass(frozen=True)
class IonParams:
    omega: float = TWO_PI * 1.4e6
    omega_z: float = TWO_PI * 13e6
    delta_s: float = TWO_PI * 2.73e6
    k_sw: float = TWO_PI / 280e-9
    mass: float = 6.68e-26
    hbar: float = HBAR

    def __post_init__(self):
        for name in ("omega", "omega_z", "delta_s", "k_sw", "mass", "hbar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class IonDerived:
    a: float  # displacement, m
    sigma_x: float  # ground-state width, m
    lam: float  # Poisson mean g^2
    tau: float  # s
    g: float
    w_z: float


def derived(p):
    a = p.hbar * p.delta_s * p.k_sw / (2 * p.mass * p.omega ** 2)
    sx = math.sqrt(p.hbar / (2 * p.mass * p.omega))
    g = a / sx
    return IonDerived(a, sx, g * g, math.pi / p.omega, g, p.omega_z / p.omega)


def params_from_doc(doc):
    known = set(IonParams.__dataclass_fields__)
    extra = set(doc) - known
    if extra:
        raise ValueError(f"unknown parameter fields: {sorted(extra)}")
    return IonParams(**{k: float(v) for k, v in doc.items()})


# ---------------------------------------------------------------- special functions

@dataclass(frozen=True)
class Scaled:
    """A number too large for a float, as log|value| and sign."""
    log_abs: float
    sign: int


def hermite(n, x):
    """Physicists' Hermite polynomial by the three-term recurrence.

    Falls back to a rescaled recurrence and returns `Scaled` when the value
    does not fit in a float.
    """
    if not 0 <= n <= 200:
        raise ValueError("hermite needs 0 <= n <= 200")
    x = float(x)
    h0, h1 = 1.0, 2 * x
    if n == 0:
        return h0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n):
            h0, h1 = h1, 2 * x * h1 - 2 * k * h0
            if not math.isfinite(h1):
                return _hermite_scaled(n, x)
    return h1


def _hermite_scaled(n, x):
    h0, h1, shift = 1.0, 2 * x, 0.0
    for k in range(1, n):
        h0, h1 = h1, 2 * x * h1 - 2 * k * h0
        m = max(abs(h0), abs(h1))
        if m > 1e150:
            h0, h1, shift = h0 / m, h1 / m, shift + math.log(m)
    if h1 == 0:
        return 0.0
    return Scaled(shift + math.log(abs(h1)), 1 if h1 > 0 else -1)


def hermite_sum(n, x):
    """Explicit-sum form: sum_s (-1)^s (2x)^(n-2s) n! / ((n-2s)! s!)."""
    return math.fsum((-1) ** s * (2 * x) ** (n - 2 * s) * math.factorial(n)
                     / (math.factorial(n - 2 * s) * math.factorial(s)) for s in range(n // 2 + 1))


def _series_1f1(a, b, x, eps, one, max_terms=10_000):
    total, term = one, one
    for k in range(max_terms):
        term = term * (a + k) / (b + k) * x / (k + 1)
        total += term
        if abs(term) <= eps * abs(total) and k + 1 > x:
            return total
    raise NumericalFailure(f"1F1({a}, {b}, {x}) did not converge in {max_terms} terms")


def kummer_1f1(a, b, x):
    """Confluent hypergeometric 1F1(a; b; x) by its power series."""
    if b <= 0 and float(b).is_integer():
        raise ValueError("b must not be a nonpositive integer")
    return float(_series_1f1(float(a), float(b), float(x), 1e-17, 1.0))


def _half_gamma_over_sqrtpi(k, D):
    # Gamma(k + 1/2) / sqrt(pi) = (2k)! / (4^k k!)
    return D(math.factorial(2 * k)) / (D(4) ** k * D(math.factorial(k)))


def _f_reduced(n, s, a, sigma, D):
    """f(n, s, a, sigma) / sqrt(pi) in the numeric type D (float or Decimal)."""
    p = n - 2 * s
    a, sigma = D(a), D(sigma)
    z = a * a / (2 * sigma * sigma)
    two_s2 = 2 * sigma * sigma
    one = D(1)
    eps = D(10) ** (-(DIGITS - 5)) if D is Decimal else 1e-17
    if p % 2 == 0:
        k = p // 2
        m = _series_1f1(D(k) + D(1) / 2, D(1) / 2, z, eps, one)
        val = _sqrt(two_s2, D) ** (p + 1) * _half_gamma_over_sqrtpi(k, D) * m
    else:
        k = (p + 1) // 2
        m = _series_1f1(D(k) + D(1) / 2, D(3) / 2, z, eps, one)
        val = (-a / (sigma * sigma)) * _sqrt(two_s2, D) ** (p + 2) * _half_gamma_over_sqrtpi(k, D) * m
    return _exp(-z, D) * val


def _sqrt(x, D):
    return x.sqrt() if D is Decimal else math.sqrt(x)


def _exp(x, D):
    return x.exp() if D is Decimal else math.exp(x)


def f_integral_quad(n, s, a, sigma):
    from scipy.integrate import quad
    p = n - 2 * s
    lo, hi = -a - 40 * sigma, -a + 40 * sigma
    val, _ = quad(lambda x: x ** p * math.exp(-(x + a) ** 2 / (2 * sigma ** 2)), lo, hi,
                  points=[-a, 0.0] if lo < 0 < hi else [-a], limit=400, epsabs=0, epsrel=1e-13)
    return val


def f_integral(n, s, a, sigma, check=True, rtol=1e-8):
    """Integral of x^(n-2s) exp(-(x+a)^2 / 2 sigma^2) over the real line.

    Closed form through Gamma and 1F1; with `check` it is compared against
    adaptive quadrature and a disagreement raises NumericalFailure.
    """
    if not 0 <= 2 * s <= n:
        raise ValueError("need 0 <= 2s <= n")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    with localcontext() as ctx:
        ctx.prec = DIGITS
        val = float(_f_reduced(n, s, a, sigma, Decimal) * Decimal(math.pi).sqrt())
    if check:
        q = f_integral_quad(n, s, a, sigma)
        scale = max(abs(val), abs(q), 1e-300)
        if abs(val - q) > rtol * scale and abs(val - q) > 1e-12 * sigma ** (n - 2 * s + 1):
            raise NumericalFailure(f"f({n},{s}) closed form {val!r} disagrees with quadrature {q!r}")
    return val


def hho_amplitude(n, a, sigma):
    """|<n|U^+|0>| by the Hermite-sum / 1F1 closed form, evaluated in extended precision.

    U^+ is the spin-up block of the half-period evolution; `a` is the
    displacement and `sigma` the ground-state width, in any common length unit.
    """
    with localcontext() as ctx:
        ctx.prec = DIGITS
        D = Decimal
        sig = D(sigma)
        a_ = D(a)
        tot = D(0)
        r2 = D(2).sqrt()
        for s in range(n // 2 + 1):
            p = n - 2 * s
            c = D(math.factorial(n)) / (D(math.factorial(p)) * D(math.factorial(s)))
            tot += (r2 / sig) ** p * (-1) ** s * c * _f_reduced(n, s, a_, sig, D)
        # sqrt(pi) from f cancels against (2 pi sigma^2)^(-1/2)
        pref = (-(a_ * a_) / (2 * sig * sig)).exp() / (r2 * sig) / (D(2) ** n * D(math.factorial(n))).sqrt()
        return float(abs(pref * tot))


def tpm_hho_amplitude(p, n):
    """Probability |<n|U^+|0>|^2 of ending in level n from the ground state, spin up."""
    if not 0 <= n <= 40:
        raise ValueError("n must be in 0..40")
    d = derived(p)
    return hho_amplitude(n, d.g, 1.0) ** 2


def poisson(n, lam):
    return math.exp(-lam + n * math.log(lam) - math.lgamma(n + 1)) if lam > 0 else float(n == 0)


def normal_mass(mean, sd, lo, hi):
    """Mass of N(mean, sd^2) on [lo, hi], with erfc on the far tail for accuracy."""
    def cdf(t):
        z = (t - mean) / (sd * math.sqrt(2))
        return 0.5 * math.erfc(-z)
    return cdf(hi) - cdf(lo)


def interval(n, sign):
    """Energy bin I_n^sign, in hbar*omega: [n - 1/2, n + 1/2] and its mirror."""
    lo, hi = n - 0.5, n + 0.5
    return (lo, hi) if sign > 0 else (-hi, -lo)


@dataclass(frozen=True)
class Gaussian:
    mean: float
    sd: float

    def mass(self, lo, hi):
        return normal_mass(self.mean, self.sd, lo, hi)

    def cf(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(1j * u * self.mean - 0.5 * (self.sd * u) ** 2)


def tpm_he_distribution(p, n_bins=6):
    """TPM statistics of H_e from the ground state, spin up: N(-g^2, g^2) in hbar*omega units."""
    d = derived(p)
    gauss = Gaussian(-d.g ** 2, d.g)
    masses = {"I0": gauss.mass(-0.5, 0.5)}
    for n in range(1, n_bins + 1):
        masses[f"I{n}+"] = gauss.mass(*interval(n, +1))
        masses[f"I{n}-"] = gauss.mass(*interval(n, -1))
    return gauss, masses


def obs_coherent_distribution(p, alpha):
    """OBS statistics of the oscillator energy variation for the state |alpha, spin down>."""
    d = derived(p)
    return Gaussian(-2 * d.g * complex(alpha).real + d.g ** 2, d.g)


def fig1_closed_form(p):
    d = derived(p)
    gauss, masses = tpm_he_distribution(p)
    return {"lambda": d.lam, "g": d.g,
            "p_hho_I1_plus": tpm_hho_amplitude(p, 1),
            "p_hho_I1_plus_poisson": poisson(1, d.lam),
            "p_he_I1_minus": masses["I1-"], "p_he_I0": masses["I0"],
            "he_mean": gauss.mean, "he_sd": gauss.sd}


REFERENCE_SIGMA_DELTA = 0.243
REFERENCE_BOUND = 9.707
REFERENCE_ALPHA = 20j


def fig5_quantities(p, alpha):
    """Uncertainty-relation bookkeeping for the oscillator energy and the state |alpha, spin down>."""
    d = derived(p)
    g, alpha = d.g, complex(alpha)
    alpha_t = complex(alpha.real - g, alpha.imag)
    sd_delta = g
    sd_0, sd_t = abs(alpha), abs(alpha_t)
    comm = 2 * g * abs(alpha.imag)
    return {"alpha": alpha, "alpha_tau": alpha_t, "sigma_delta": sd_delta,
            "sigma_h0": sd_0, "sigma_ht": sd_t, "commutator": comm,
            "slack": sd_delta * (sd_0 + sd_t) - comm,
            "poisson_mean_0": abs(alpha) ** 2, "poisson_mean_t": abs(alpha_t) ** 2,
            "he_0": Gaussian(-(d.w_z + 2 * g * alpha.real) / 2, g / 2),
            "he_t": Gaussian(-d.w_z / 2 + g * alpha.real - g * g, g / 2),
            "obs_hho": obs_coherent_distribution(p, alpha)}


def reference_consistency():
    """Relative gap between 2 * sigma_delta * |Im alpha| and the printed bound, from the published triple."""
    implied = 2 * REFERENCE_SIGMA_DELTA * abs(REFERENCE_ALPHA.imag)
    return implied, abs(implied - REFERENCE_BOUND) / REFERENCE_BOUND


def sigma_delta_flag(p):
    """Computed sd of the variation against the published value (convention discrepancy, not gated)."""
    g = derived(p).g
    return {"computed": g, "reference": REFERENCE_SIGMA_DELTA, "ratio": g / REFERENCE_SIGMA_DELTA}


# ---------------------------------------------------------------- truncated matrices

def ladder(n_max):
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1).astype(complex)


@dataclass(frozen=True, eq=False)
class IonOperators:
    """Truncated operators on oscillator x spin, index = 2 n + (0 for up, 1 for down)."""
    x: np.ndarray
    p: np.ndarray
    n: np.ndarray
    h_ho: np.ndarray
    h_e: np.ndarray
    h: np.ndarray
    u_tau: np.ndarray
    n_max: int
    basis: str
    g: float
    w_z: float


SZ = np.diag([1.0, -1.0]).astype(complex)


def _interleave(up, down):
    # block-diagonal in spin, ordered as kron(oscillator, spin)
    k = up.shape[0]
    out = np.zeros((2 * k, 2 * k), dtype=complex)
    out[0::2, 0::2] = up
    out[1::2, 1::2] = down
    return out


def model_operators(p, n_max=64, basis="fock"):
    if n_max < 8:
        raise ValueError("n_max must be at least 8")
    opalg._check_dim(2 * (n_max + 1))
    d = derived(p)
    g, wz = d.g, d.w_z
    b = ladder(n_max)
    eye = np.eye(n_max + 1)
    xq = b + b.conj().T
    pq = 1j * (b.conj().T - b)
    num = b.conj().T @ b
    if basis == "fock":
        x, pm, n = (np.kron(m, np.eye(2)) for m in (xq, pq, num))
        h_ho = n + 0.5 * np.eye(2 * (n_max + 1))
        h_e = np.kron(0.5 * wz * eye + 0.5 * g * xq, SZ)
        h = h_ho + h_e
        u = opalg.mat_exp_i(h, -math.pi).mat
    elif basis == "adapted":
        blocks = {}
        for s in (1, -1):
            # x = x' - s g, b = b' - s g / 2 in the displaced basis
            xs = xq - s * g * eye
            ns = num - 0.5 * s * g * xq + 0.25 * g * g * eye
            energies = np.arange(n_max + 1) + 0.5 - 0.25 * g * g + 0.5 * s * wz
            blocks[s] = (xs, pq, ns, np.diag(np.exp(-1j * math.pi * energies)))
        x, pm, n, u = (_interleave(blocks[1][i], blocks[-1][i]) for i in range(4))
        h_ho = n + 0.5 * np.eye(2 * (n_max + 1))
        h_e = _interleave(0.5 * wz * eye + 0.5 * g * blocks[1][0],
                          -(0.5 * wz * eye + 0.5 * g * blocks[-1][0]))
        h = h_ho + h_e
    else:
        raise ValueError("basis must be 'fock' or 'adapted'")
    return IonOperators(x, pm, n, h_ho, h_e, h, u, n_max, basis, g, wz)


def coherent_amplitudes(alpha, n_max):
    alpha = complex(alpha)
    n = np.arange(n_max + 1)
    if alpha == 0:
        return (n == 0).astype(complex)
    logmag = -abs(alpha) ** 2 / 2 + n * math.log(abs(alpha)) - 0.5 * np.array([math.lgamma(k + 1) for k in n])
    return np.exp(logmag + 1j * n * np.angle(alpha))


def ion_state(ops, alpha=0j, spin=+1):
    """State vector of |alpha> (a coherent state; alpha = 0 is the ground state) times a spin eigenstate."""
    alpha = complex(alpha)
    if ops.basis == "fock":
        osc = coherent_amplitudes(alpha, ops.n_max)
    else:
        # <n'|alpha> = <n| D(s g/2) |alpha> = exp(-i beta Im alpha) <n|alpha + beta>, beta = s g / 2
        beta = spin * ops.g / 2
        osc = np.exp(-1j * beta * alpha.imag) * coherent_amplitudes(alpha + beta, ops.n_max)
    vec = np.zeros(2 * (ops.n_max + 1), dtype=complex)
    vec[(0 if spin > 0 else 1)::2] = osc
    return vec


def leakage(vec, top=2):
    """Population in the top `top` oscillator levels (both spins), plus any norm lost past the cutoff.

    Coherent amplitudes are exact, so 1 - |vec|^2 is the mass that never fit in the basis.
    """
    v = np.asarray(vec)
    missing = max(0.0, 1.0 - float(np.vdot(v, v).real))
    return float(np.sum(np.abs(v[-2 * top:]) ** 2)) + missing


def check_leakage(vec, limit=1e-6, strict=True):
    lk = leakage(vec)
    if lk > limit and strict:
        raise TruncationError(f"boundary population {lk:.3e} exceeds {limit:.1e}; raise n_max")
    return lk


def normalized_state(ops, alpha=0j, spin=+1, strict=True, limit=1e-6):
    vec = ion_state(ops, alpha, spin)
    lk = check_leakage(vec, limit, strict)
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise TruncationError("state lies entirely outside the truncated basis; raise n_max")
    return vec / norm, lk


def cf_cutoff(cf, tol=1e-13, step=0.5, u_limit=200.0):
    """First grid point where |G(u)| drops below `tol`.

    A truncated model reproduces a smooth law's characteristic function only
    up to some frequency; past it, discrete atoms make |G| grow again, so the
    inversion integral must stop where the true G has already died out.
    """
    u = np.arange(step, u_limit + step, step)
    small = np.flatnonzero(np.abs(cf(u)) < tol)
    if not len(small):
        raise NumericalFailure("characteristic function does not decay; cannot invert")
    return float(u[small[0]])


def interval_mass_from_cf(cf, lo, hi, u_max=None, panels=80, order=32):
    """Probability of [lo, hi] from a characteristic function by Gil-Pelaez inversion.

    F(hi) - F(lo) = (1/pi) int_0^inf Im[(e^{-iu lo} - e^{-iu hi}) G(u)] / u du,
    truncated at u_max (default: `cf_cutoff`) and integrated with composite
    Gauss-Legendre. Endpoints
    carrying atoms get half their mass, as for any Fourier inversion.
    """
    if u_max is None:
        u_max = cf_cutoff(cf)
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, u_max, panels + 1)
    tot = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        u = 0.5 * (b - a) * x + 0.5 * (a + b)
        val = np.imag((np.exp(-1j * u * lo) - np.exp(-1j * u * hi)) * cf(u)) / u
        tot += 0.5 * (b - a) * np.dot(w, val)
    return tot / math.pi


def fig1_matrix(p, n_max=64, strict=True):
    """Both Fig. 1 bin masses from truncated matrices and the generic protocol code.

    The oscillator bin comes from the TPM POVM in the plain number basis (its
    outcomes are exact integers). The spin-energy bin comes from the TPM POVM
    in the displaced basis, turned into a characteristic function and inverted
    over the bin.
    """
    fock = model_operators(p, n_max, "fock")
    psi, lk = normalized_state(fock, 0j, +1, strict)
    rho = np.outer(psi, psi.conj())
    hho = protocols.evaluate(protocols.tpm_povm(fock.h_ho, fock.u_tau), rho)
    p_plus = sum(q for z, q in hho.atoms if 0.5 < z < 1.5)

    adapted = model_operators(p, n_max, "adapted")
    psi_a, lk_a = normalized_state(adapted, 0j, +1, strict)
    rho_a = np.outer(psi_a, psi_a.conj())
    he = protocols.evaluate(protocols.tpm_povm(adapted.h_e, adapted.u_tau), rho_a)
    cf = lambda u: protocols.distribution_char_fn(he, u).values  # noqa: E731
    p_minus = interval_mass_from_cf(cf, *interval(1, -1))
    p_zero = interval_mass_from_cf(cf, -0.5, 0.5)
    return {"p_hho_I1_plus": float(p_plus), "p_he_I1_minus": float(p_minus), "p_he_I0": float(p_zero),
            "hho_distribution": hho, "he_distribution": he, "leakage": max(lk, lk_a)}


def hho_transition_probs(p, n_up_to=10, n_max=64):
    """|<n, up|U|0, up>|^2 from the truncated plain-basis evolution."""
    ops = model_operators(p, n_max, "fock")
    col = ops.u_tau[:, 0]
    return np.abs(col[0:2 * (n_up_to + 1):2]) ** 2


def fig5_matrix_populations(p, alpha, n_max=64, strict=True):
    """Number populations of |alpha, spin down> at 0 and after U, from the plain basis."""
    ops = model_operators(p, n_max, "fock")
    psi, lk = normalized_state(ops, alpha, -1, strict)
    later = ops.u_tau @ psi
    return np.abs(psi[1::2]) ** 2, np.abs(later[1::2]) ** 2, lk


def poisson_vector(lam, n_max):
    return np.array([poisson(n, lam) for n in range(n_max + 1)])
