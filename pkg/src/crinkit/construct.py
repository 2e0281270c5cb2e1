"""Construction of an auxiliary probe system that commutes with a conserved total.

Given H1 and U, we build an auxiliary unitary U' (diagonal, with eigenphases
from the permutation algorithm below), a probe vector |v>, and a Hermitian
H2 on the product space such that

    [H1 x 1 + H2, U x U'] = 0,
    H2 |d_i, v> = E |d_i, v>,
    (U x U')^dagger H2 (U x U') |d_i, v> = (E - d_i) |d_i, v>,

where |d_i> is an eigenvector of the variation observable with eigenvalue d_i.
The result is packaged as a certificate whose residuals are recomputed by
`verify_certificate` from the matrices alone.

Phases are handled in turns (fractions of 2*pi): exact `Fraction` values
reduced mod 1 in rational mode, floats in [0, 1) in float mode.
"""

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import opalg, protocols
from .errors import ConflictingAssignment, CoverageError, InstanceTooLarge, NumericalFailure, PreconditionError

FLOAT_PHASE_TOL = 1e-10 / (2 * np.pi)  # 1e-10 rad, in turns
LATTICE_CAP = 100_000


def k_index(level):
    """1-based position where `level` starts: 1 + sum_{m<level} (2m+1)^m."""
    return 1 + sum((2 * m + 1) ** m for m in range(1, level))


def reduce_phase(p):
    if isinstance(p, Fraction):
        return p - (p.numerator // p.denominator)
    x = float(p) % 1.0
    return 0.0 if x >= 1.0 - FLOAT_PHASE_TOL else x


def phases_equal(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return reduce_phase(a - b) == 0
    d = abs(float(a) - float(b)) % 1.0
    return min(d, 1.0 - d) <= FLOAT_PHASE_TOL


def to_radians(p):
    return 2 * np.pi * float(p)


@dataclass
class PhaseLattice:
    level: int
    phases: list  # position p (0-based) is lattice index p + 1
    coefficients: list  # integer vector (i_1, ..., i_l) per entry, over theta_1..theta_l
    theta: list
    rational: bool

    def __len__(self):
        return len(self.phases)

    def radians(self):
        return np.array([to_radians(p) for p in self.phases])


def permutation_phases(theta, l_max, cap=LATTICE_CAP):
    """Auxiliary phase list from bounded integer combinations of the input phases.

    Level l enumerates every (i_1, ..., i_l) in [-l, l]^l and appends
    sum_j i_j theta_j, with the coefficient of theta_1 varying fastest; the
    input list is reused cyclically when l exceeds its length. Levels 1..l_max
    are concatenated, so level l starts at 1-based index k_index(l).
    """
    if not len(theta):
        raise ValueError("theta must be nonempty")
    rational = all(isinstance(t, Fraction) for t in theta)
    theta = [reduce_phase(t) for t in theta]
    total = k_index(l_max + 1) - 1
    if total > cap:
        raise InstanceTooLarge(f"lattice with {total} entries exceeds cap {cap}")
    phases, coefs = [], []
    for level in range(1, l_max + 1):
        base = [theta[j % len(theta)] for j in range(level)]
        for t in itertools.product(range(-level, level + 1), repeat=level):
            c = tuple(reversed(t))
            s = sum((ci * b for ci, b in zip(c, base)), Fraction(0) if rational else 0.0)
            phases.append(reduce_phase(s))
            coefs.append(c)
    return PhaseLattice(l_max, phases, coefs, theta, rational)


def coverage_level(theta, lattice, m, k, j):
    """Smallest 0-based lattice position l with theta'_l + theta_k = theta'_j + theta_m (mod 1).

    Equal phases theta_m = theta_k are matched by j itself.
    """
    if phases_equal(theta[m], theta[k]):
        return j
    target = lattice.phases[j] + theta[m] - theta[k]
    for pos, p in enumerate(lattice.phases):
        if phases_equal(p, target):
            return pos
    return None


@dataclass
class ProbeVector:
    components: np.ndarray
    alpha_v: complex


def build_probe_vector(dim_aux, alpha_v):
    """Truncated coherent-like vector whose components all have nonzero real and imaginary parts.

    Component m is exp(i eta_m) exp(-|a|^2/2) a^m / sqrt(m!), where eta_m = 0
    when a^m already has both parts nonzero and pi/4 otherwise.
    """
    alpha_v = complex(alpha_v)
    if alpha_v == 0:
        raise ValueError("alpha_v must be nonzero")
    if dim_aux < 1:
        raise ValueError("dim_aux must be >= 1")
    m = np.arange(dim_aux)
    logmag = -abs(alpha_v) ** 2 / 2 + m * np.log(abs(alpha_v)) - 0.5 * np.array(
        [np.sum(np.log(np.arange(1, k + 1))) for k in m])
    if logmag.min() < np.log(1e-150):
        raise NumericalFailure("probe component underflows 1e-150; reduce dim_aux")
    ang = m * np.angle(alpha_v)
    re, im = np.cos(ang), np.sin(ang)
    both = (np.abs(re) > 1e-12) & (np.abs(im) > 1e-12)
    eta = np.where(both, 0.0, np.pi / 4)
    beta = np.exp(logmag + 1j * (ang + eta))
    beta = beta / np.linalg.norm(beta)
    if np.any(beta.real == 0) or np.any(beta.imag == 0):
        raise NumericalFailure("probe component with a vanishing real or imaginary part")
    return ProbeVector(beta, alpha_v)


@dataclass
class Result2Certificate:
    u_prime: opalg.UnitaryOp
    h2: opalg.HermitianOp
    v: ProbeVector
    target: int
    delta: float
    e_i: float
    e_i_prime: float
    r_comm: float
    r_eig0: float
    r_eigt: float
    ledger: dict = field(default_factory=dict)

    def to_doc(self):
        from .formats import matrix_to_doc
        return {"target": self.target, "delta": self.delta, "E": self.e_i,
                "E_prime": self.e_i_prime, "r_comm": self.r_comm, "r_eig0": self.r_eig0,
                "r_eigt": self.r_eigt, "alpha_v": [self.v.alpha_v.real, self.v.alpha_v.imag],
                "probe": [[float(z.real), float(z.imag)] for z in self.v.components],
                "u_prime": matrix_to_doc(self.u_prime.mat), "h2": matrix_to_doc(self.h2.mat),
                "ledger": self.ledger}


def rational_phases(u, max_den=1000, tol=1e-9):
    """Eigenphases of U as exact fractions of a turn, with the eigenvector matrix."""
    es = opalg.unitary_eig(u)
    out = []
    for ph in es.phases:
        q = Fraction(float(ph) / (2 * np.pi)).limit_denominator(max_den)
        err = abs(np.exp(1j * ph) - np.exp(2j * np.pi * float(q)))
        if err > tol:
            raise PreconditionError(f"eigenphase {ph!r} is not a rational turn with denominator <= {max_den}; "
                                    "use float phases")
        out.append(reduce_phase(q))
    return out, es.vectors


def _class_labels(values, rational):
    if rational:
        keys = {}
        return np.array([keys.setdefault(v, len(keys)) for v in values])
    order = np.argsort(values)
    labels = np.empty(len(values), dtype=int)
    cur, prev = 0, None
    for idx in order:
        if prev is not None and values[idx] - prev > FLOAT_PHASE_TOL:
            cur += 1
        labels[idx] = cur
        prev = values[idx]
    # wrap-around: values near 1 join the class of values near 0
    first, last = order[0], order[-1]
    if values[first] + 1.0 - values[last] <= FLOAT_PHASE_TOL:
        labels[labels == labels[last]] = labels[first]
    return labels


def _difference_set(phases, rational):
    if rational:
        return {reduce_phase(a - b) for a in phases for b in phases}
    d = np.mod(np.subtract.outer(np.array(phases, float), np.array(phases, float)), 1.0).ravel()
    return np.sort(d)


def _has_difference(diffs, value, rational):
    if rational:
        return reduce_phase(value) in diffs
    v = float(value) % 1.0
    i = np.searchsorted(diffs, v)
    near = [diffs[j] for j in (i - 1, i, 0, len(diffs) - 1) if 0 <= j < len(diffs)]
    return any(phases_equal(v, x) for x in near)


def _coverage_ok(theta, aux_phases, alpha, h1u, rational, tol=1e-12):
    """Every mismatched coupling that the eigen-equation must cancel has at least one phase match."""
    diffs = _difference_set(aux_phases, rational)
    d = len(theta)
    for m in range(d):
        for k in range(d):
            if phases_equal(theta[m], theta[k]) or abs(h1u[m, k]) <= tol:
                continue
            if abs(alpha[k]) <= tol and abs(alpha[m]) <= tol:
                continue
            if not _has_difference(diffs, theta[m] - theta[k], rational):
                return False
    return True


def max_probe_dim(alpha_v, floor=1e-150):
    """Largest auxiliary dimension whose probe components all stay above `floor`."""
    a = abs(complex(alpha_v))
    logmag, n = -a * a / 2, 0
    while logmag >= np.log(floor) and n < 100_000:
        n += 1
        logmag += np.log(a) - 0.5 * np.log(n)
    return n


def min_eig_residual(h1u, psi, labels):
    """Smallest ||H2 psi - E psi|| reachable by any Hermitian H2 obeying exact commutation.

    Exact commutation forces H1 x 1 + H2 to be block diagonal over the phase
    classes of U x U'. Within a class C the block can send psi_C anywhere with
    real overlap on psi_C, so the unreachable part is |Im <psi_C|(H1 x 1) psi>|
    / ||psi_C|| (or the whole target when psi_C vanishes).
    """
    aux = len(psi) // h1u.shape[0]
    target = np.kron(h1u, np.eye(aux)) @ psi
    tot = 0.0
    for c in np.unique(labels):
        idx = labels == c
        pc, tc = psi[idx], target[idx]
        n2 = float(np.vdot(pc, pc).real)
        if n2 > 1e-300:
            tot += np.vdot(pc, tc).imag ** 2 / n2
        else:
            tot += float(np.vdot(tc, tc).real)
    return float(np.sqrt(tot))


def _projected_fill(h1u, psi, labels, energy):
    """Class-by-class Hermitian completion with the least eigen-equation residual."""
    aux = len(psi) // h1u.shape[0]
    lifted = np.kron(h1u, np.eye(aux))
    w = energy * psi + lifted @ psi
    k = np.zeros_like(lifted)
    n_free = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        n_free += len(idx) * (len(idx) + 1) // 2
        pc, wc = psi[idx], w[idx]
        n2 = float(np.vdot(pc, pc).real)
        if n2 <= 1e-300:
            continue
        ov = np.vdot(pc, wc).real
        kc = (np.outer(wc, pc.conj()) + np.outer(pc, wc.conj())) / n2 - ov * np.outer(pc, pc.conj()) / n2 ** 2
        k[np.ix_(idx, idx)] = kc
    h2 = -lifted + k
    return h2, {"free_variables": n_free}


class _Assignments:
    """Write-once record of tuned matrix elements (and their Hermitian partners)."""

    def __init__(self, n):
        self.values = {}
        self.n = n

    def get(self, r, c):
        return self.values.get((r, c))

    def set(self, r, c, value, rule):
        for key, val in (((r, c), value), ((c, r), np.conj(value))):
            old = self.values.get(key)
            if old is not None:
                if abs(old[0] - val) > 1e-12 * max(1.0, abs(val)):
                    raise ConflictingAssignment(f"element {key} reassigned ({rule})")
                continue
            self.values[key] = (val, rule)


def _recipe_fill(h1u, alpha, beta, theta, lattice, labels, energy, tol=1e-12):
    """Row-by-row tuning of the free elements following the inductive recipe.

    Rows (m, j) are visited with j outermost. Same-m elements follow the
    diagonal rule h_{mj,ml} = E delta_{jl}; rows with alpha_m = 0 place their
    whole compensation on the free element with smallest k + l (ties: smallest
    k) whose column has alpha_k != 0; other rows cancel each mismatched H1
    term on the smallest still-free matching column l > j. Anything never
    tuned is left at zero. On a finite lattice the last rows of each chain
    have no free column left, which is where the residual collects.
    """
    d, aux = len(theta), len(beta)
    n = d * aux
    lifted = np.kron(h1u, np.eye(aux))
    same = labels[:, None] == labels[None, :]
    asg = _Assignments(n)
    rules = {"diagonal": 0, "alpha_zero": 0, "induction": 0, "uncovered_rows": 0}
    nz = np.abs(alpha) > tol
    idx = lambda m, j: m * aux + j  # noqa: E731

    # alpha_m = 0 rows: one compensating element each
    for j in range(aux):
        for m in range(d):
            if nz[m]:
                continue
            r = idx(m, j)
            need = sum(h1u[m, k] * alpha[k] * beta[j] for k in range(d)
                       if not phases_equal(theta[m], theta[k]))
            cands = [(k + l, k, l) for k in range(d) for l in range(aux)
                     if nz[k] and same[r, idx(k, l)] and asg.get(r, idx(k, l)) is None]
            if abs(need) > 0 and cands:
                _, kb, lb = min(cands)
                asg.set(r, idx(kb, lb), need / (alpha[kb] * beta[lb]), "alpha_zero")
                rules["alpha_zero"] += 1
            elif abs(need) > 0:
                rules["uncovered_rows"] += 1

    for j in range(aux):
        for m in range(d):
            if not nz[m]:
                continue
            r = idx(m, j)
            for l in range(aux):
                c = idx(m, l)
                if same[r, c] and asg.get(r, c) is None:
                    asg.set(r, c, energy if l == j else 0.0, "diagonal")
                    rules["diagonal"] += 1
            for k in range(d):
                if k == m or not nz[k] or phases_equal(theta[m], theta[k]):
                    continue
                cols = [l for l in range(aux) if same[r, idx(k, l)]]
                done = sum(asg.get(r, idx(k, l))[0] * beta[l] for l in cols
                           if asg.get(r, idx(k, l)) is not None)
                want = h1u[m, k] * beta[j] - done
                free = [l for l in cols if l > j and asg.get(r, idx(k, l)) is None]
                if free:
                    asg.set(r, idx(k, free[0]), want / beta[free[0]], "induction")
                    rules["induction"] += 1
                elif abs(want) > 0:
                    rules["uncovered_rows"] += 1

    h2 = np.where(same, 0.0, -lifted).astype(complex)
    for (r, c), (val, _) in asg.values.items():
        h2[r, c] = val
    h2 = 0.5 * (h2 + h2.conj().T)
    rules["free_variables"] = int(same.sum())
    rules["assigned"] = len(asg.values)
    return h2, rules


def fill_h2(h1, u, target, aux_dim=None, l_max=2, alpha_v=1 + 0.5j, energy=1.0,
            phases="rational", policy="projected", max_den=1000):
    """Build the probe Hamiltonian and its certificate.

    `policy="projected"` completes each phase class with the Hermitian block
    of least eigen-equation residual (this attains `min_eig_residual`
    exactly). `policy="recipe"` follows the row-by-row inductive recipe on the
    truncated lattice. The lattice is deepened level by level until every
    needed phase match exists for the first auxiliary row, up to `l_max`.
    """
    h1m, um = opalg.hermitian(h1).mat, opalg.unitary(u, tol=1e-9).mat
    var = protocols.variation_observable(h1m, um)
    delta = float(var.eig.values[target])
    dvec = var.eig.vectors[:, target]
    if phases == "rational":
        theta, vecs = rational_phases(um, max_den)
    else:
        es = opalg.unitary_eig(um)
        theta, vecs = [reduce_phase(p / (2 * np.pi)) for p in es.phases], es.vectors
    h1u = vecs.conj().T @ h1m @ vecs
    alpha = vecs.conj().T @ dvec

    rational = phases == "rational"
    cap = max_probe_dim(alpha_v)
    level, lattice, naux = None, None, 0
    for lev in range(1, l_max + 1):
        lat = permutation_phases(theta, lev)
        n = min(len(lat), cap) if aux_dim is None else aux_dim
        if n > len(lat):
            continue
        if _coverage_ok(theta, lat.phases[:n], alpha, h1u, rational):
            level, lattice, naux = lev, lat, n
            break
    if lattice is None:
        raise CoverageError(f"no phase-match coverage up to level {l_max}", level=l_max)
    ph = lattice.phases[:naux]
    beta = build_probe_vector(naux, alpha_v).components
    psi = np.kron(alpha, beta)
    opalg._check_dim(len(psi))
    sums = [reduce_phase(t + p) for t in theta for p in ph]
    labels = _class_labels(sums if rational else np.array([float(x) for x in sums]), rational)

    if policy == "projected":
        h2u, info = _projected_fill(h1u, psi, labels, energy)
    elif policy == "recipe":
        h2u, info = _recipe_fill(h1u, alpha, beta, theta, lattice, labels, energy)
    else:
        raise ValueError("policy must be 'projected' or 'recipe'")

    basis = np.kron(vecs, np.eye(naux))
    h2 = basis @ h2u @ basis.conj().T
    h2 = 0.5 * (h2 + h2.conj().T)
    uprime = np.diag(np.exp(2j * np.pi * np.array([float(p) for p in ph])))
    ledger = dict(info)
    ledger.update(policy=policy, level=level, aux_dim=naux, lattice_size=len(lattice), n_classes=int(len(np.unique(labels))),
                  min_eig_residual=min_eig_residual(h1u, psi, labels),
                  phases=[str(t) for t in theta] if rational else [float(t) for t in theta])
    cert = Result2Certificate(opalg.UnitaryOp(uprime, 0.0), opalg.HermitianOp(h2, 0.0),
                              ProbeVector(beta, complex(alpha_v)), int(target), delta,
                              float(energy), float(energy - delta), 0.0, 0.0, 0.0, ledger)
    rep = verify_certificate(cert, h1m, um, target)
    cert.r_comm, cert.r_eig0, cert.r_eigt = rep["r_comm"], rep["r_eig0"], rep["r_eigt"]
    return cert


def verify_certificate(cert, h1, u, target):
    """Recompute every certificate claim from the matrices alone."""
    h1m, um = opalg.arr(h1), opalg.arr(u)
    up, h2 = cert.u_prime.mat, cert.h2.mat
    naux = up.shape[0]
    var = protocols.variation_observable(h1m, um)
    delta = float(var.eig.values[target])
    psi = np.kron(var.eig.vectors[:, target], cert.v.components)
    w = np.kron(um, up)
    x = np.kron(h1m, np.eye(naux)) + h2
    r_comm = float(np.linalg.norm(x @ w - w @ x))
    r_eig0 = float(np.linalg.norm(h2 @ psi - cert.e_i * psi))
    later = w.conj().T @ h2 @ w
    r_eigt = float(np.linalg.norm(later @ psi - cert.e_i_prime * psi))
    herm = float(np.max(np.abs(h2 - h2.conj().T)))
    rq0 = float(np.vdot(psi, h2 @ psi).real)
    rqt = float(np.vdot(psi, later @ psi).real)
    energy_gap = abs(cert.e_i_prime - (cert.e_i - delta))
    return {"r_comm": r_comm, "r_eig0": r_eig0, "r_eigt": r_eigt, "hermiticity": herm,
            "delta": delta, "energy_gap": energy_gap, "rayleigh_0": rq0, "rayleigh_t": rqt,
            "energy_consistent": energy_gap <= 1e-9 and abs(rq0 - rqt - delta) <= 1e-9,
            "hermitian": herm <= 1e-12}


@dataclass
class ProbeReport:
    distribution: protocols.OutcomeDistribution
    direct: protocols.OutcomeDistribution
    tv: float
    w1: float
    gate_later: float
    gate_variation: float


def special_case_probe(h_total, h1, u, rho, gate_tol=1e-9, atom_tol=None):
    """Infer the OBS statistics of H1 from measuring H2 = h_total - h1 at both ends.

    Applies only when H2 commutes with its evolved version U^dagger H2 U and
    with the variation observable of H1; returns None otherwise. The joint
    eigenbasis of (H2, U^dagger H2 U) is obtained by diagonalizing H2 and then
    the evolved operator inside each H2 eigenspace; each joint eigenvector
    contributes the value e - e' with weight <phi|rho|phi>.
    """
    hm, h1m, um = opalg.arr(h_total), opalg.arr(h1), opalg.arr(u)
    h2 = hm - h1m
    later = um.conj().T @ h2 @ um
    var_op = protocols.variation_operator(h1m, um)
    gl = float(np.linalg.norm(later @ h2 - h2 @ later))
    gv = float(np.linalg.norm(var_op @ h2 - h2 @ var_op))
    if gl > gate_tol or gv > gate_tol:
        return None
    r = opalg.arr(rho)
    bins, es, _ = protocols.spectral_bins(h2)
    atoms = []
    start = 0
    for e, _, g in bins:
        v = es.vectors[:, start:start + g]
        start += g
        ww, vv = np.linalg.eigh(v.conj().T @ later @ v)
        phi = v @ vv
        for k in range(g):
            weight = float(np.real(np.vdot(phi[:, k], r @ phi[:, k])))
            atoms.append((e - ww[k], weight))
    atoms.sort()
    direct = protocols.evaluate(protocols.obs_povm(h1m, um), r)
    tol = atom_tol or protocols.default_bin_tol(var_op)
    merged = protocols.canonicalize(protocols.OutcomeDistribution(tuple(atoms)), tol)
    tv, w1 = protocols.distribution_distance(merged, direct, tol)
    return ProbeReport(merged, direct, tv, w1, gl, gv)
