"""Checkers for the four consistency conditions on energy-variation protocols.

1. conservation: a conserved pair (H1 + H2 commutes with U) has mirrored
   outcome statistics;
2. reality: joint eigenstates of H1 before and after U give sharp outcomes;
3. linearity: statistics are affine in the initial state;
4. no-signaling: an idle ancilla evolving under its own unitary changes nothing.

A protocol is any callable ``(h1, u) -> Povm`` (``obs_povm``, ``tpm_povm``).
A callable that also has a ``distribution(h1, u, rho)`` method is evaluated
through that method instead, which lets tests plug in state-dependent
(non-POVM) fixtures.
"""

from dataclasses import dataclass, field

import numpy as np

from . import opalg, protocols
from .errors import DimensionError, PreconditionError

CHECK_TOL = 1e-9
COMMUTE_TOL = 1e-10
RANK_TOL = 1e-8
LAMBDAS = (0.25, 0.5, 0.75)


@dataclass
class CrinReport:
    condition: str
    passed: bool
    worst_violation: float
    witness: str
    tol: float
    info: dict = field(default_factory=dict)

    def to_doc(self):
        return {"condition": self.condition, "passed": bool(self.passed),
                "worst_violation": float(self.worst_violation), "tol": float(self.tol),
                "witness": self.witness, "info": self.info}


def _report(condition, worst, witness, tol, **info):
    return CrinReport(condition, bool(worst <= tol), float(worst), witness, tol, info)


def _distribution(protocol, h1, u, rho):
    if hasattr(protocol, "distribution"):
        return protocol.distribution(h1, u, rho)
    return protocols.evaluate(protocol(h1, u), rho)


def _atom_tol(*ops):
    return max(protocols.default_bin_tol(o) for o in ops)


def atomwise_gap(a, b, atom_tol):
    """Largest absolute mass difference over atoms grouped within atom_tol."""
    pts = sorted([(z, p, 0) for z, p in a.atoms] + [(z, p, 1) for z, p in b.atoms])
    worst, i = 0.0, 0
    while i < len(pts):
        mass = [0.0, 0.0]
        j = i
        while j < len(pts) and pts[j][0] - pts[i][0] <= atom_tol:
            mass[pts[j][2]] += pts[j][1]
            j += 1
        worst = max(worst, abs(mass[0] - mass[1]))
        i = j
    return worst


def mixture(a, b, lam):
    pts = {}
    for z, p in a.atoms:
        pts[z] = pts.get(z, 0.0) + lam * p
    for z, p in b.atoms:
        pts[z] = pts.get(z, 0.0) + (1 - lam) * p
    return protocols.OutcomeDistribution(tuple(sorted(pts.items())))


def binned_masses(dist, edges):
    z, p = dist.values, dist.probs
    idx = np.searchsorted(edges, z, side="right") - 1
    out = np.zeros(len(edges) - 1)
    for k, q in zip(idx, p):
        if 0 <= k < len(out):
            out[k] += q
    return out


def haar_states(dim, count, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        out.append(opalg.pure(v))
    return out


def default_states(dim, seed=0, n_haar=20, extra=()):
    """Computational basis states, Haar-random pure states, the maximally mixed state, extras."""
    states = [opalg.pure(np.eye(dim)[k]) for k in range(dim)]
    states += haar_states(dim, n_haar, seed)
    states.append(opalg.maximally_mixed(dim))
    states += list(extra)
    return states


def lemma_witness_states(povm_a, povm_b_reflected, atom_tol):
    """States exposing any operator difference between two POVMs with aligned atoms.

    For each atom the difference D of effects is examined in the computational
    basis: a nonzero diagonal entry j gives the witness |j>; otherwise the
    largest off-diagonal entry D_jk = phi gives (|j> + conj(phi)|k>)/norm,
    whose expectation of D is 2|phi|^2 / norm^2.
    """
    dim = povm_a.dim
    out = []
    for z, diff in _aligned_differences(povm_a, povm_b_reflected, atom_tol):
        if np.max(np.abs(diff)) < 1e-12:
            continue
        d = np.abs(np.diag(diff))
        if d.max() > 1e-12:
            out.append(opalg.pure(np.eye(dim)[int(np.argmax(d))]))
            continue
        off = np.abs(diff - np.diag(np.diag(diff)))
        j, k = np.unravel_index(int(np.argmax(off)), off.shape)
        phi = diff[j, k]
        v = np.zeros(dim, dtype=complex)
        v[j], v[k] = 1.0, np.conj(phi)
        out.append(opalg.pure(v))
    return out


def _aligned_differences(pa, pb, atom_tol):
    """Pairs (z, M_a(z) - M_b(z)) over the union of atoms aligned within atom_tol."""
    dim = pa.dim
    zero = np.zeros((dim, dim), dtype=complex)
    items = sorted([(z, m, 0) for z, m in pa.atoms] + [(z, m, 1) for z, m in pb.atoms],
                   key=lambda t: t[0])
    out, i = [], 0
    while i < len(items):
        acc = [zero.copy(), zero.copy()]
        j = i
        while j < len(items) and items[j][0] - items[i][0] <= atom_tol:
            acc[items[j][2]] = acc[items[j][2]] + items[j][1]
            j += 1
        out.append((items[i][0], acc[0] - acc[1]))
        i = j
    return out


def reflect_povm(p):
    return protocols.Povm([(-z, m) for z, m in reversed(p.atoms)], p.kind)


def require_conserved(h1, h2, u, tol=COMMUTE_TOL):
    a, b, c = opalg.arr(h1), opalg.arr(h2), opalg.arr(u)
    if not a.shape == b.shape == c.shape:
        raise DimensionError(f"H1 {a.shape}, H2 {b.shape} and U {c.shape} differ")
    total = a + b
    c = np.linalg.norm(opalg.commutator(total, u))
    scale = max(1.0, np.linalg.norm(total))
    if c > tol * scale:
        raise PreconditionError(
            f"pair is not conserved: ||[H1+H2, U]||_F = {c:.3e}")
    return c


def check_conservation(protocol, h1, h2, u, states=None, tol=CHECK_TOL, atom_tol=None,
                       bin_edges=None):
    """Worst distance between the H1 statistics and the mirrored H2 statistics.

    With `bin_edges` the comparison is made on interval masses instead of
    atoms (useful for truncated continuous models).
    """
    require_conserved(h1, h2, u)
    dim = opalg.arr(h1).shape[0]
    atol = atom_tol or _atom_tol(protocols.variation_operator(h1, u))
    if states is None:
        extra = []
        if not hasattr(protocol, "distribution"):
            extra = lemma_witness_states(protocol(h1, u), reflect_povm(protocol(h2, u)), atol)
        states = default_states(dim, extra=extra)
    worst, where = 0.0, "none"
    for idx, rho in enumerate(states):
        d1 = _distribution(protocol, h1, u, rho)
        d2 = _distribution(protocol, h2, u, rho).reflected()
        if bin_edges is not None:
            v = 0.5 * float(np.sum(np.abs(binned_masses(d1, bin_edges) - binned_masses(d2, bin_edges))))
        else:
            v = protocols.distribution_distance(d1, d2, atol)[0]
        if v > worst:
            worst, where = v, f"state #{idx}"
    return _report("1", worst, where, tol, n_states=len(states))


def joint_eigenvectors(h1, u, bin_tol=None, rank_tol=RANK_TOL):
    """Common eigenvectors of H1 and U^dagger H1 U as (vector, e, eps) triples.

    Each pair of eigenspaces is intersected through the singular values of
    the product of their orthonormal bases; singular values within rank_tol
    of one span the intersection. Near misses (singular value above 1 - 1e-3)
    are returned separately for information.
    """
    h1m = opalg.arr(h1)
    later = opalg.arr(u).conj().T @ h1m @ opalg.arr(u)
    b1, es1, _ = protocols.spectral_bins(h1m, bin_tol)
    b2, es2, _ = protocols.spectral_bins(later, bin_tol)
    found, near = [], []
    s1 = 0
    for e, _, g1 in b1:
        v1 = es1.vectors[:, s1:s1 + g1]
        s1 += g1
        s2 = 0
        for eps, _, g2 in b2:
            v2 = es2.vectors[:, s2:s2 + g2]
            s2 += g2
            left, sv, _ = np.linalg.svd(v1.conj().T @ v2)
            for k, s in enumerate(sv):
                vec = v1 @ left[:, k]
                if s >= 1 - rank_tol:
                    found.append((vec, e, eps))
                elif s >= 1 - 1e-3:
                    near.append((vec, e, eps, float(s)))
    return found, near


def check_reality(protocol, h1, u, tol=CHECK_TOL, bin_tol=None):
    found, near = joint_eigenvectors(h1, u, bin_tol)
    if not found:
        return _report("2", 0.0, "no joint eigenvectors (vacuous)", tol,
                       n_joint=0, near_misses=len(near))
    atol = _atom_tol(protocols.variation_operator(h1, u))
    worst, where = 0.0, "none"
    for idx, (vec, e, eps) in enumerate(found):
        d = _distribution(protocol, h1, u, opalg.pure(vec))
        target = protocols.OutcomeDistribution(((eps - e, 1.0),))
        v = protocols.distribution_distance(d, target, max(atol, 1e-9))[0]
        if v > worst:
            worst, where = v, f"joint eigenvector #{idx} (e={e!r}, later={eps!r})"
    return _report("2", worst, where, tol, n_joint=len(found), near_misses=len(near))


def check_linearity(protocol, h1, u, state_pairs=None, tol=CHECK_TOL, lambdas=LAMBDAS):
    dim = opalg.arr(h1).shape[0]
    if state_pairs is None:
        st = default_states(dim)
        state_pairs = list(zip(st[:-1], st[1:]))
    atol = _atom_tol(protocols.variation_operator(h1, u))
    worst, where = 0.0, "none"
    for idx, (r1, r2) in enumerate(state_pairs):
        a, b = opalg.arr(r1), opalg.arr(r2)
        d1 = _distribution(protocol, h1, u, opalg.DensityState(a))
        d2 = _distribution(protocol, h1, u, opalg.DensityState(b))
        for lam in lambdas:
            dm = _distribution(protocol, h1, u, opalg.DensityState(lam * a + (1 - lam) * b))
            v = atomwise_gap(dm, mixture(d1, d2, lam), atol)
            if v > worst:
                worst, where = v, f"pair #{idx}, lambda={lam}"
    return _report("3", worst, where, tol, n_pairs=len(state_pairs))


def check_no_signaling(protocol, h1, u, u_primes, tol=CHECK_TOL):
    """Operator-level comparison of the joint POVM with the local POVM times identity."""
    local = protocol(h1, u)
    h1m, um = opalg.arr(h1), opalg.arr(u)
    worst, where = 0.0, "none"
    for idx, up in enumerate(u_primes):
        upm = opalg.arr(up)
        dp = upm.shape[0]
        eye = np.eye(dp)
        joint = protocol(np.kron(h1m, eye), np.kron(um, upm))
        atol = max(_atom_tol(protocols.variation_operator(h1m, um)),
                   _atom_tol(protocols.variation_operator(np.kron(h1m, eye), np.kron(um, upm))))
        lifted = protocols.Povm([(z, np.kron(m, eye)) for z, m in local.atoms], local.kind)
        for z, diff in _aligned_differences(joint, lifted, atol):
            unmatched = not (any(abs(z - zl) <= atol for zl, _ in lifted.atoms)
                             and any(abs(z - zj) <= atol for zj, _ in joint.atoms))
            v = 1.0 if unmatched else float(np.linalg.norm(diff))
            if v > worst:
                worst, where = v, f"U' #{idx} (dim {dp}), atom z={z!r}" + (" unmatched" if unmatched else "")
    return _report("4", worst, where, tol, n_uprimes=len(u_primes))


def check_operator_equality_lemma(h1, h2, u, tol=CHECK_TOL, protocol=protocols.obs_povm):
    require_conserved(h1, h2, u)
    p1 = protocol(h1, u)
    p2 = reflect_povm(protocol(h2, u))
    atol = _atom_tol(protocols.variation_operator(h1, u))
    worst, where = 0.0, "none"
    for z, diff in _aligned_differences(p1, p2, atol):
        v = float(np.linalg.norm(diff))
        if v > worst:
            worst, where = v, f"atom z={z!r}"
    return _report("lemma", worst, where, tol)


def pinning_diagnostic(candidate, h1, u, bin_tol=None, tol=1e-10):
    """Distance of a candidate POVM from the variation-observable measurement.

    Sum over eigenvectors |d_i> of the variation observable of the diagonal
    mismatch |<d_i|M(z)|d_i> - [z == d_i]|, plus the off-diagonal mass
    sum_{i != j} |<d_i|M(z)|d_j>|^2. Zero exactly for the OBS POVM.
    """
    var = protocols.variation_observable(h1, u, bin_tol)
    vecs, vals = var.eig.vectors, var.eig.values
    score = 0.0
    for z, m in candidate.atoms:
        g = vecs.conj().T @ m @ vecs
        hit = (np.abs(vals - z) <= var.bin_tol).astype(float)
        score += float(np.sum(np.abs(np.real(np.diag(g)) - hit)))
        off = np.abs(g) ** 2
        score += float(off.sum() - np.trace(off))
    return _report("pinning", score, f"{len(candidate.atoms)} candidate atoms", tol)


def perturbed_obs(h1, u, eps, seed=0):
    """OBS effects rotated by exp(i eps G) for a seeded random Hermitian G.

    The rotation keeps every effect positive and the set complete, so the
    result is a valid POVM that departs from OBS by O(eps).
    """
    base = protocols.obs_povm(h1, u)
    dim = base.dim
    g = opalg.gue(dim, np.random.default_rng(seed))
    w = opalg.mat_exp_i(g, eps).mat
    atoms = [(z, w.conj().T @ m @ w) for z, m in base.atoms]
    return protocols.Povm(atoms, "custom")


def run_all(protocol, h1, h2, u, u_primes, tol=CHECK_TOL):
    return [check_conservation(protocol, h1, h2, u, tol=tol),
            check_reality(protocol, h1, u, tol=tol),
            check_linearity(protocol, h1, u, tol=tol),
            check_no_signaling(protocol, h1, u, u_primes, tol=tol)]


def random_suite(protocol, n, dims=(2, 3, 4, 5), seed=0, tol=CHECK_TOL):
    """Seeded random conserved instances; returns the per-instance report lists."""
    out = []
    for k in range(n):
        dim = dims[k % len(dims)]
        s = seed + k
        rng = np.random.default_rng(10_000 + s)
        u = opalg.unitary(opalg.haar_unitary(dim, rng), tol=1e-9)
        h1, h2 = opalg.conserved_pair(u, s)
        ups = [opalg.haar_unitary(2, rng), opalg.haar_unitary(3, rng)]
        out.append((dim, s, run_all(protocol, h1, h2, u, ups, tol)))
    return out
