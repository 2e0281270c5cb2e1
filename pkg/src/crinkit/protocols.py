"""Energy-variation measurement protocols.

The variation observable of H1 under U is U^dagger H1 U - H1. The OBS
protocol measures its spectral projectors; the two-point-measurement (TPM)
protocol measures H1 before and after U and reports the difference.
"""

from dataclasses import dataclass

import numpy as np

from . import opalg
from .errors import DimensionError, PovmError
from .formats import matrix_from_doc, matrix_to_doc

POVM_POS_TOL = 1e-9
POVM_SUM_TOL = 1e-8
NEG_PROB_TOL = 1e-12
NORM_DRIFT_TOL = 1e-9


def default_bin_tol(op):
    return 1e-8 * max(1.0, float(np.linalg.norm(opalg.arr(op))))


@dataclass(frozen=True, eq=False)
class VariationObservable:
    op: opalg.HermitianOp
    bins: list  # (value, projector, multiplicity)
    bin_tol: float
    eig: opalg.EigenSystem

    @property
    def values(self):
        return np.array([b[0] for b in self.bins])


@dataclass(frozen=True, eq=False)
class Povm:
    atoms: list  # (z, effect matrix), z strictly increasing
    kind: str = "custom"

    @property
    def values(self):
        return np.array([z for z, _ in self.atoms])

    @property
    def dim(self):
        return self.atoms[0][1].shape[0]


@dataclass(frozen=True)
class OutcomeDistribution:
    atoms: tuple  # ((z, p), ...) with z strictly increasing

    @property
    def values(self):
        return np.array([z for z, _ in self.atoms])

    @property
    def probs(self):
        return np.array([p for _, p in self.atoms])

    def reflected(self):
        return OutcomeDistribution(tuple((-z, p) for z, p in reversed(self.atoms)))


@dataclass(frozen=True, eq=False)
class CharacteristicSamples:
    grid: np.ndarray
    values: np.ndarray


def cluster_sorted(values, tol):
    """Split ascending `values` into runs whose neighbouring gaps are below `tol`."""
    groups, start = [], 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] >= tol:
            groups.append(slice(start, i))
            start = i
    return groups


def spectral_bins(h, bin_tol=None):
    """Eigenvalue bins (mean value, projector, multiplicity) and the eigensystem."""
    h = opalg.hermitian(h)
    tol = default_bin_tol(h) if bin_tol is None else bin_tol
    if tol <= 0:
        raise ValueError("bin_tol must be positive")
    es = opalg.herm_eig(h)
    bins = []
    for sl in cluster_sorted(es.values, tol):
        v = es.vectors[:, sl]
        bins.append((float(np.mean(es.values[sl])), v @ v.conj().T, v.shape[1]))
    return bins, es, tol


def variation_operator(h1, u):
    h1, u = opalg.arr(h1), opalg.arr(u)
    if h1.shape != u.shape:
        raise DimensionError(f"H1 is {h1.shape[0]}-dimensional but U is {u.shape[0]}-dimensional")
    return u.conj().T @ h1 @ u - h1


def variation_observable(h1, u, bin_tol=None):
    op = opalg.hermitian(variation_operator(h1, u), tol=1e-8)
    bins, es, tol = spectral_bins(op, bin_tol)
    return VariationObservable(op, bins, tol, es)


def check_povm(atoms):
    if not atoms:
        raise PovmError("POVM has no atoms")
    dim = atoms[0][1].shape[0]
    total = np.zeros((dim, dim), dtype=complex)
    prev = -np.inf
    for z, m in atoms:
        if not z > prev:
            raise PovmError("POVM atom values must be strictly increasing")
        prev = z
        if np.max(np.abs(m - m.conj().T)) > POVM_POS_TOL:
            raise PovmError(f"effect at z={z!r} is not Hermitian")
        lo = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
        if lo < -POVM_POS_TOL:
            raise PovmError(f"effect at z={z!r} has negative eigenvalue {lo:.3e}")
        total += m
    drift = np.max(np.abs(total - np.eye(dim)))
    if drift > POVM_SUM_TOL:
        raise PovmError(f"effects do not sum to identity (defect {drift:.3e})")


def make_povm(atoms, kind="custom", validate=True):
    atoms = sorted(((float(z), np.asarray(m, dtype=complex)) for z, m in atoms), key=lambda t: t[0])
    if validate:
        check_povm(atoms)
    return Povm(atoms, kind)


def obs_povm(h1, u, bin_tol=None):
    var = variation_observable(h1, u, bin_tol)
    return make_povm([(z, p) for z, p, _ in var.bins], "OBS", validate=False)


def tpm_povm(h1, u, bin_tol=None):
    """Two-point-measurement POVM.

    For a degenerate first measurement the effect contributed by the pair of
    eigenspaces (j after, k before) is P_k U^dagger P_j U P_k, which reduces
    to |<e_j|U|e_k>|^2 |e_k><e_k| for rank-one projectors.
    """
    u = opalg.arr(u)
    if opalg.arr(h1).shape != u.shape:
        raise DimensionError("H1 and U dimensions differ")
    bins, es, tol = spectral_bins(h1, bin_tol)
    bases, start = [], 0
    for _, _, g in bins:
        bases.append(es.vectors[:, start:start + g])
        start += g
    e = np.array([b[0] for b in bins])
    pairs = []
    for k, vk in enumerate(bases):
        uvk = u @ vk
        for j, vj in enumerate(bases):
            w = vj.conj().T @ uvk
            if np.max(np.abs(w)) == 0.0:
                continue
            pairs.append((e[j] - e[k], k, w))
    pairs.sort(key=lambda t: t[0])
    diffs = np.array([d for d, _, _ in pairs])
    dim = u.shape[0]
    atoms = []
    for sl in cluster_sorted(diffs, tol):
        m = np.zeros((dim, dim), dtype=complex)
        for d, k, w in pairs[sl]:
            vk = bases[k]
            m += vk @ (w.conj().T @ w) @ vk.conj().T
        if np.linalg.norm(m) < 1e-14:
            continue
        atoms.append((float(np.mean(diffs[sl])), 0.5 * (m + m.conj().T)))
    return Povm(atoms, "TPM")


def evaluate(povm, rho):
    r = opalg.arr(rho)
    if r.shape[0] != povm.dim:
        raise DimensionError(f"state is {r.shape[0]}-dimensional, POVM acts on {povm.dim}")
    p = np.array([np.real(np.sum(m.T * r)) for _, m in povm.atoms])
    if p.min() < -NEG_PROB_TOL:
        raise PovmError(f"negative probability {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    s = p.sum()
    if abs(s - 1.0) >= NORM_DRIFT_TOL:
        raise PovmError(f"probabilities sum to {s!r}")
    p = p / s
    return OutcomeDistribution(tuple((float(z), float(q)) for (z, _), q in zip(povm.atoms, p)))


def char_fn(povm, rho, grid):
    d = evaluate(povm, rho)
    return distribution_char_fn(d, grid)


def distribution_char_fn(dist, grid):
    grid = np.asarray(grid, dtype=float)
    vals = np.exp(1j * np.outer(grid, dist.values)) @ dist.probs
    return CharacteristicSamples(grid, vals)


def moments(dist):
    z, p = dist.values, dist.probs
    mean = float(np.dot(p, z))
    return mean, float(np.dot(p, (z - mean) ** 2))


def canonicalize(dist, atom_tol):
    """Merge atoms closer than atom_tol (probability-weighted position)."""
    z, p = dist.values, dist.probs
    out = []
    i = 0
    while i < len(z):
        j = i
        while j + 1 < len(z) and z[j + 1] - z[i] <= atom_tol:
            j += 1
        w = p[i:j + 1].sum()
        zc = float(np.dot(p[i:j + 1], z[i:j + 1]) / w) if w > 0 else float(z[i])
        out.append((zc, float(w)))
        i = j + 1
    return OutcomeDistribution(tuple(out))


def distribution_distance(a, b, atom_tol=1e-9):
    """(total variation, 1-Wasserstein) between two atomic distributions.

    Atoms of the union support are grouped greedily: a group starts at the
    smallest unassigned value and absorbs every value within atom_tol of it.
    TV is half the l1 difference of group masses; W1 is the exact integral
    of |F_a - F_b| over the raw atoms.
    """
    if atom_tol <= 0:
        raise ValueError("atom_tol must be positive")
    pts = sorted([(z, p, 0) for z, p in a.atoms] + [(z, p, 1) for z, p in b.atoms])
    tv = 0.0
    i = 0
    while i < len(pts):
        j = i
        mass = [0.0, 0.0]
        while j < len(pts) and pts[j][0] - pts[i][0] <= atom_tol:
            mass[pts[j][2]] += pts[j][1]
            j += 1
        tv += abs(mass[0] - mass[1])
        i = j
    zs = np.array([t[0] for t in pts])
    if len(zs) < 2:
        return 0.5 * tv, 0.0
    signed = np.array([t[1] if t[2] == 0 else -t[1] for t in pts])
    cdf_gap = np.cumsum(signed)[:-1]
    w1 = float(np.sum(np.abs(cdf_gap) * np.diff(zs)))
    return 0.5 * tv, w1


def povm_to_doc(povm):
    return {"kind": povm.kind,
            "atoms": [{"z": float(z), "effect": matrix_to_doc(m)} for z, m in povm.atoms]}


def povm_from_doc(doc):
    return make_povm([(a["z"], matrix_from_doc(a["effect"])) for a in doc["atoms"]],
                     doc.get("kind", "custom"))
