"""Dense complex operator algebra for finite-dimensional quantum systems.

Operators are plain numpy arrays wrapped in small frozen records that carry
their construction defects (how far the raw input was from Hermitian or
unitary). Every function accepts either the wrapper or a bare array.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InstanceTooLarge, NumericalFailure

MAX_DIM = 4096
HERM_TOL = 1e-10
UNIT_TOL = 1e-10
EIG_TOL = 1e-9


def arr(a):
    """Return the underlying complex matrix of an operator-like value."""
    if isinstance(a, (HermitianOp, UnitaryOp, DensityState)):
        return a.mat
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"operator must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericalFailure("operator has non-finite entries")
    return m


def _check_dim(n, max_dim=None):
    cap = MAX_DIM if max_dim is None else max_dim
    if n > cap:
        raise InstanceTooLarge(f"dimension {n} exceeds the configured cap {cap}")


@dataclass(frozen=True, eq=False)
class HermitianOp:
    mat: np.ndarray
    herm_defect: float

    @property
    def dim(self):
        return self.mat.shape[0]


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    mat: np.ndarray
    unit_defect: float

    @property
    def dim(self):
        return self.mat.shape[0]


@dataclass(frozen=True, eq=False)
class DensityState:
    mat: np.ndarray

    @property
    def dim(self):
        return self.mat.shape[0]


@dataclass(frozen=True, eq=False)
class EigenSystem:
    values: np.ndarray
    vectors: np.ndarray
    phases: np.ndarray = None  # unitary input only, in [0, 2pi)


def hermitian(a, tol=HERM_TOL):
    """Symmetrize `a` and record the defect max|A - A^dagger|.

    Raises NumericalFailure when the defect exceeds `tol`, so garbage input
    is rejected instead of silently repaired.
    """
    if isinstance(a, HermitianOp):
        return a
    m = arr(a)
    _check_dim(m.shape[0])
    defect = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if defect > tol:
        raise NumericalFailure(f"matrix is not Hermitian (defect {defect:.3e})")
    return HermitianOp(0.5 * (m + m.conj().T), defect)


def unitary(a, tol=UNIT_TOL):
    if isinstance(a, UnitaryOp):
        return a
    m = arr(a)
    _check_dim(m.shape[0])
    defect = float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))
    if defect > tol:
        raise NumericalFailure(f"matrix is not unitary (defect {defect:.3e})")
    return UnitaryOp(m, defect)


def density(a, tol=1e-10):
    if isinstance(a, DensityState):
        return a
    m = arr(a)
    if np.max(np.abs(m - m.conj().T)) > tol:
        raise NumericalFailure("density matrix is not Hermitian")
    m = 0.5 * (m + m.conj().T)
    tr = np.trace(m).real
    if abs(tr - 1.0) > tol:
        raise NumericalFailure(f"density matrix has trace {tr!r}")
    lo = np.linalg.eigvalsh(m)[0]
    if lo < -tol:
        raise NumericalFailure(f"density matrix has negative eigenvalue {lo:.3e}")
    return DensityState(m)


def pure(psi):
    """Density matrix of a (normalized here) state vector."""
    v = np.asarray(psi, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    return DensityState(np.outer(v, v.conj()))


def maximally_mixed(dim):
    return DensityState(np.eye(dim, dtype=complex) / dim)


def commutator(a, b):
    a, b = arr(a), arr(b)
    return a @ b - b @ a


def tensor(a, b, max_dim=None):
    a, b = arr(a), arr(b)
    _check_dim(a.shape[0] * b.shape[0], max_dim)
    return np.kron(a, b)


def partial_trace(a, dims, keep="A"):
    m = arr(a)
    da, db = dims
    if m.shape[0] != da * db:
        raise DimensionError(f"operator dim {m.shape[0]} != {da}*{db}")
    t = m.reshape(da, db, da, db)
    if keep == "A":
        return np.einsum("ijkj->ik", t)
    if keep == "B":
        return np.einsum("ijil->jl", t)
    raise ValueError("keep must be 'A' or 'B'")


def _fix_phases(vecs):
    # make the first entry of largest magnitude real positive, for reproducibility
    out = vecs.copy()
    for c in range(out.shape[1]):
        col = out[:, c]
        k = int(np.argmax(np.abs(col) > np.abs(col).max() * (1 - 1e-9)))
        if abs(col[k]) > 0:
            out[:, c] = col * (abs(col[k]) / col[k])
    return out


def _check_reconstruction(m, values, vecs):
    scale = max(np.linalg.norm(m), 1.0)
    rec = np.linalg.norm(m - (vecs * values) @ vecs.conj().T) / scale
    orth = np.linalg.norm(vecs.conj().T @ vecs - np.eye(vecs.shape[1]))
    if rec > EIG_TOL or orth > EIG_TOL:
        raise NumericalFailure(
            f"eigendecomposition defect: reconstruction {rec:.3e}, orthonormality {orth:.3e}")


def herm_eig(h):
    """Ascending eigenvalues and orthonormal eigenvectors of a Hermitian operator."""
    m = hermitian(h).mat
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"Hermitian eigensolver failed: {exc}") from exc
    v = _fix_phases(v)
    _check_reconstruction(m, w, v)
    return EigenSystem(w, v)


def _clusters(values, tol):
    groups, start = [], 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > tol:
            groups.append(list(range(start, i)))
            start = i
    return groups


def unitary_eig(u, cluster_tol=1e-7):
    """Eigen-decomposition of a unitary through the Hermitian pair (U+U^dagger)/2, (U-U^dagger)/2i.

    The cosine part is diagonalized first; inside each near-degenerate cosine
    cluster the sine part is diagonalized on the cluster subspace, which
    separates conjugate eigenphases. Phases are reported in [0, 2pi) in
    ascending order.
    """
    m = unitary(u).mat
    c = 0.5 * (m + m.conj().T)
    s = (m - m.conj().T) / 2j
    cw, cv = np.linalg.eigh(c)
    cols, cos_vals, sin_vals = [], [], []
    for grp in _clusters(cw, cluster_tol):
        sub = cv[:, grp]
        if len(grp) == 1:
            cols.append(sub)
            cos_vals.append(cw[grp])
            sin_vals.append(np.real(np.einsum("ij,ik,kj->j", sub.conj(), s, sub)))
            continue
        sw, sv = np.linalg.eigh(sub.conj().T @ s @ sub)
        block = sub @ sv
        # re-diagonalize the cosine part inside sine clusters for close phases
        for sg in _clusters(sw, cluster_tol):
            bb = block[:, sg]
            if len(sg) > 1:
                ww, vv = np.linalg.eigh(bb.conj().T @ c @ bb)
                bb = bb @ vv
            cols.append(bb)
            cos_vals.append(np.real(np.einsum("ij,ik,kj->j", bb.conj(), c, bb)))
            sin_vals.append(np.real(np.einsum("ij,ik,kj->j", bb.conj(), s, bb)))
    vecs = np.hstack(cols)
    ph = np.mod(np.arctan2(np.concatenate(sin_vals), np.concatenate(cos_vals)), 2 * np.pi)
    ph[ph > 2 * np.pi - 1e-12] = 0.0
    order = np.argsort(ph, kind="stable")
    ph, vecs = ph[order], _fix_phases(vecs[:, order])
    vals = np.exp(1j * ph)
    _check_reconstruction(m, vals, vecs)
    return EigenSystem(vals, vecs, ph)


def mat_exp_i(h, scale):
    """exp(i * scale * h) through the Hermitian eigendecomposition."""
    es = herm_eig(h)
    v = es.vectors
    return unitary((v * np.exp(1j * scale * es.values)) @ v.conj().T, tol=1e-9)


def haar_unitary(dim, rng):
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def gue(dim, rng):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (a + a.conj().T)


def random_instance(dim, seed, max_dim=None):
    """Seeded (GUE Hermitian, Haar unitary) pair."""
    if dim < 2:
        raise DimensionError("random instances need dim >= 2")
    _check_dim(dim, max_dim)
    rng = np.random.default_rng(seed)
    u = haar_unitary(dim, rng)
    h = gue(dim, rng)
    return hermitian(h), unitary(u, tol=1e-9)


def conserved_pair(u, seed):
    """(H1, H2) with H1 random and H1 + H2 a real polynomial in U+U^dagger and i(U-U^dagger)."""
    m = unitary(u, tol=1e-9).mat
    rng = np.random.default_rng(seed)
    dim = m.shape[0]
    c = m + m.conj().T
    s = 1j * (m - m.conj().T)
    coef = rng.standard_normal(6)
    t = (coef[0] * np.eye(dim) + coef[1] * c + coef[2] * s
         + coef[3] * c @ c + coef[4] * s @ s + coef[5] * 0.5 * (c @ s + s @ c))
    h1 = gue(dim, rng)
    return hermitian(h1), hermitian(t - h1)
