"""Dense complex operator algebra on small Hilbert spaces.

Operators are plain complex128 numpy arrays of shape (n, n). Ordered
orthonormal bases get a thin immutable wrapper because vector order is
significant for the basis metric. Everything downstream shares one
tolerance ladder: structural identities at 1e-12, derived algebra at
1e-10, spectral and other iterative results at 1e-9 and 1e-8.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ValidationError

STRUCT_TOL = 1e-12
ALGEBRA_TOL = 1e-10
SPECTRAL_TOL = 1e-9
EIGEN_MERGE_TOL = 1e-8

__all__ = [
    "STRUCT_TOL",
    "ALGEBRA_TOL",
    "SPECTRAL_TOL",
    "EIGEN_MERGE_TOL",
    "as_operator",
    "require_same_dim",
    "dagger",
    "operator_norm",
    "spectral_norms",
    "commutator",
    "pairwise_commutator_norms",
    "is_hermitian",
    "check_projection",
    "check_density",
    "spectral_resolution",
    "validate_resolution",
    "OrthonormalBasis",
    "basis_distance",
    "atom_projections",
    "nontrivial_masks",
    "subset_projection",
    "subset_projections",
    "HermitianObservable",
    "operator_to_json",
    "operator_from_json",
    "basis_to_json",
    "basis_from_json",
]


def as_operator(value) -> np.ndarray:
    """Coerce ``value`` to a square complex matrix, rejecting malformed shapes."""
    mat = np.asarray(value, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
        raise DimensionMismatchError(f"expected a square matrix, got shape {mat.shape}")
    return mat


def require_same_dim(*ops) -> int:
    dims = {op.shape[0] for op in ops}
    if len(dims) != 1:
        raise DimensionMismatchError(f"dimension mismatch: {sorted(dims)}")
    return dims.pop()


def dagger(op: np.ndarray) -> np.ndarray:
    return op.conj().T


def operator_norm(op) -> float:
    """Largest singular value; for Hermitian input this is max |eigenvalue|."""
    return float(np.linalg.norm(as_operator(op), 2))


def spectral_norms(stack: np.ndarray) -> np.ndarray:
    """Largest singular value of every matrix in a (..., n, n) stack."""
    return np.linalg.svd(stack, compute_uv=False)[..., 0]


def commutator(a, b) -> np.ndarray:
    a = as_operator(a)
    b = as_operator(b)
    require_same_dim(a, b)
    return a @ b - b @ a


def pairwise_commutator_norms(stack_a: np.ndarray, stack_b: np.ndarray) -> np.ndarray:
    """Spectral norm of [A, B] for every A in ``stack_a``, B in ``stack_b``.

    Returns an array of shape (len(stack_a), len(stack_b)).
    """
    ab = np.einsum("aij,bjk->abik", stack_a, stack_b)
    ba = np.einsum("bij,ajk->abik", stack_b, stack_a)
    return spectral_norms(ab - ba)


def is_hermitian(op, tol: float = STRUCT_TOL) -> bool:
    mat = as_operator(op)
    return bool(np.max(np.abs(mat - dagger(mat))) <= tol)


def check_projection(op, idem_tol: float = ALGEBRA_TOL, herm_tol: float = STRUCT_TOL) -> int:
    """Validate Hermiticity and idempotence of a projection, returning its rank."""
    mat = as_operator(op)
    if not is_hermitian(mat, herm_tol):
        raise ValidationError("projection is not Hermitian")
    if operator_norm(mat @ mat - mat) > idem_tol:
        raise ValidationError("projection is not idempotent")
    eigs = np.linalg.eigvalsh((mat + dagger(mat)) / 2)
    return int(np.sum(np.abs(eigs - 1.0) <= EIGEN_MERGE_TOL))


def check_density(op) -> np.ndarray:
    """Validate a density operator: Hermitian, positive, unit trace."""
    mat = as_operator(op)
    if not is_hermitian(mat):
        raise ValidationError("density operator is not Hermitian")
    eigs = np.linalg.eigvalsh((mat + dagger(mat)) / 2)
    if eigs.min() < -ALGEBRA_TOL:
        raise ValidationError(f"density operator has negative eigenvalue {eigs.min():.3e}")
    trace = float(np.trace(mat).real)
    if abs(trace - 1.0) > ALGEBRA_TOL:
        raise ValidationError(f"density operator trace is {trace!r}, expected 1")
    return mat


def spectral_resolution(op, merge_tol: float = EIGEN_MERGE_TOL) -> list[tuple[float, np.ndarray]]:
    """Eigenvalues and spectral projections of a Hermitian operator.

    Eigenvalues closer than ``merge_tol`` are merged into one projection.
    Returns (eigenvalue, projection) pairs in ascending eigenvalue order;
    the projections are mutually orthogonal and sum to the identity.
    """
    mat = as_operator(op)
    if not is_hermitian(mat):
        raise ValidationError("spectral resolution requires a Hermitian operator")
    w, v = np.linalg.eigh((mat + dagger(mat)) / 2)
    pairs: list[tuple[float, np.ndarray]] = []
    start = 0
    for stop in range(1, len(w) + 1):
        if stop == len(w) or w[stop] - w[start] > merge_tol:
            cols = v[:, start:stop]
            proj = cols @ dagger(cols)
            pairs.append((float(np.mean(w[start:stop])), proj))
            start = stop
    return pairs


def validate_resolution(ops, psd_tol: float = ALGEBRA_TOL, sum_tol: float = SPECTRAL_TOL) -> bool:
    """True when ``ops`` are positive operators summing to the identity.

    Positivity means Hermitian with min eigenvalue >= -psd_tol; the sum
    must satisfy |sum - I| <= sum_tol in spectral norm. Malformed shapes
    raise; everything else reports False rather than erroring.
    """
    mats = [as_operator(o) for o in ops]
    if not mats:
        return False
    n = require_same_dim(*mats)
    for mat in mats:
        if not is_hermitian(mat, tol=1e-10):
            return False
        if np.linalg.eigvalsh((mat + dagger(mat)) / 2).min() < -psd_tol:
            return False
    gap = sum(mats) - np.eye(n)
    return operator_norm(gap) <= sum_tol


@dataclass(frozen=True)
class OrthonormalBasis:
    """Ordered orthonormal basis; column i of ``mat`` is the i-th vector."""

    mat: np.ndarray

    def __post_init__(self):
        mat = as_operator(self.mat)
        gram = dagger(mat) @ mat
        if np.max(np.abs(gram - np.eye(mat.shape[0]))) > ALGEBRA_TOL:
            raise ValidationError("columns are not orthonormal within 1e-10")
        mat = np.ascontiguousarray(mat)
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def vector(self, i: int) -> np.ndarray:
        return self.mat[:, i]

    def permuted(self, order) -> "OrthonormalBasis":
        """Same vectors listed in a different order."""
        return OrthonormalBasis(self.mat[:, list(order)])


def basis_distance(first: OrthonormalBasis, second: OrthonormalBasis) -> float:
    """|I - U| for the unitary U carrying each vector of ``first`` to ``second``.

    Order matters: permuting one basis changes U and hence the distance.
    """
    require_same_dim(first.mat, second.mat)
    u = second.mat @ dagger(first.mat)
    return operator_norm(np.eye(first.dim) - u)


def atom_projections(basis: OrthonormalBasis) -> np.ndarray:
    """Rank-1 projections onto the basis vectors, stacked as (n, n, n)."""
    v = basis.mat
    return np.einsum("ai,bi->iab", v, v.conj())


def nontrivial_masks(n: int) -> list[int]:
    """Bitmasks of the nonempty proper subsets of an n-element basis."""
    return [m for m in range(1, (1 << n) - 1)]


def subset_projection(basis: OrthonormalBasis, mask: int) -> np.ndarray:
    """Projection onto the span of the basis vectors selected by ``mask``."""
    n = basis.dim
    if not 0 <= mask < (1 << n):
        raise ValidationError(f"mask {mask} out of range for dimension {n}")
    atoms = atom_projections(basis)
    out = np.zeros((n, n), dtype=complex)
    for i in range(n):
        if (mask >> i) & 1:
            out += atoms[i]
    return out


def subset_projections(basis: OrthonormalBasis, masks) -> np.ndarray:
    """Stack of subset projections for the given bitmasks, shape (len(masks), n, n)."""
    n = basis.dim
    atoms = atom_projections(basis)
    sel = np.array([[(m >> i) & 1 for i in range(n)] for m in masks], dtype=float)
    return np.tensordot(sel, atoms, axes=1)


@dataclass(frozen=True)
class HermitianObservable:
    """A Hermitian operator together with its merged spectral resolution."""

    op: np.ndarray
    eigenvalues: tuple[float, ...]
    projections: tuple[np.ndarray, ...]

    @classmethod
    def from_operator(cls, op, merge_tol: float = EIGEN_MERGE_TOL) -> "HermitianObservable":
        mat = as_operator(op)
        pairs = spectral_resolution(mat, merge_tol=merge_tol)
        values = tuple(val for val, _ in pairs)
        projs = tuple(proj for _, proj in pairs)
        recon = sum(val * proj for val, proj in pairs)
        if operator_norm(recon - mat) > SPECTRAL_TOL:
            raise ValidationError("spectral resolution does not reconstruct the operator")
        total = sum(projs)
        if operator_norm(total - np.eye(mat.shape[0])) > ALGEBRA_TOL:
            raise ValidationError("spectral projections do not sum to the identity")
        for proj in projs:
            proj.setflags(write=False)
        return cls(op=mat, eigenvalues=values, projections=projs)

    @property
    def dim(self) -> int:
        return self.op.shape[0]

    def is_nondegenerate(self) -> bool:
        return len(self.eigenvalues) == self.dim


def operator_to_json(op) -> dict:
    """Canonical serialization: row-major real and imaginary parts."""
    mat = as_operator(op)
    return {
        "dim": mat.shape[0],
        "re": [float(x) for x in mat.real.ravel()],
        "im": [float(x) for x in mat.imag.ravel()],
    }


def operator_from_json(obj) -> np.ndarray:
    try:
        n = int(obj["dim"])
        re = obj["re"]
        im = obj["im"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed operator object: {exc}") from exc
    if n < 1 or len(re) != n * n or len(im) != n * n:
        raise ValidationError("operator entry lists do not match dim*dim")
    mat = np.array(re, dtype=float).reshape(n, n) + 1j * np.array(im, dtype=float).reshape(n, n)
    return mat


def basis_to_json(basis: OrthonormalBasis) -> dict:
    """Serialize an ordered basis as a list of vectors, order preserved."""
    vectors = []
    for i in range(basis.dim):
        v = basis.vector(i)
        vectors.append({"re": [float(x) for x in v.real], "im": [float(x) for x in v.imag]})
    return {"dim": basis.dim, "vectors": vectors}


def basis_from_json(obj) -> OrthonormalBasis:
    try:
        n = int(obj["dim"])
        vectors = obj["vectors"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed basis object: {exc}") from exc
    if len(vectors) != n:
        raise ValidationError(f"expected {n} vectors, got {len(vectors)}")
    cols = []
    for entry in vectors:
        re = entry.get("re")
        im = entry.get("im")
        if re is None or im is None or len(re) != n or len(im) != n:
            raise ValidationError("malformed basis vector entry")
        cols.append(np.array(re, dtype=float) + 1j * np.array(im, dtype=float))
    return OrthonormalBasis(np.column_stack(cols))
