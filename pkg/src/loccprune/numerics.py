"""Dense complex linear algebra with an explicit tolerance policy.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.

Conventions used throughout the package:

* Parties are ordered as given in ``dims``; party 0 is the outermost factor
  of every Kronecker product, so ``kron(A0, A1, ...)`` acts on party 0 first.
* ``vec`` is row-major: ``vec(M)[a * cols + b] == M[a, b]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by every check in the package.

    Attributes
    ----------
    tol_rank : float
        Relative singular-value cutoff: ``sigma_i > tol_rank * sigma_max``
        counts toward the rank.
    tol_psd : float
        Eigenvalue floor for positive semidefiniteness.
    tol_eq : float
        Entrywise / Frobenius equality threshold.  Also used as the
        Hermiticity threshold.
    tol_zero : float
        Rescaling factors at or below this drop a subtree entirely.
    """

    tol_rank: float = 1e-9
    tol_psd: float = 1e-10
    tol_eq: float = 1e-8
    tol_zero: float = 1e-12

    def __post_init__(self):
        for name in ("tol_rank", "tol_psd", "tol_eq", "tol_zero"):
            value = getattr(self, name)
            if not (value > 0):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")

    @property
    def tol_herm(self) -> float:
        return self.tol_eq


DEFAULT_TOL = Tolerances()


def as_matrix(m) -> np.ndarray:
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {arr.shape}")
    return arr


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def is_hermitian(m, tol: Tolerances = DEFAULT_TOL) -> bool:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol.tol_herm)


def numerical_rank(m, tol: Tolerances = DEFAULT_TOL) -> int:
    """Count singular values above ``tol.tol_rank`` times the largest one."""
    m = np.asarray(m, dtype=np.complex128)
    if m.size == 0:
        raise ValueError("numerical_rank needs a nonempty matrix")
    if m.ndim == 1:
        m = m[:, None]
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol.tol_rank * s[0]))


def hermitian_to_real(m: np.ndarray) -> np.ndarray:
    """Isometric real parameterization of a Hermitian matrix.

    Diagonal real parts first, then sqrt(2)-scaled real and imaginary parts
    of the strict upper triangle.  Frobenius inner products are preserved.
    """
    n = m.shape[0]
    iu = np.triu_indices(n, k=1)
    upper = m[iu]
    return np.concatenate(
        [m.diagonal().real, np.sqrt(2.0) * upper.real, np.sqrt(2.0) * upper.imag]
    )


def real_to_hermitian(x: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`hermitian_to_real`."""
    x = np.asarray(x, dtype=float)
    if x.shape != (n * n,):
        raise ValueError(f"expected {n * n} real parameters, got {x.shape}")
    m = np.zeros((n, n), dtype=np.complex128)
    m[np.diag_indices(n)] = x[:n]
    iu = np.triu_indices(n, k=1)
    k = len(iu[0])
    upper = (x[n:n + k] + 1j * x[n + k:]) / np.sqrt(2.0)
    m[iu] = upper
    m[(iu[1], iu[0])] = upper.conj()
    return m


def _stack_columns(mats: Sequence[np.ndarray], tol: Tolerances):
    shapes = {np.shape(m) for m in mats}
    if len(shapes) != 1:
        raise ValueError(f"dimension mismatch among inputs: {sorted(shapes)}")
    mats = [as_matrix(m) for m in mats]
    hermitian = all(is_hermitian(m, tol) for m in mats)
    if hermitian:
        cols = [hermitian_to_real(m) for m in mats]
    else:
        cols = [m.reshape(-1) for m in mats]
    return np.stack(cols, axis=1), hermitian


def _column_scales(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=0)
    return np.where(norms > 0, norms, 1.0)


def kernel_basis(mats: Sequence, tol: Tolerances = DEFAULT_TOL) -> list[np.ndarray]:
    """Basis of linear dependencies among equally shaped matrices.

    Returns coefficient vectors ``a`` (one entry per input) with
    ``sum_s a[s] * mats[s] ~ 0``.  When every input is Hermitian the search
    runs over the real parameterization, so the coefficients are real.

    Columns are normalized before the SVD so a small-weight matrix is not
    mistaken for a dependent one.  Vectors are ordered from the smallest
    singular value upward (most exact dependency first) and scaled to unit
    norm.
    """
    if len(mats) == 0:
        return []
    x, hermitian = _stack_columns(mats, tol)
    scales = _column_scales(x)
    xn = x / scales
    n = xn.shape[1]
    # only V is needed; a full U would be (length x length)
    _, s, vh = np.linalg.svd(xn, full_matrices=xn.shape[0] < n)
    sigma_max = s[0] if s.size else 0.0
    full = np.zeros(n)
    full[: s.size] = s
    if sigma_max == 0.0:
        null_idx = list(range(n))
    else:
        null_idx = [k for k in range(n) if full[k] <= tol.tol_rank * sigma_max]
    null_idx.sort(key=lambda k: full[k])
    out = []
    for k in null_idx:
        b = vh[k].conj()
        a = b / scales
        a = a / np.linalg.norm(a)
        if hermitian:
            a = np.real(a)
        out.append(a)
    return out


def linear_rank(mats: Sequence, tol: Tolerances = DEFAULT_TOL) -> int:
    """Number of linearly independent members (same normalization as kernel_basis)."""
    if len(mats) == 0:
        return 0
    x, _ = _stack_columns(mats, tol)
    if not np.any(x):
        return 0
    return numerical_rank(x / _column_scales(x), tol)


def is_psd(m, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Hermitian within ``tol_herm`` and no eigenvalue below ``-tol_psd``."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"is_psd needs a square matrix, got {m.shape}")
    if not is_hermitian(m, tol):
        return False
    h = 0.5 * (m + m.conj().T)
    return bool(np.linalg.eigvalsh(h)[0] >= -tol.tol_psd)


def min_eigenvalue(m) -> float:
    m = as_matrix(m)
    return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])


def kron(*mats) -> np.ndarray:
    """Kronecker product with the first argument outermost."""
    if not mats:
        return np.ones((1, 1), dtype=np.complex128)
    return reduce(np.kron, [as_matrix(m) for m in mats])


def embed_local(op, party: int, dims: Sequence[int]) -> np.ndarray:
    """``I ⊗ ... ⊗ op ⊗ ... ⊗ I`` with ``op`` acting on ``party``."""
    dims = list(dims)
    before = int(np.prod(dims[:party], dtype=int))
    after = int(np.prod(dims[party + 1:], dtype=int))
    return kron(np.eye(before), op, np.eye(after))


def _check_dims(e: np.ndarray, party: int, dims: Sequence[int]) -> int:
    total = int(np.prod(dims, dtype=int))
    if e.shape != (total, total):
        raise ValueError(f"matrix shape {e.shape} inconsistent with dims {list(dims)}")
    if not 0 <= party < len(dims):
        raise ValueError(f"party {party} out of range for {len(dims)} parties")
    return total


def _cut_permutation(party: int, n: int) -> list[int]:
    # tensor axes: (row_0..row_{n-1}, col_0..col_{n-1})
    others = [p for p in range(n) if p != party]
    return [party, n + party] + others + [n + p for p in others]


def reshape_across_cut(e, party: int, dims: Sequence[int]) -> np.ndarray:
    """Realign ``e`` as a ``d_party**2 x (D/d_party)**2`` matrix.

    Row index is ``(i_party, j_party)``; column index is the row-major pair
    of the remaining parties' row and column multi-indices, remaining
    parties kept in their original order.
    """
    e = as_matrix(e)
    dims = [int(d) for d in dims]
    total = _check_dims(e, party, dims)
    n = len(dims)
    d = dims[party]
    rest = total // d
    t = e.reshape(dims + dims).transpose(_cut_permutation(party, n))
    return t.reshape(d * d, rest * rest)


def embed_across_cut(local, rest, party: int, dims: Sequence[int]) -> np.ndarray:
    """Inverse of the cut factorization: the operator ``local ⊗ rest`` with
    ``local`` placed on ``party`` and ``rest`` on the others, in order."""
    local = as_matrix(local)
    rest = as_matrix(rest)
    dims = [int(d) for d in dims]
    n = len(dims)
    others = [dims[p] for p in range(n) if p != party]
    t = np.multiply.outer(local, rest).reshape([dims[party]] * 2 + others + others)
    perm = _cut_permutation(party, n)
    inv = np.argsort(perm)
    total = int(np.prod(dims, dtype=int))
    return t.transpose(inv).reshape(total, total)


def factor_across_cut(
    e, party: int, dims: Sequence[int], tol: Tolerances = DEFAULT_TOL
) -> Optional[tuple[np.ndarray, np.ndarray]]:
    """Split ``e`` as ``local ⊗ rest`` across the cut party-vs-others.

    Returns ``None`` when the operator Schmidt rank across the cut exceeds
    one.  ``rest`` is normalized to unit trace and ``local`` carries the
    scale.  If ``rest`` is (numerically) traceless it is instead normalized
    to unit Frobenius norm with its largest entry real positive.  The zero
    matrix factors as ``(0, I / dim)``.
    """
    r = reshape_across_cut(e, party, dims)
    d = int(dims[party])
    rest_dim = r.shape[1]
    rest_side = int(round(np.sqrt(rest_dim)))
    rank = numerical_rank(r, tol)
    if rank == 0:
        return (
            np.zeros((d, d), dtype=np.complex128),
            np.eye(rest_side, dtype=np.complex128) / rest_side,
        )
    if rank > 1:
        return None
    u, s, vh = np.linalg.svd(r, full_matrices=False)
    local = (s[0] * u[:, 0]).reshape(d, d)
    rest = vh[0].reshape(rest_side, rest_side)
    tr = np.trace(rest)
    if abs(tr) > tol.tol_eq * np.linalg.norm(rest):
        local = local * tr
        rest = rest / tr
    else:
        flat = rest.reshape(-1)
        k = int(np.argmax(np.abs(flat)))
        phase = flat[k] / abs(flat[k])
        rest = rest / phase
        local = local * phase
    return local, rest


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so its largest-magnitude entry is real and positive."""
    v = np.asarray(v, dtype=np.complex128)
    k = int(np.argmax(np.abs(v)))
    if v[k] == 0:
        return v
    out = v * (abs(v[k]) / v[k])
    out[k] = abs(v[k])
    return out


def operator_sum(coeffs: np.ndarray, kraus: np.ndarray) -> np.ndarray:
    """``sum_{i,j} coeffs[i, j] * K_i^dag K_j`` for a stack of Kraus operators."""
    kappa, dim, _ = kraus.shape
    w = np.tensordot(coeffs, kraus, axes=(1, 0)).reshape(kappa * dim, dim)
    return kraus.reshape(kappa * dim, dim).conj().T @ w
