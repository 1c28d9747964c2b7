"""Quantum channels as Kraus sets on a multipartite space.

Channel identity is Choi-matrix equality, so two Kraus sets related by an
isometric re-mixing are the same channel.  The Choi matrix uses the
row-major ``vec`` of :mod:`loccprune.numerics`::

    choi = sum_i vec(K_i) vec(K_i)^dag,   choi[(a, b), (c, d)] = sum_i K_i[a, b] conj(K_i[c, d])
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .numerics import DEFAULT_TOL, Tolerances, as_matrix, fix_phase


class ChannelError(ValueError):
    """Raised for malformed Kraus sets (shape or completeness violations)."""


class SpanError(ValueError):
    """An operator promised to lie in the minimal Kraus span does not."""


def _as_kraus_stack(kraus) -> np.ndarray:
    if isinstance(kraus, np.ndarray) and kraus.ndim == 3:
        arr = kraus.astype(np.complex128, copy=False)
    else:
        mats = [as_matrix(k) for k in kraus]
        if not mats:
            raise ChannelError("a channel needs at least one Kraus operator")
        shapes = {m.shape for m in mats}
        if len(shapes) != 1:
            raise ChannelError(f"Kraus operators have mixed shapes: {sorted(shapes)}")
        arr = np.stack(mats)
    if arr.shape[0] < 1:
        raise ChannelError("a channel needs at least one Kraus operator")
    if arr.shape[1] != arr.shape[2]:
        raise ChannelError(f"Kraus operators must be square, got {arr.shape[1:]}")
    return arr


@dataclass(frozen=True, eq=False)
class Channel:
    """A channel on ``prod(dims)``-dimensional space, ``rho -> sum K rho K^dag``.

    ``kraus`` is stored as an ``(N, D, D)`` array.  Completeness is checked at
    construction against ``tol.tol_eq``; pass ``check=False`` to skip it (the
    shapes are always checked).
    """

    dims: tuple
    kraus: np.ndarray

    def __init__(self, dims: Sequence[int], kraus, tol: Tolerances = DEFAULT_TOL,
                 check: bool = True):
        dims = tuple(int(d) for d in dims)
        if not dims or any(d < 1 for d in dims):
            raise ChannelError(f"invalid party dimensions {dims}")
        stack = _as_kraus_stack(kraus)
        total = int(np.prod(dims, dtype=int))
        if stack.shape[1] != total:
            raise ChannelError(
                f"Kraus operators are {stack.shape[1]}x{stack.shape[1]} but dims {dims} "
                f"give D = {total}"
            )
        stack = stack.copy()
        stack.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "kraus", stack)
        if check:
            res = self.completeness_residual()
            if res > tol.tol_eq:
                raise ChannelError(
                    f"Kraus set is not trace preserving: ||sum K^dag K - I||_F = {res:.3e}"
                )

    @property
    def dim(self) -> int:
        return self.kraus.shape[1]

    @property
    def n_kraus(self) -> int:
        return self.kraus.shape[0]

    def completeness_residual(self) -> float:
        k = self.kraus.reshape(-1, self.dim)
        return float(np.linalg.norm(k.conj().T @ k - np.eye(self.dim)))

    def __repr__(self):
        return f"Channel(dims={list(self.dims)}, n_kraus={self.n_kraus})"


@dataclass(frozen=True, eq=False)
class MinimalRep:
    """A Kraus-rank-sized, Hilbert-Schmidt orthogonal Kraus set.

    ``Tr(K_i^dag K_j) = eigenvalues[i] * delta_ij``.
    """

    channel: Channel
    kappa: int
    choi: np.ndarray
    eigenvalues: np.ndarray

    @property
    def kraus(self) -> np.ndarray:
        return self.channel.kraus

    @property
    def dims(self) -> tuple:
        return self.channel.dims

    @property
    def dim(self) -> int:
        return self.channel.dim

    @classmethod
    def from_kraus(cls, channel: Channel, tol: Tolerances = DEFAULT_TOL) -> "MinimalRep":
        """Wrap a Kraus set that is already HS-orthogonal, keeping its order.

        Used when reading stored trees, whose node labels refer to one
        specific minimal basis.
        """
        k = channel.kraus.reshape(channel.n_kraus, -1)
        gram = k.conj() @ k.T
        lam = np.real(np.diag(gram))
        if np.any(lam <= 0):
            raise ChannelError("minimal Kraus operators must be nonzero")
        off = gram - np.diag(np.diag(gram))
        if np.linalg.norm(off) > tol.tol_eq * max(1.0, float(np.max(lam))):
            raise ChannelError("stored Kraus operators are not Hilbert-Schmidt orthogonal")
        return cls(channel=channel, kappa=channel.n_kraus, choi=choi_matrix(channel),
                   eigenvalues=lam)


def identity_channel(dims: Sequence[int]) -> Channel:
    total = int(np.prod(dims, dtype=int))
    return Channel(dims, [np.eye(total)])


def choi_matrix(c: Channel) -> np.ndarray:
    """``sum_i vec(K_i) vec(K_i)^dag`` with row-major vec; trace equals D."""
    v = c.kraus.reshape(c.n_kraus, -1)
    return v.T @ v.conj()


def _unvec_kraus(vectors: np.ndarray, dim: int) -> np.ndarray:
    return vectors.reshape(-1, dim, dim)


def minimal_rep(c: Channel, tol: Tolerances = DEFAULT_TOL) -> MinimalRep:
    """Minimal Kraus set from the eigendecomposition of the Choi matrix.

    Eigenvalues above ``tol_rank * lambda_max`` are kept in descending order;
    each eigenvector (phase fixed so its largest entry is real positive) is
    un-vectorized and scaled by ``sqrt(lambda)``.
    """
    if c.completeness_residual() > tol.tol_eq:
        raise ChannelError("cannot minimize a channel that violates completeness")
    choi = choi_matrix(c)
    choi = 0.5 * (choi + choi.conj().T)
    w, u = np.linalg.eigh(choi)
    order = np.argsort(w)[::-1]
    w, u = w[order], u[:, order]
    keep = w > tol.tol_rank * w[0]
    lam = w[keep]
    vecs = np.stack([fix_phase(u[:, k]) for k in np.flatnonzero(keep)])
    kraus = _unvec_kraus(vecs * np.sqrt(lam)[:, None], c.dim)
    # completeness is restored only up to the discarded spectrum
    ch = Channel(c.dims, kraus, check=False)
    rep = MinimalRep(channel=ch, kappa=int(lam.size), choi=choi_matrix(ch), eigenvalues=lam)
    if np.linalg.norm(rep.choi - choi) > tol.tol_eq * max(1.0, float(np.linalg.norm(choi))):
        raise ChannelError("minimal representation does not reproduce the channel")
    return rep


def span_residual(rep: MinimalRep, k_prime, coeffs: Optional[np.ndarray] = None) -> float:
    k_prime = as_matrix(k_prime)
    if coeffs is None:
        coeffs = _project(rep, k_prime)
    recon = np.tensordot(coeffs, rep.kraus, axes=(0, 0))
    return float(np.linalg.norm(k_prime - recon))


def _project(rep: MinimalRep, k_prime: np.ndarray) -> np.ndarray:
    flat = rep.kraus.reshape(rep.kappa, -1)
    return (flat.conj() @ k_prime.reshape(-1)) / rep.eigenvalues


def expand_in_minimal(rep: MinimalRep, k_prime, tol: Tolerances = DEFAULT_TOL,
                      require_span: bool = True) -> np.ndarray:
    """Coefficients ``V`` with ``k_prime = sum_i V[i] K_i``.

    ``V[i] = Tr(K_i^dag k_prime) / lambda_i``.  With ``require_span`` the
    reconstruction residual must not exceed ``tol_eq * max(1, ||k_prime||)``.
    """
    k_prime = as_matrix(k_prime)
    if k_prime.shape != (rep.dim, rep.dim):
        raise ValueError(f"operator shape {k_prime.shape} does not match D = {rep.dim}")
    coeffs = _project(rep, k_prime)
    if require_span:
        res = span_residual(rep, k_prime, coeffs)
        if res > tol.tol_eq * max(1.0, float(np.linalg.norm(k_prime))):
            raise SpanError(f"operator lies outside the minimal Kraus span (residual {res:.3e})")
    return coeffs


def channel_distance(a: Channel, b: Channel) -> float:
    """Frobenius distance between Choi matrices."""
    if a.dim != b.dim:
        raise ValueError(f"channels act on different spaces: D = {a.dim} vs {b.dim}")
    return float(np.linalg.norm(choi_matrix(a) - choi_matrix(b)))


def apply(c: Channel, rho) -> np.ndarray:
    rho = as_matrix(rho)
    if rho.shape != (c.dim, c.dim):
        raise ValueError(f"state shape {rho.shape} does not match D = {c.dim}")
    k = c.kraus
    return np.einsum("iab,bc,idc->ad", k, rho, k.conj())


def remix(c: Channel, isometry) -> Channel:
    """Kraus set ``K'_j = sum_i V[j, i] K_i`` for an isometry ``V^dag V = I``."""
    v = np.asarray(isometry, dtype=np.complex128)
    if v.ndim != 2 or v.shape[1] != c.n_kraus:
        raise ValueError(f"isometry shape {v.shape} incompatible with {c.n_kraus} Kraus ops")
    return Channel(c.dims, np.tensordot(v, c.kraus, axes=(1, 0)))


def dephasing_channel(dims: Sequence[int] = (2,)) -> Channel:
    total = int(np.prod(dims, dtype=int))
    projectors = []
    for k in range(total):
        p = np.zeros((total, total), dtype=np.complex128)
        p[k, k] = 1.0
        projectors.append(p)
    return Channel(dims, projectors)


def amplitude_damping_channel(gamma: float) -> Channel:
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - gamma)]])
    k1 = np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]])
    return Channel((2,), [k0, k1])
