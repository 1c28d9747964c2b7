"""Channel invariants and outcome-count bounds.

``chi`` is the dimension of ``span{K_i^dag K_j}``.  For a channel of Kraus
rank ``kappa`` on parties of dimensions ``d_alpha``:

* any measurement needs at most ``kappa**2`` outcomes,
* a measurement by party ``alpha`` needs at most ``d_alpha**2 + kappa**2 - chi``,
* the channel is extreme iff ``chi == kappa**2``, and then ``d_alpha**2`` suffices,
* with ``N_p`` product Kraus operators needed, rounds ``r >= log N_p / log kappa**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channels import MinimalRep
from .numerics import DEFAULT_TOL, Tolerances, linear_rank, numerical_rank, operator_sum


class BoundViolation(RuntimeError):
    """A proven bound failed numerically; signals a tolerance breakdown."""


def _products(kraus: np.ndarray) -> np.ndarray:
    """``(kappa**2, D**2)`` array; row ``i * kappa + j`` is ``vec(K_i^dag K_j)``."""
    kappa, dim, _ = kraus.shape
    return np.einsum("iab,jac->ijbc", kraus.conj(), kraus).reshape(kappa * kappa, dim * dim)


def chi(rep: MinimalRep, tol: Tolerances = DEFAULT_TOL) -> int:
    # unit-norm Kraus operators span the same product space and keep the
    # relative rank cutoff away from the eigenvalue spread
    unit = rep.kraus / np.sqrt(rep.eigenvalues)[:, None, None]
    return numerical_rank(_products(unit), tol)


def rounds_lower_bound(n_p: int, kappa: int) -> tuple[float, int]:
    """``log(n_p) / log(kappa**2)`` and the least integer ``r`` with ``kappa**(2r) >= n_p``.

    For ``kappa == 1`` both are 0: a single Kraus operator needs no branching.
    """
    if kappa == 1:
        return 0.0, 0
    value = math.log(n_p) / math.log(kappa * kappa)
    r = 0
    while kappa ** (2 * r) < n_p:
        r += 1
    return value, r


@dataclass
class BoundsReport:
    kappa: int
    chi: int
    D: int
    dims: list
    thm2_bound: int
    thm3_bounds: list
    effective_bounds: list
    is_extreme: bool
    n_p: Optional[int] = None
    round_lower_bound: Optional[float] = None
    round_lower_bound_int: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "chi": self.chi,
            "D": self.D,
            "dims": list(self.dims),
            "thm2_bound": self.thm2_bound,
            "thm3_bounds": list(self.thm3_bounds),
            "effective_bounds": list(self.effective_bounds),
            "is_extreme": self.is_extreme,
            "n_p": self.n_p,
            "round_lower_bound": self.round_lower_bound,
            "round_lower_bound_int": self.round_lower_bound_int,
        }


def bounds(rep: MinimalRep, n_p: Optional[int] = None,
           tol: Tolerances = DEFAULT_TOL) -> BoundsReport:
    kappa = rep.kappa
    x = chi(rep, tol)
    dim = rep.dim
    if not 1 <= x <= min(kappa * kappa, dim * dim):
        raise BoundViolation(f"chi = {x} outside [1, min(kappa^2, D^2)]")
    thm2 = kappa * kappa
    thm3 = [d * d + thm2 - x for d in rep.dims]
    report = BoundsReport(
        kappa=kappa,
        chi=x,
        D=dim,
        dims=list(rep.dims),
        thm2_bound=thm2,
        thm3_bounds=thm3,
        effective_bounds=[min(thm2, b) for b in thm3],
        is_extreme=(x == thm2),
    )
    if n_p is not None:
        if n_p < kappa:
            raise ValueError(f"N_p = {n_p} is smaller than the Kraus rank {kappa}")
        report.n_p = int(n_p)
        report.round_lower_bound, report.round_lower_bound_int = rounds_lower_bound(n_p, kappa)
    return report


@dataclass
class QBasis:
    """Orthonormal basis of kappa x kappa matrices split at ``chi``.

    ``matrices[t]`` for ``t >= chi`` satisfy ``sum Q_ij K_i^dag K_j = 0``;
    ``operators[t]`` is ``sum Q_ij K_i^dag K_j`` for ``t < chi``.
    """

    matrices: np.ndarray
    chi: int
    operators: np.ndarray = field(repr=False)


def q_basis(rep: MinimalRep, tol: Tolerances = DEFAULT_TOL) -> QBasis:
    """Build the dependency-adapted basis.

    The kernel of ``vec(C) -> vec(sum C_ij K_i^dag K_j)`` gives the trailing
    members; its orthogonal complement, the leading ``chi``.
    """
    kappa = rep.kappa
    x = chi(rep, tol)
    phi = _products(rep.kraus).T  # (D^2, kappa^2), column (i, j)
    _, _, vh = np.linalg.svd(phi, full_matrices=True)
    basis = vh.conj()  # rows: complement first, kernel last
    mats = basis.reshape(kappa * kappa, kappa, kappa)
    ops = (phi @ basis[:x].T).T.reshape(x, rep.dim, rep.dim)
    return QBasis(matrices=mats, chi=x, operators=ops)


@dataclass
class MeasurementAnalysis:
    q_basis: np.ndarray
    m_matrix: np.ndarray
    independent_count: int
    bound: int
    chi: int
    reconstruction_residual: float


def analyze_measurement(rep: MinimalRep, sibling_cs: Sequence, party: int,
                        tol: Tolerances = DEFAULT_TOL,
                        basis: Optional[QBasis] = None) -> MeasurementAnalysis:
    """Decompose one measurement's outcome labels in the adapted basis.

    ``m_matrix[s, t] = Tr(Q_t^dag C_s)``.  The outcome operators are rebuilt
    from the first ``chi`` columns only.  Raises :class:`BoundViolation` if
    more than ``d**2 + kappa**2 - chi`` labels are independent.

    Pass a precomputed ``basis`` when analyzing many measurements of one
    channel; the basis has ``kappa**4`` entries.
    """
    qb = basis if basis is not None else q_basis(rep, tol)
    cs = np.array([np.asarray(c, dtype=np.complex128) for c in sibling_cs])
    n_out = cs.shape[0]
    q_flat = qb.matrices.reshape(len(qb.matrices), -1)
    m = cs.reshape(n_out, -1) @ q_flat.conj().T
    recon = np.tensordot(m[:, : qb.chi], qb.operators, axes=(1, 0))
    direct = np.array([operator_sum(c, rep.kraus) for c in cs])
    residual = float(np.max(np.linalg.norm(recon - direct, axis=(1, 2))))
    count = linear_rank(list(cs), tol)
    bound = rep.dims[party] ** 2 + rep.kappa ** 2 - qb.chi
    if count > bound:
        raise BoundViolation(
            f"{count} independent outcome labels exceed d^2 + kappa^2 - chi = {bound}"
        )
    return MeasurementAnalysis(
        q_basis=qb.matrices,
        m_matrix=m,
        independent_count=count,
        bound=bound,
        chi=qb.chi,
        reconstruction_residual=residual,
    )
