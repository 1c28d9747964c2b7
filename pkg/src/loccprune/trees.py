"""LOCC protocol trees labeled by kappa x kappa PSD matrices.

Every node ``n`` carries a matrix ``C`` such that the accumulated operator of
the protocol at that node is ``E_n = sum_{i,j} C[i, j] K_i^dag K_j`` over the
minimal Kraus set.  A node with children stores the party whose local
measurement produces them.

Leaf vectors follow ``C = v v^dag`` and the implemented Kraus operator of a
leaf is ``sum_j conj(v[j]) K_j``, which makes ``K''^dag K'' = E_leaf`` exact.
"""

from __future__ import annotations

import copy
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .channels import Channel, MinimalRep
from .numerics import (
    DEFAULT_TOL,
    Tolerances,
    as_matrix,
    factor_across_cut,
    fix_phase,
    min_eigenvalue,
    numerical_rank,
    operator_sum,
    reshape_across_cut,
)

ITEMS = ("1", "2", "3", "4", "5a", "6")


class TreeStructureError(ValueError):
    """Structural defects that make a tree unreadable (not semantic failures)."""


class InvalidTreeError(ValueError):
    """A tree fails a condition an operation requires."""


@dataclass(eq=False)
class TreeNode:
    id: str
    c_matrix: np.ndarray
    acting_party: Optional[int] = None
    children: list = field(default_factory=list)

    def __post_init__(self):
        self.c_matrix = as_matrix(self.c_matrix)
        if self.c_matrix.shape[0] != self.c_matrix.shape[1]:
            raise TreeStructureError(f"node {self.id}: C matrix must be square")
        if bool(self.children) != (self.acting_party is not None):
            raise TreeStructureError(
                f"node {self.id}: acting_party must be set exactly when the node has children"
            )

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def iter_preorder(self) -> Iterator["TreeNode"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def scaled(self, factor: float) -> "TreeNode":
        """Deep copy with every label in the subtree multiplied by ``factor``."""
        return TreeNode(
            id=self.id,
            c_matrix=self.c_matrix * factor,
            acting_party=self.acting_party,
            children=[c.scaled(factor) for c in self.children],
        )


@dataclass(eq=False)
class LoccTree:
    rep: MinimalRep
    root: TreeNode

    def __post_init__(self):
        ids = set()
        n_parties = len(self.rep.dims)
        for node in self.root.iter_preorder():
            if node.c_matrix.shape != (self.rep.kappa, self.rep.kappa):
                raise TreeStructureError(
                    f"node {node.id}: C is {node.c_matrix.shape[0]}x{node.c_matrix.shape[1]} "
                    f"but kappa = {self.rep.kappa}"
                )
            if node.id in ids:
                raise TreeStructureError(f"duplicate node id {node.id!r}")
            ids.add(node.id)
            if node.acting_party is not None and not 0 <= node.acting_party < n_parties:
                raise TreeStructureError(
                    f"node {node.id}: acting party {node.acting_party} out of range"
                )

    @property
    def kappa(self) -> int:
        return self.rep.kappa

    @property
    def dims(self) -> tuple:
        return self.rep.dims

    def nodes(self) -> Iterator[TreeNode]:
        return self.root.iter_preorder()

    def leaves(self) -> list[TreeNode]:
        return [n for n in self.nodes() if n.is_leaf]

    def internal_nodes(self) -> list[TreeNode]:
        return [n for n in self.nodes() if not n.is_leaf]

    def find(self, node_id: str) -> TreeNode:
        for n in self.nodes():
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def copy(self) -> "LoccTree":
        return LoccTree(rep=self.rep, root=copy.deepcopy(self.root))


def node_operator(tree: LoccTree, node: TreeNode) -> np.ndarray:
    """``E_n = sum_{i,j} C[i, j] K_i^dag K_j``."""
    if node.c_matrix.shape != (tree.kappa, tree.kappa):
        raise TreeStructureError(
            f"node {node.id}: C size {node.c_matrix.shape[0]} does not match kappa = {tree.kappa}"
        )
    return operator_sum(node.c_matrix, tree.rep.kraus)


@dataclass
class ItemResult:
    passed: bool = True
    max_residual: float = 0.0
    offenders: list = field(default_factory=list)

    def flag(self, node_id: str, residual: float):
        self.passed = False
        self.offenders.append((node_id, float(residual)))

    def note(self, residual: float):
        self.max_residual = max(self.max_residual, float(residual))


@dataclass
class ValidationReport:
    """Pass/fail per tree condition, with offending node ids and residuals.

    Keys of ``items``: ``"1"`` PSD labels and product operators, ``"2"`` root
    equals the identity, ``"3"`` children sum to their parent, ``"4"`` one
    party acts per measurement with a shared rest-factor, ``"5a"`` rank-one
    leaves, ``"6"`` leaves sum to the root.
    """

    items: dict

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.items.values())

    def failed_items(self) -> list[str]:
        return [k for k in ITEMS if not self.items[k].passed]

    def passes(self, *keys: str) -> bool:
        return all(self.items[k].passed for k in keys)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "items": {
                k: {
                    "passed": r.passed,
                    "max_residual": r.max_residual,
                    "offenders": [[nid, res] for nid, res in r.offenders],
                }
                for k, r in self.items.items()
            },
        }


def _direction_mismatch(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(1.0 - abs(np.vdot(a, b)) / (na * nb))


def validate(tree: LoccTree, tol: Tolerances = DEFAULT_TOL) -> ValidationReport:
    """Check every tree condition and report instead of raising.

    The local-sum part of the single-party check (``sum A_s = A_n``) follows
    from the children-sum condition, so it is only flagged at nodes where the
    children-sum condition itself holds; there it catches numerical
    inconsistencies between labels and operators.
    """
    res = {k: ItemResult() for k in ITEMS}
    dims = tree.dims
    kappa = tree.kappa
    n_parties = len(dims)

    factors = {}
    for node in tree.nodes():
        if node.c_matrix.shape != (kappa, kappa):
            raise TreeStructureError(f"node {node.id}: C does not match kappa = {kappa}")
        e = node_operator(tree, node)
        c = node.c_matrix
        herm = float(np.max(np.abs(c - c.conj().T)))
        neg = max(0.0, -min_eigenvalue(c))
        res["1"].note(max(herm, neg))
        if herm > tol.tol_herm or neg > tol.tol_psd:
            res["1"].flag(node.id, max(herm, neg))
        cut_f = []
        for p in range(n_parties):
            f = factor_across_cut(e, p, dims, tol)
            cut_f.append(f)
            if f is None:
                sv = np.linalg.svd(reshape_across_cut(e, p, dims), compute_uv=False)
                res["1"].flag(node.id, float(sv[1] / sv[0]))
        factors[node.id] = cut_f

    root_res = float(np.linalg.norm(tree.root.c_matrix - np.eye(kappa)))
    res["2"].note(root_res)
    if root_res > tol.tol_eq:
        res["2"].flag(tree.root.id, root_res)

    for node in tree.nodes():
        if node.is_leaf:
            r = numerical_rank(node.c_matrix, tol)
            if r != 1:
                res["5a"].flag(node.id, float(r))
            continue
        total = sum(ch.c_matrix for ch in node.children)
        sum_res = float(np.linalg.norm(total - node.c_matrix))
        res["3"].note(sum_res)
        sum_ok = sum_res <= tol.tol_eq
        if not sum_ok:
            res["3"].flag(node.id, sum_res)

        alpha = node.acting_party
        parent_f = factors[node.id][alpha]
        child_f = [factors[ch.id][alpha] for ch in node.children]
        if parent_f is None or any(f is None for f in child_f):
            res["4"].flag(node.id, float("inf"))
            continue
        a_n, rest_n = parent_f
        # every nonzero child must share the parent's rest-factor (or, for a
        # zero parent, the first nonzero sibling's)
        ref = rest_n if np.linalg.norm(a_n) > 0 else None
        worst = 0.0
        for a_s, rest_s in child_f:
            if np.linalg.norm(a_s) == 0:
                continue
            if ref is None:
                ref = rest_s
            worst = max(worst, _direction_mismatch(rest_s, ref))
        res["4"].note(worst)
        if worst > tol.tol_eq:
            res["4"].flag(node.id, worst)
            continue
        if sum_ok and np.linalg.norm(a_n) > 0:
            local_res = float(np.linalg.norm(sum(a for a, _ in child_f) - a_n))
            res["4"].note(local_res)
            if local_res > tol.tol_eq * max(1.0, float(np.linalg.norm(a_n))):
                res["4"].flag(node.id, local_res)

    leaf_sum = sum(leaf.c_matrix for leaf in tree.leaves())
    six = float(np.linalg.norm(leaf_sum - tree.root.c_matrix))
    res["6"].note(six)
    if six > tol.tol_eq:
        res["6"].flag(tree.root.id, six)
    return ValidationReport(items=res)


def leaf_vector(c: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """``v`` with ``c = v v^dag`` from the dominant eigenpair, largest entry real positive."""
    c = as_matrix(c)
    w, u = np.linalg.eigh(0.5 * (c + c.conj().T))
    # singular values of a Hermitian matrix are |eigenvalues|
    mags = np.abs(w)
    if mags.max() == 0 or np.sum(mags > tol.tol_rank * mags.max()) != 1 or w[-1] < mags.max():
        raise InvalidTreeError("leaf label does not have rank one")
    return fix_phase(u[:, -1]) * np.sqrt(max(w[-1], 0.0))


def leaf_vectors(tree: LoccTree, tol: Tolerances = DEFAULT_TOL) -> list[tuple[str, np.ndarray]]:
    out = []
    for leaf in tree.leaves():
        try:
            out.append((leaf.id, leaf_vector(leaf.c_matrix, tol)))
        except InvalidTreeError as exc:
            raise InvalidTreeError(f"leaf {leaf.id}: {exc}") from None
    return out


def isometry_residual(vectors) -> float:
    """``|| sum_l v_l v_l^dag - I ||_F`` over leaf vectors."""
    vs = np.array([v for _, v in vectors])
    return float(np.linalg.norm(vs.T @ vs.conj() - np.eye(vs.shape[1])))


def implemented_kraus(tree: LoccTree, tol: Tolerances = DEFAULT_TOL) -> Channel:
    """Channel implemented by the leaves: ``K''_l = sum_j conj(v_l[j]) K_j``."""
    vectors = leaf_vectors(tree, tol)
    res = isometry_residual(vectors)
    if res > tol.tol_eq:
        raise InvalidTreeError(f"leaf labels do not sum to the identity (residual {res:.3e})")
    coeffs = np.array([v for _, v in vectors]).conj()
    kraus = np.tensordot(coeffs, tree.rep.kraus, axes=(1, 0))
    return Channel(tree.dims, kraus, tol=tol)


def round_count(tree: LoccTree) -> int:
    """Largest number of measurements on any root-to-leaf path."""
    depth = 0
    queue = deque([(tree.root, 0)])
    while queue:
        node, d = queue.popleft()
        depth = max(depth, d)
        queue.extend((ch, d + 1) for ch in node.children)
    return depth


def outcome_counts(tree: LoccTree) -> dict:
    return {n.id: len(n.children) for n in tree.internal_nodes()}

