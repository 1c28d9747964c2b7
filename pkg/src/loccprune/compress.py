"""Sibling pruning of protocol trees.

Channel mode removes linear dependencies among sibling ``C`` labels.  Each
step takes one vanishing real combination ``sum_s a_s C_s = 0``, deletes the
sibling ``s1`` with the largest ``|a_s|`` together with its subtree, and
multiplies every remaining sibling's subtree by ``1 + q_s`` where
``q_s = -a_s / a_{s1}``.  Choosing the largest coefficient keeps
``|q_s| <= 1``, so every factor is nonnegative and labels stay PSD.  Leaves
that survive are rescaled originals, which is why the implemented channel
does not change.

Deterministic mode applies the same step to the acting party's local
factors ``A_s`` instead.  That keeps every branch (so a task that succeeds on
every branch still succeeds) but changes the implemented channel, so the
output is relabeled against the minimal Kraus set of the channel it now
implements.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channels import Channel, channel_distance, expand_in_minimal, minimal_rep
from .numerics import DEFAULT_TOL, Tolerances, factor_across_cut, kernel_basis
from .trees import (
    InvalidTreeError,
    LoccTree,
    TreeNode,
    implemented_kraus,
    isometry_residual,
    leaf_vectors,
    node_operator,
    validate,
)

MODES = ("channel", "deterministic")


class PostConditionError(RuntimeError):
    """A pruned tree failed a verified post-condition (numerical breakdown)."""

    def __init__(self, message: str, report: "PruneReport"):
        super().__init__(message)
        self.report = report


@dataclass
class Removal:
    parent_id: str
    removed_id: str
    coefficients: dict  # surviving sibling id -> q_s


@dataclass
class PruneReport:
    mode: str = "channel"
    iterations: int = 0
    removed_subtrees: list = field(default_factory=list)
    rescalings: list = field(default_factory=list)
    dropped_zero_subtrees: list = field(default_factory=list)
    outcome_histogram: dict = field(default_factory=dict)
    channel_residual: Optional[float] = None
    isometry_residual: Optional[float] = None
    kappa_in: int = 0
    kappa_out: int = 0

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "iterations": self.iterations,
            "removed_subtrees": [
                {"parent": r.parent_id, "removed": r.removed_id, "q": r.coefficients}
                for r in self.removed_subtrees
            ],
            "rescalings": [[nid, f] for nid, f in self.rescalings],
            "dropped_zero_subtrees": list(self.dropped_zero_subtrees),
            "outcome_histogram": {k: list(v) for k, v in self.outcome_histogram.items()},
            "channel_residual": self.channel_residual,
            "isometry_residual": self.isometry_residual,
            "kappa_in": self.kappa_in,
            "kappa_out": self.kappa_out,
        }


def _pick_s1(a: np.ndarray, ids: Sequence[str]) -> int:
    mags = np.abs(a)
    top = mags.max()
    # ties (up to rounding) go to the lowest id
    tied = [k for k in range(len(a)) if mags[k] >= top * (1 - 1e-12)]
    return min(tied, key=lambda k: ids[k])


def _prune_group(keys, subtrees, ids, tol: Tolerances, parent_id: str, report: PruneReport):
    """Eliminate dependencies among ``keys`` one at a time.

    ``keys[s]`` is the matrix whose dependencies are sought for sibling ``s``
    (its ``C`` label, or its local factor); ``subtrees[s]`` is rescaled along
    with it.  Returns the surviving ``(keys, subtrees)``.
    """
    keys = list(keys)
    subtrees = list(subtrees)
    ids = list(ids)
    while len(keys) > 1:
        kernel = kernel_basis(keys, tol)
        if not kernel:
            break
        a = np.real(kernel[0])
        s1 = _pick_s1(a, ids)
        q = -a / a[s1]
        report.iterations += 1
        removed = ids[s1]
        coeffs = {}
        new_keys, new_subs, new_ids = [], [], []
        for s in range(len(keys)):
            if s == s1:
                continue
            factor = float(1.0 + q[s])
            coeffs[ids[s]] = float(q[s])
            if factor <= tol.tol_zero:
                report.dropped_zero_subtrees.append(ids[s])
                continue
            report.rescalings.append((ids[s], factor))
            new_keys.append(keys[s] * factor)
            new_subs.append(subtrees[s].scaled(factor))
            new_ids.append(ids[s])
        report.removed_subtrees.append(Removal(parent_id, removed, coeffs))
        keys, subtrees, ids = new_keys, new_subs, new_ids
    return keys, subtrees


def prune_siblings(parent_c, siblings: Sequence[tuple], tol: Tolerances = DEFAULT_TOL,
                   parent_id: str = "", report: Optional[PruneReport] = None):
    """Prune one measurement's outcomes until their labels are independent.

    ``siblings`` holds ``(C, subtree)`` pairs whose labels must sum to
    ``parent_c``.  Returns the surviving subtrees (rescaled copies) and the
    report the removals were recorded in.
    """
    report = report if report is not None else PruneReport()
    parent_c = np.asarray(parent_c, dtype=np.complex128)
    labels = [np.asarray(c, dtype=np.complex128) for c, _ in siblings]
    residual = float(np.linalg.norm(sum(labels) - parent_c))
    if residual > tol.tol_eq:
        raise InvalidTreeError(
            f"node {parent_id}: children do not sum to the parent (residual {residual:.3e})"
        )
    subtrees = [sub for _, sub in siblings]
    ids = [sub.id for sub in subtrees]
    _, survivors = _prune_group(labels, subtrees, ids, tol, parent_id, report)
    return survivors, report


def _bfs_prune(tree: LoccTree, key_fn, tol: Tolerances, report: PruneReport) -> TreeNode:
    root = tree.copy().root
    queue = deque([root])
    while queue:
        node = queue.popleft()
        if node.is_leaf:
            continue
        before = len(node.children)
        keys = [key_fn(node, ch) for ch in node.children]
        ids = [ch.id for ch in node.children]
        _, survivors = _prune_group(keys, node.children, ids, tol, node.id, report)
        node.children = survivors
        report.outcome_histogram[node.id] = (before, len(survivors))
        queue.extend(survivors)
    return root


def prune_tree(tree: LoccTree, tol: Tolerances = DEFAULT_TOL) -> tuple[LoccTree, PruneReport]:
    """Make every measurement's sibling labels linearly independent.

    Nodes are processed breadth-first from the root; a subtree's internal
    dependencies are unchanged by the uniform rescaling it receives from
    above.  The output is verified: it must validate, implement the same
    channel, and have at most ``kappa**2`` outcomes per measurement.
    """
    check = validate(tree, tol)
    if not check.passed:
        raise InvalidTreeError(f"input tree fails items {check.failed_items()}")
    report = PruneReport(mode="channel", kappa_in=tree.kappa, kappa_out=tree.kappa)
    root = _bfs_prune(tree, lambda parent, child: child.c_matrix, tol, report)
    out = LoccTree(rep=tree.rep, root=root)

    vectors = leaf_vectors(out, tol)
    report.isometry_residual = isometry_residual(vectors)
    report.channel_residual = channel_distance(
        implemented_kraus(out, tol), implemented_kraus(tree, tol)
    )
    problems = []
    post = validate(out, tol)
    if not post.passed:
        problems.append(f"output fails items {post.failed_items()}")
    if report.channel_residual > tol.tol_eq:
        problems.append(f"channel residual {report.channel_residual:.3e}")
    if report.isometry_residual > tol.tol_eq:
        problems.append(f"isometry residual {report.isometry_residual:.3e}")
    worst = max((len(n.children) for n in out.internal_nodes()), default=0)
    if worst > tree.kappa ** 2:
        problems.append(f"{worst} outcomes exceed kappa^2 = {tree.kappa ** 2}")
    if problems:
        raise PostConditionError("; ".join(problems), report)
    return out, report


def _local_factor(tree: LoccTree, tol: Tolerances):
    def key(parent: TreeNode, child: TreeNode) -> np.ndarray:
        e = node_operator(tree, child)
        f = factor_across_cut(e, parent.acting_party, tree.dims, tol)
        if f is None:
            raise InvalidTreeError(
                f"node {child.id} does not factor across party {parent.acting_party}"
            )
        local = f[0]
        return 0.5 * (local + local.conj().T)
    return key


def relabel(tree_root: TreeNode, rep_in, dims, tol: Tolerances = DEFAULT_TOL) -> LoccTree:
    """Re-express a tree against the minimal Kraus set of what its leaves implement.

    Each leaf label is split into rank-one terms (eigendecomposition); each
    term gives one implemented Kraus operator.  The new labels are the
    expansions of those operators in the new minimal basis, summed upward.
    """
    leaves = [n for n in tree_root.iter_preorder() if n.is_leaf]
    per_leaf = []
    ops = []
    for leaf in leaves:
        c = 0.5 * (leaf.c_matrix + leaf.c_matrix.conj().T)
        w, u = np.linalg.eigh(c)
        keep = w > tol.tol_rank * max(w[-1], 0.0)
        vecs = (u[:, keep] * np.sqrt(w[keep])).T
        kraus = np.tensordot(vecs.conj(), rep_in.kraus, axes=(1, 0))
        per_leaf.append(len(kraus))
        ops.extend(kraus)
    channel = Channel(dims, ops, tol=tol)
    rep = minimal_rep(channel, tol)
    coeffs = [expand_in_minimal(rep, k, tol) for k in ops]
    labels = {}
    pos = 0
    for leaf, count in zip(leaves, per_leaf):
        vs = coeffs[pos:pos + count]
        pos += count
        labels[leaf.id] = sum(np.outer(v.conj(), v) for v in vs)

    def rebuild(node: TreeNode) -> TreeNode:
        if node.is_leaf:
            return TreeNode(node.id, labels[node.id])
        kids = [rebuild(c) for c in node.children]
        return TreeNode(node.id, sum(k.c_matrix for k in kids), node.acting_party, kids)

    return LoccTree(rep=rep, root=rebuild(tree_root))


def prune_tree_deterministic(tree: LoccTree,
                             tol: Tolerances = DEFAULT_TOL) -> tuple[LoccTree, PruneReport]:
    """Prune on the acting party's local factors; bound ``d_alpha**2`` outcomes.

    Only the product-structure conditions (items 1-4) are required of the
    input.  Branches of the output are a rescaled subset of the input's.  No
    channel equality is checked; the report's ``channel_residual`` stays
    ``None``.
    """
    check = validate(tree, tol)
    if not check.passes("1", "2", "3", "4"):
        raise InvalidTreeError(f"input tree fails items {check.failed_items()}")
    report = PruneReport(mode="deterministic", kappa_in=tree.kappa)
    root = _bfs_prune(tree, _local_factor(tree, tol), tol, report)
    out = relabel(root, tree.rep, tree.dims, tol)
    report.kappa_out = out.kappa
    leaf_sum = sum(leaf.c_matrix for leaf in out.leaves())
    report.isometry_residual = float(np.linalg.norm(leaf_sum - np.eye(out.kappa)))

    problems = []
    post = validate(out, tol)
    if not post.passes("1", "2", "3", "4"):
        problems.append(f"output fails items {post.failed_items()}")
    for n in out.internal_nodes():
        bound = tree.dims[n.acting_party] ** 2
        if len(n.children) > bound:
            problems.append(f"node {n.id}: {len(n.children)} outcomes exceed d^2 = {bound}")
    if problems:
        raise PostConditionError("; ".join(problems), report)
    return out, report


def prune(tree: LoccTree, mode: str = "channel", tol: Tolerances = DEFAULT_TOL):
    if mode == "channel":
        return prune_tree(tree, tol)
    if mode == "deterministic":
        return prune_tree_deterministic(tree, tol)
    raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
