"""Seeded generation of valid protocol trees and independent oracles.

A generated tree comes from an explicit protocol: at each node the scheduled
party applies a random local instrument, branch Kraus operators are products
of the chosen outcomes, and the implemented channel is whatever the leaves
produce.  Labels are then derived leaf-first from the expansion of each leaf
operator in the minimal Kraus basis; internal labels are sums of children.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence, Union

import numpy as np

from .channels import Channel, apply, expand_in_minimal, minimal_rep
from .numerics import DEFAULT_TOL, Tolerances, embed_local
from .trees import LoccTree, TreeNode

SCHEDULES = ("round-robin", "seeded-random")


class GenerationError(RuntimeError):
    """Random construction failed (degenerate draws or expansion residual)."""


@dataclass(frozen=True)
class GenSpec:
    dims: tuple
    rounds: int
    outcomes: Union[int, tuple] = 3
    party_schedule: str = "round-robin"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if isinstance(self.outcomes, (list, tuple)):
            object.__setattr__(self, "outcomes", tuple(int(k) for k in self.outcomes))
        if not self.dims or any(d < 2 for d in self.dims):
            raise ValueError(f"every party dimension must be >= 2, got {self.dims}")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        ks = self.outcomes if isinstance(self.outcomes, tuple) else (self.outcomes,)
        if isinstance(self.outcomes, tuple) and len(ks) != self.rounds:
            raise ValueError("a per-round outcome list needs one entry per round")
        if any(k < 2 for k in ks):
            raise ValueError("every measurement needs at least 2 outcomes")
        if self.party_schedule not in SCHEDULES:
            raise ValueError(f"party_schedule must be one of {SCHEDULES}")

    def outcomes_at(self, depth: int) -> int:
        if isinstance(self.outcomes, tuple):
            return self.outcomes[depth]
        return self.outcomes

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        if isinstance(self.outcomes, tuple):
            d["outcomes"] = list(self.outcomes)
        return d


def random_instrument(d: int, k: int, rng: np.random.Generator,
                      max_retries: int = 8) -> list[np.ndarray]:
    """``k`` operators on ``C^d`` with ``sum A^dag A = I``.

    Independent complex Gaussian draws are normalized by the inverse square
    root of their completeness sum.
    """
    if k < 1:
        raise ValueError("an instrument needs at least one outcome")
    for _ in range(max_retries):
        g = (rng.standard_normal((k, d, d)) + 1j * rng.standard_normal((k, d, d))) / np.sqrt(2)
        s = np.einsum("kab,kac->bc", g.conj(), g)
        w, u = np.linalg.eigh(s)
        if w[0] <= 1e-8 * w[-1]:
            continue
        inv_sqrt = (u / np.sqrt(w)) @ u.conj().T
        return [a @ inv_sqrt for a in g]
    raise GenerationError(f"degenerate instrument draws after {max_retries} retries")


def _schedule_party(spec: GenSpec, depth: int, parent_party, rng) -> int:
    n = len(spec.dims)
    if spec.party_schedule == "round-robin" or n == 1:
        return depth % n
    choices = [p for p in range(n) if p != parent_party]
    return int(rng.choice(choices))


def generate_tree(spec: GenSpec, tol: Tolerances = DEFAULT_TOL) -> LoccTree:
    """Build a random protocol for ``spec`` and label it as a valid tree.

    Every branch carries exactly ``spec.rounds`` measurements.  Node ids are
    dotted outcome paths from ``"r"``.
    """
    seq = np.random.SeedSequence(spec.seed)
    inst_rng, sched_rng = (np.random.default_rng(s) for s in seq.spawn(2))
    dims = spec.dims
    total = int(np.prod(dims))

    # skeleton: (id, party, children) with branch operators at the leaves
    leaf_ops = []

    def build(node_id, op, depth, parent_party):
        if depth == spec.rounds:
            leaf_ops.append(op)
            return (node_id, None, [])
        party = _schedule_party(spec, depth, parent_party, sched_rng)
        inst = random_instrument(dims[party], spec.outcomes_at(depth), inst_rng)
        kids = [
            build(f"{node_id}.{s}", embed_local(a, party, dims) @ op, depth + 1, party)
            for s, a in enumerate(inst)
        ]
        return (node_id, party, kids)

    skeleton = build("r", np.eye(total, dtype=np.complex128), 0, None)
    channel = Channel(dims, leaf_ops, tol=tol)
    rep = minimal_rep(channel, tol)

    labels = iter(_leaf_labels(rep, leaf_ops, tol))

    def label(sk):
        node_id, party, kids = sk
        if not kids:
            return TreeNode(node_id, next(labels))
        children = [label(k) for k in kids]
        return TreeNode(node_id, sum(c.c_matrix for c in children), party, children)

    return LoccTree(rep=rep, root=label(skeleton))


def _leaf_labels(rep, ops, tol):
    out = []
    for op in ops:
        try:
            v = expand_in_minimal(rep, op, tol)
        except ValueError as exc:
            raise GenerationError(str(exc)) from None
        out.append(np.outer(v.conj(), v))
    return out


def inject_redundancy(tree: LoccTree, splits: int, rng: np.random.Generator) -> LoccTree:
    """Split random non-root subtrees into two proportional copies.

    A subtree labeled ``C`` becomes two sibling copies carrying ``p C`` and
    ``(1 - p) C`` with ``p`` uniform in (0.2, 0.8).  The first copy keeps the
    original ids; the second gets a ``~k`` suffix for split ``k``.
    """
    if splits < 1:
        raise ValueError("splits must be >= 1")
    out = tree.copy()
    for k in range(1, splits + 1):
        parents = [n for n in out.nodes() if n.children]
        slots = [(p, i) for p in parents for i in range(len(p.children))]
        parent, idx = slots[int(rng.integers(len(slots)))]
        p = float(rng.uniform(0.2, 0.8))
        original = parent.children[idx]
        keep = original.scaled(p)
        twin = _relabel(original.scaled(1.0 - p), f"~{k}")
        parent.children[idx:idx + 1] = [keep, twin]
    return LoccTree(rep=out.rep, root=out.root)


def _relabel(node: TreeNode, suffix: str) -> TreeNode:
    node.id = node.id + suffix
    for ch in node.children:
        _relabel(ch, suffix)
    return node


def tomographic_channel_oracle(c: Channel) -> np.ndarray:
    """Choi matrix rebuilt from the channel's action on matrix units.

    ``choi[(a, b), (c, d)] = E(|b><d|)[a, c]``; shares no code with
    :func:`loccprune.channels.choi_matrix`.
    """
    dim = c.dim
    t = np.zeros((dim, dim, dim, dim), dtype=np.complex128)
    for b in range(dim):
        for d in range(dim):
            unit = np.zeros((dim, dim), dtype=np.complex128)
            unit[b, d] = 1.0
            t[:, b, :, d] = apply(c, unit)
    return t.reshape(dim * dim, dim * dim)


def random_channel(dims: Sequence[int], n_kraus: int, rng: np.random.Generator) -> Channel:
    total = int(np.prod(dims))
    return Channel(dims, random_instrument(total, n_kraus, rng))


def random_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """``rows x cols`` matrix with orthonormal columns (``rows >= cols``)."""
    g = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))
