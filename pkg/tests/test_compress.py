import numpy as np
import pytest

from loccprune import serialization as ser
from loccprune.channels import channel_distance
from loccprune.compress import (
    PostConditionError,
    PruneReport,
    prune,
    prune_siblings,
    prune_tree,
    prune_tree_deterministic,
)
from loccprune.harness import GenSpec, generate_tree, inject_redundancy
from loccprune.numerics import linear_rank
from loccprune.trees import InvalidTreeError, TreeNode, implemented_kraus, node_operator, validate

from test_trees import identity_tree, two_qubit_dephasing_tree


def random_psd(rng, n):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return g @ g.conj().T


def leaf(node_id, c):
    return TreeNode(node_id, np.asarray(c, dtype=complex))


def test_prune_siblings_planted_midpoint():
    rng = np.random.default_rng(0)
    c1, c2 = random_psd(rng, 3), random_psd(rng, 3)
    sibs = [(c1, leaf("a", c1)), (c2, leaf("b", c2)), ((c1 + c2) / 2, leaf("c", (c1 + c2) / 2))]
    survivors, report = prune_siblings(1.5 * (c1 + c2), sibs)
    assert [s.id for s in survivors] == ["a", "b"]
    assert np.allclose(survivors[0].c_matrix, 1.5 * c1)
    assert np.allclose(survivors[1].c_matrix, 1.5 * c2)
    # substitution oracle: the sum over siblings is unchanged
    assert np.allclose(sum(s.c_matrix for s in survivors), 1.5 * (c1 + c2))
    assert report.removed_subtrees[0].removed_id == "c"


def test_prune_siblings_identical_pair_merges_to_lowest_surviving():
    c = np.diag([1.0, 0.0])
    survivors, report = prune_siblings(2 * c, [(c, leaf("a", c)), (c, leaf("b", c))])
    assert len(survivors) == 1
    assert np.allclose(survivors[0].c_matrix, 2 * c)
    assert report.iterations == 1


def test_prune_siblings_independent_unchanged():
    a, b = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    survivors, report = prune_siblings(np.eye(2), [(a, leaf("a", a)), (b, leaf("b", b))])
    assert [s.id for s in survivors] == ["a", "b"]
    assert report.iterations == 0


def test_prune_siblings_checks_parent_sum():
    a = np.diag([1.0, 0.0])
    with pytest.raises(InvalidTreeError):
        prune_siblings(np.eye(2), [(a, leaf("a", a))])


def test_prune_independent_tree_is_identity():
    tree = two_qubit_dephasing_tree()
    out, report = prune_tree(tree)
    assert report.iterations == 0
    assert ser.dumps(ser.tree_to_dict(out)) == ser.dumps(ser.tree_to_dict(tree))


def test_prune_proportional_split_is_undone():
    tree = identity_tree((0.3, 0.7))
    out, report = prune_tree(tree)
    assert len(out.leaves()) == 1
    assert np.allclose(out.leaves()[0].c_matrix, [[1.0]])
    assert report.channel_residual < 1e-12


def test_prune_redundant_generated_tree():
    spec = GenSpec((2, 3), rounds=2, outcomes=4, seed=11)
    base = generate_tree(spec)
    tree = inject_redundancy(base, 4, np.random.default_rng(1))
    out, report = prune_tree(tree)
    assert len(out.leaves()) <= len(base.leaves())
    assert all(len(n.children) <= out.kappa ** 2 for n in out.internal_nodes())
    assert channel_distance(implemented_kraus(out), base.rep.channel) <= 1e-8
    assert report.channel_residual <= 1e-8
    assert validate(out).passed
    # every removal leaves the sibling labels independent
    for node in out.internal_nodes():
        assert linear_rank([c.c_matrix for c in node.children]) == len(node.children)


def test_prune_is_idempotent():
    tree = inject_redundancy(generate_tree(GenSpec((2, 2), 2, 3, seed=3)), 3,
                             np.random.default_rng(0))
    once, _ = prune_tree(tree)
    twice, report = prune_tree(once)
    assert report.iterations == 0
    assert ser.dumps(ser.tree_to_dict(once)) == ser.dumps(ser.tree_to_dict(twice))


def test_surviving_ids_come_from_input():
    tree = inject_redundancy(generate_tree(GenSpec((3, 2), 2, 5, seed=9)), 5,
                             np.random.default_rng(2))
    out, _ = prune_tree(tree)
    assert {n.id for n in out.nodes()} <= {n.id for n in tree.nodes()}


def test_prune_rejects_invalid_input():
    tree = identity_tree()
    tree.root = tree.root.scaled(0.5)
    with pytest.raises(InvalidTreeError):
        prune_tree(tree)


def test_deterministic_five_qubit_outcomes_collapse_to_local_rank():
    tree = generate_tree(GenSpec((2, 2), rounds=1, outcomes=5, seed=4))
    # rank oracle on the party-0 factors: E_s = A_s ⊗ I, so A_s = E_s[::2, ::2]
    locals_ = [node_operator(tree, c)[::2, ::2] for c in tree.root.children]
    expected = linear_rank(locals_)
    assert expected == 4
    out, report = prune_tree_deterministic(tree)
    assert len(out.root.children) == expected
    assert validate(out).passes("1", "2", "3", "4")
    assert report.mode == "deterministic"


def test_deterministic_proportional_outcomes_merge():
    tree = identity_tree((0.25, 0.75))
    out, _ = prune_tree_deterministic(tree)
    assert len(out.root.children) == 1


def test_deterministic_already_small_unchanged():
    tree = two_qubit_dephasing_tree()
    out, report = prune_tree_deterministic(tree)
    assert report.iterations == 0
    assert [n.id for n in out.nodes()] == [n.id for n in tree.nodes()]


def test_prune_dispatch_and_unknown_mode():
    tree = identity_tree()
    assert prune(tree, "channel")[1].mode == "channel"
    with pytest.raises(ValueError):
        prune(tree, "greedy")


def test_report_to_dict_is_json_ready():
    import json

    _, report = prune_tree(identity_tree())
    doc = report.to_dict()
    assert json.loads(json.dumps(doc))["iterations"] == 1
    assert isinstance(PostConditionError("x", PruneReport()).report, PruneReport)
