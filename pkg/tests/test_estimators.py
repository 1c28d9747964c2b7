import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from loccprune.channels import amplitude_damping_channel, dephasing_channel
from loccprune.estimators import ChannelAnalyzer, TreePruner, check_channels, check_trees, prune_many
from loccprune.harness import GenSpec, generate_tree, inject_redundancy
from loccprune.trees import InvalidTreeError


def redundant(seed):
    tree = generate_tree(GenSpec((2, 2), 2, 3, seed=seed))
    return inject_redundancy(tree, 3, np.random.default_rng(seed))


def test_get_and_set_params_round_trip():
    est = TreePruner(mode="deterministic", tol_eq=1e-9)
    params = est.get_params()
    assert params["mode"] == "deterministic"
    assert params["tol_eq"] == 1e-9
    twin = clone(est)
    assert twin.get_params() == params
    assert est.set_params(mode="channel").mode == "channel"


def test_fit_transform_prunes_every_tree():
    trees = [redundant(1), redundant(2)]
    est = TreePruner()
    out = est.fit_transform(trees)
    assert est.n_trees_ == 2
    assert len(out) == 2
    assert all(r.iterations > 0 for r in est.prune_reports_)
    assert all(len(a.leaves()) < len(b.leaves()) for a, b in zip(out, trees))


def test_single_tree_accepted():
    out = prune_many([redundant(3)])
    assert len(out) == 1
    assert len(TreePruner().fit(redundant(4)).validation_reports_) == 1


def test_transform_before_fit():
    with pytest.raises(NotFittedError):
        TreePruner().transform([redundant(1)])


def test_bad_mode_and_bad_inputs():
    with pytest.raises(ValueError):
        TreePruner(mode="fast").fit([redundant(1)])
    with pytest.raises(TypeError):
        check_trees([object()])
    with pytest.raises(ValueError):
        check_trees([])
    with pytest.raises(TypeError):
        check_channels([np.eye(2)])


def test_fit_rejects_invalid_tree():
    tree = redundant(5)
    tree.root = tree.root.scaled(0.5)
    with pytest.raises(InvalidTreeError):
        TreePruner().fit([tree])


def test_channel_analyzer():
    est = ChannelAnalyzer(n_p=8)
    reports = est.fit_transform([dephasing_channel((2,)), amplitude_damping_channel(0.5)])
    assert est.kappas_ == [2, 2]
    assert [r.chi for r in reports] == [2, 4]
    assert reports[0].round_lower_bound_int == 2
