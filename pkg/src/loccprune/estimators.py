"""scikit-learn style wrappers so pruning and analysis compose with pipelines.

Both estimators take a collection of inputs as ``X`` (a single tree or
channel is accepted and treated as a collection of one).  Nothing is learned
from data; ``fit`` validates inputs and records per-input diagnostics.
"""

from __future__ import annotations

from typing import Iterable

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .analysis import bounds
from .channels import Channel, MinimalRep, minimal_rep
from .compress import MODES, prune
from .numerics import Tolerances
from .trees import InvalidTreeError, LoccTree, validate

_REQUIRED_ITEMS = {"channel": ("1", "2", "3", "4", "5a", "6"), "deterministic": ("1", "2", "3", "4")}


def check_trees(X) -> list[LoccTree]:
    """Coerce ``X`` into a nonempty list of :class:`LoccTree`."""
    items = [X] if isinstance(X, LoccTree) else list(X)
    if not items:
        raise ValueError("expected at least one tree")
    for k, t in enumerate(items):
        if not isinstance(t, LoccTree):
            raise TypeError(f"element {k} is {type(t).__name__}, expected LoccTree")
    return items


def check_channels(X) -> list[Channel]:
    """Coerce ``X`` into a nonempty list of :class:`Channel`.

    Accepts channels, minimal representations and trees (read as their
    minimal channel).
    """
    if isinstance(X, (Channel, MinimalRep, LoccTree)):
        X = [X]
    out = []
    for k, x in enumerate(X):
        if isinstance(x, LoccTree):
            x = x.rep.channel
        elif isinstance(x, MinimalRep):
            x = x.channel
        if not isinstance(x, Channel):
            raise TypeError(f"element {k} is {type(x).__name__}, expected a channel")
        out.append(x)
    if not out:
        raise ValueError("expected at least one channel")
    return out


class _TolMixin:
    def _tol(self) -> Tolerances:
        return Tolerances(self.tol_rank, self.tol_psd, self.tol_eq, self.tol_zero)


class TreePruner(_TolMixin, TransformerMixin, BaseEstimator):
    """Prune protocol trees so every measurement has independent outcomes.

    Parameters
    ----------
    mode : {"channel", "deterministic"}
        ``"channel"`` preserves the implemented channel (at most
        ``kappa**2`` outcomes per measurement); ``"deterministic"`` preserves
        branches (at most ``d_alpha**2`` outcomes).
    tol_rank, tol_psd, tol_eq, tol_zero : float
        See :class:`loccprune.numerics.Tolerances`.

    Attributes
    ----------
    validation_reports_ : list of ValidationReport
        Reports for the trees passed to ``fit``.
    prune_reports_ : list of PruneReport
        Reports from the most recent ``transform``.
    """

    def __init__(self, mode="channel", tol_rank=1e-9, tol_psd=1e-10, tol_eq=1e-8,
                 tol_zero=1e-12):
        self.mode = mode
        self.tol_rank = tol_rank
        self.tol_psd = tol_psd
        self.tol_eq = tol_eq
        self.tol_zero = tol_zero

    def fit(self, X, y=None):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        trees = check_trees(X)
        tol = self._tol()
        self.validation_reports_ = [validate(t, tol) for t in trees]
        need = _REQUIRED_ITEMS[self.mode]
        for k, rep in enumerate(self.validation_reports_):
            if not rep.passes(*need):
                raise InvalidTreeError(f"tree {k} fails items {rep.failed_items()}")
        self.n_trees_ = len(trees)
        return self

    def transform(self, X) -> list[LoccTree]:
        check_is_fitted(self, "validation_reports_")
        tol = self._tol()
        out, reports = [], []
        for t in check_trees(X):
            pruned, report = prune(t, self.mode, tol)
            out.append(pruned)
            reports.append(report)
        self.prune_reports_ = reports
        return out


class ChannelAnalyzer(_TolMixin, TransformerMixin, BaseEstimator):
    """Compute Kraus rank, ``chi`` and outcome bounds for channels.

    ``transform`` returns one :class:`BoundsReport` per input.
    """

    def __init__(self, n_p=None, tol_rank=1e-9, tol_psd=1e-10, tol_eq=1e-8, tol_zero=1e-12):
        self.n_p = n_p
        self.tol_rank = tol_rank
        self.tol_psd = tol_psd
        self.tol_eq = tol_eq
        self.tol_zero = tol_zero

    def fit(self, X, y=None):
        self.reps_ = [minimal_rep(c, self._tol()) for c in check_channels(X)]
        self.kappas_ = [r.kappa for r in self.reps_]
        return self

    def transform(self, X):
        check_is_fitted(self, "reps_")
        tol = self._tol()
        return [bounds(minimal_rep(c, tol), self.n_p, tol) for c in check_channels(X)]


def prune_many(trees: Iterable[LoccTree], mode: str = "channel", **tol_params):
    """Convenience: ``TreePruner(mode, **tol_params).fit_transform(trees)``."""
    return TreePruner(mode=mode, **tol_params).fit_transform(list(trees))
