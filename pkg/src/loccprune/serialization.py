"""JSON file formats.

Matrices are stored row-major as nested lists of ``[re, im]`` pairs.

``locc-channel/1``::

    {"format": "locc-channel/1", "dims": [2, 2], "kraus": [<matrix>, ...]}

``locc-tree/1``::

    {"format": "locc-tree/1",
     "channel": {"dims": [...], "kraus": [...]},       # minimal, HS-orthogonal
     "root": {"id": "r", "acting_party": 0, "c_matrix": <matrix>,
              "children": [{"id": "r.0", "c_matrix": <matrix>, "children": []}, ...]}}

``acting_party`` is omitted on leaves.  Reports use ``locc-prune-report/1``
and ``locc-bounds/1``; generator configs use ``locc-gen/1``.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from .analysis import BoundsReport
from .channels import Channel, ChannelError, MinimalRep
from .compress import PruneReport
from .harness import GenSpec
from .numerics import DEFAULT_TOL, Tolerances
from .trees import LoccTree, TreeNode, TreeStructureError

CHANNEL_FORMAT = "locc-channel/1"
TREE_FORMAT = "locc-tree/1"
PRUNE_REPORT_FORMAT = "locc-prune-report/1"
BOUNDS_FORMAT = "locc-bounds/1"
GEN_FORMAT = "locc-gen/1"


class FormatError(ValueError):
    """A document could not be parsed into the expected structure."""


def encode_matrix(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=np.complex128)
    return np.stack([m.real, m.imag], axis=-1).tolist()


def decode_matrix(data) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"matrix entries must be [re, im] number pairs: {exc}") from None
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise FormatError(f"matrix must be rows x cols x [re, im], got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def _channel_body(c: Channel) -> dict:
    return {"dims": list(c.dims), "kraus": [encode_matrix(k) for k in c.kraus]}


def channel_to_dict(c: Channel) -> dict:
    return {"format": CHANNEL_FORMAT, **_channel_body(c)}


def _require(doc, key):
    if not isinstance(doc, dict) or key not in doc:
        raise FormatError(f"missing field {key!r}")
    return doc[key]


def _check_format(doc, expected: str):
    tag = _require(doc, "format")
    if tag != expected:
        raise FormatError(f"expected format {expected!r}, got {tag!r}")


def _channel_from_body(doc, tol: Tolerances) -> Channel:
    dims = _require(doc, "dims")
    kraus = _require(doc, "kraus")
    if not isinstance(dims, list) or not all(isinstance(d, int) for d in dims):
        raise FormatError("dims must be a list of integers")
    if not isinstance(kraus, list) or not kraus:
        raise FormatError("kraus must be a nonempty list of matrices")
    try:
        return Channel(dims, [decode_matrix(k) for k in kraus], tol=tol)
    except ChannelError as exc:
        raise FormatError(str(exc)) from None


def channel_from_dict(doc, tol: Tolerances = DEFAULT_TOL) -> Channel:
    _check_format(doc, CHANNEL_FORMAT)
    return _channel_from_body(doc, tol)


def _node_to_dict(node: TreeNode) -> dict:
    out = {"id": node.id}
    if node.acting_party is not None:
        out["acting_party"] = int(node.acting_party)
    out["c_matrix"] = encode_matrix(node.c_matrix)
    out["children"] = [_node_to_dict(c) for c in node.children]
    return out


def tree_to_dict(tree: LoccTree) -> dict:
    return {
        "format": TREE_FORMAT,
        "channel": _channel_body(tree.rep.channel),
        "root": _node_to_dict(tree.root),
    }


def _node_from_dict(doc) -> TreeNode:
    node_id = _require(doc, "id")
    children = doc.get("children", [])
    if not isinstance(children, list):
        raise FormatError(f"node {node_id}: children must be a list")
    party = doc.get("acting_party")
    if party is not None and not isinstance(party, int):
        raise FormatError(f"node {node_id}: acting_party must be an integer")
    try:
        return TreeNode(
            id=str(node_id),
            c_matrix=decode_matrix(_require(doc, "c_matrix")),
            acting_party=party,
            children=[_node_from_dict(c) for c in children],
        )
    except TreeStructureError as exc:
        raise FormatError(str(exc)) from None


def tree_from_dict(doc, tol: Tolerances = DEFAULT_TOL) -> LoccTree:
    _check_format(doc, TREE_FORMAT)
    channel = _channel_from_body(_require(doc, "channel"), tol)
    try:
        rep = MinimalRep.from_kraus(channel, tol)
        return LoccTree(rep=rep, root=_node_from_dict(_require(doc, "root")))
    except (ChannelError, TreeStructureError) as exc:
        raise FormatError(str(exc)) from None


def prune_report_to_dict(report: PruneReport) -> dict:
    return {"format": PRUNE_REPORT_FORMAT, **report.to_dict()}


def bounds_to_dict(report: BoundsReport) -> dict:
    return {"format": BOUNDS_FORMAT, **report.to_dict()}


def gen_spec_to_dict(spec: GenSpec, splits: int = 0) -> dict:
    out = {"format": GEN_FORMAT, **spec.to_dict()}
    if splits:
        out["redundancy_splits"] = splits
    return out


def gen_spec_from_dict(doc) -> tuple[GenSpec, int]:
    """Parse a generator config; returns the spec and the redundancy split count."""
    _check_format(doc, GEN_FORMAT)
    outcomes = doc.get("outcomes", 3)
    try:
        spec = GenSpec(
            dims=tuple(_require(doc, "dims")),
            rounds=int(_require(doc, "rounds")),
            outcomes=tuple(outcomes) if isinstance(outcomes, list) else int(outcomes),
            party_schedule=doc.get("party_schedule", "round-robin"),
            seed=int(_require(doc, "seed")),
        )
    except (TypeError, ValueError) as exc:
        raise FormatError(str(exc)) from None
    return spec, int(doc.get("redundancy_splits", 0))


def dumps(doc: dict) -> str:
    return json.dumps(doc, separators=(",", ":")) + "\n"


def write_json(path: Union[str, Path], doc: dict):
    Path(path).write_text(dumps(doc))


def read_json(path: Union[str, Path]):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None


def load_channel(path, tol: Tolerances = DEFAULT_TOL) -> Channel:
    return channel_from_dict(read_json(path), tol)


def load_tree(path, tol: Tolerances = DEFAULT_TOL) -> LoccTree:
    return tree_from_dict(read_json(path), tol)


def save_tree(tree: LoccTree, path):
    write_json(path, tree_to_dict(tree))


def save_channel(channel: Channel, path):
    write_json(path, channel_to_dict(channel))
