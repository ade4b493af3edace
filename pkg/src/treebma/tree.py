"""Binary classification trees: routing, leaf statistics, marginal likelihood.

A tree is an immutable value: a dict of nodes keyed by id plus a root id.
Internal nodes hold a :class:`SplitRule`; leaves hold (optionally) the pair of
training class counts that the Dirichlet-multinomial marginal likelihood and
the leaf predictive probabilities are computed from.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from math import lgamma, log

import numpy as np

from .dataset import Dataset

__all__ = [
    "TreeFormatError",
    "SplitRule",
    "TreeNode",
    "DecisionTree",
    "TreePrior",
    "route",
    "leaf_rows",
    "annotate",
    "log_marginal_likelihood",
    "leaf_log_marginal",
    "leaf_predictive",
    "candidate_rules",
    "serialize",
    "deserialize",
]


class TreeFormatError(ValueError):
    """Raised when a serialized tree record is malformed."""


@dataclass(frozen=True)
class SplitRule:
    """A test on one feature: continuous ``x <= threshold`` or categorical ``x == level``."""

    variable: int
    threshold: float | None = None
    level: int | None = None

    def __post_init__(self):
        if (self.threshold is None) == (self.level is None):
            raise ValueError("exactly one of threshold/level must be set")

    @property
    def is_categorical(self) -> bool:
        return self.level is not None

    def goes_left(self, value: float) -> bool:
        if self.level is not None:
            return value == self.level
        return value <= self.threshold


@dataclass(frozen=True)
class TreeNode:
    """Either a split node (rule + two child ids) or a leaf (class counts)."""

    node_id: int
    split: SplitRule | None = None
    left: int | None = None
    right: int | None = None
    counts: tuple[int, int] | None = None

    def __post_init__(self):
        is_split = self.split is not None
        if is_split and (self.left is None or self.right is None):
            raise ValueError("split node needs both children")
        if not is_split and (self.left is not None or self.right is not None):
            raise ValueError("leaf node may not have children")

    @property
    def is_leaf(self) -> bool:
        return self.split is None


@dataclass(frozen=True)
class DecisionTree:
    """Immutable binary tree over feature indices."""

    nodes: dict[int, TreeNode]
    root: int

    def __post_init__(self):
        seen = set()
        stack = [self.root]
        while stack:
            nid = stack.pop()
            if nid in seen:
                raise ValueError(f"node {nid} reachable twice (not a tree)")
            seen.add(nid)
            node = self.nodes.get(nid)
            if node is None:
                raise ValueError(f"dangling child id {nid}")
            if not node.is_leaf:
                stack.extend((node.left, node.right))
        if seen != set(self.nodes):
            raise ValueError("unreachable nodes present")

    def leaf_ids(self) -> list[int]:
        return [nid for nid, nd in self.nodes.items() if nd.is_leaf]

    def split_ids(self) -> list[int]:
        return [nid for nid, nd in self.nodes.items() if not nd.is_leaf]

    def prunable_ids(self) -> list[int]:
        """Split nodes whose both children are leaves (candidates for a death move)."""
        return [
            nid
            for nid, nd in self.nodes.items()
            if not nd.is_leaf and self.nodes[nd.left].is_leaf and self.nodes[nd.right].is_leaf
        ]

    @property
    def k_leaves(self) -> int:
        return sum(1 for nd in self.nodes.values() if nd.is_leaf)

    @property
    def n_splits(self) -> int:
        return len(self.nodes) - self.k_leaves

    def variables_used(self) -> list[int]:
        return [self.nodes[s].split.variable for s in self.split_ids()]


@dataclass(frozen=True)
class TreePrior:
    """Structural and leaf-probability prior hyperparameters."""

    s_max: int
    min_leaf: int = 3
    dirichlet_alpha: float = 1.0

    def __post_init__(self):
        if self.s_max < 1 or self.min_leaf < 1 or self.dirichlet_alpha <= 0:
            raise ValueError("invalid prior hyperparameters")


def route(tree: DecisionTree, x) -> int:
    """Route one feature vector to its leaf; returns the leaf node id."""
    x = np.asarray(x, dtype=np.float64)
    nid = tree.root
    node = tree.nodes[nid]
    while not node.is_leaf:
        if node.split.variable >= x.shape[0]:
            raise ValueError(
                f"feature vector of arity {x.shape[0]} too short for split on "
                f"variable {node.split.variable}"
            )
        nid = node.left if node.split.goes_left(x[node.split.variable]) else node.right
        node = tree.nodes[nid]
    return nid


def leaf_rows(tree: DecisionTree, X: np.ndarray, subtree_root: int | None = None,
              rows: np.ndarray | None = None) -> dict[int, np.ndarray]:
    """Partition row indices by leaf. Optionally restricted to a subtree."""
    start = tree.root if subtree_root is None else subtree_root
    idx0 = np.arange(X.shape[0]) if rows is None else rows
    out: dict[int, np.ndarray] = {}
    stack = [(start, idx0)]
    while stack:
        nid, idx = stack.pop()
        node = tree.nodes[nid]
        if node.is_leaf:
            out[nid] = idx
        else:
            col = X[idx, node.split.variable]
            go_left = col == node.split.level if node.split.is_categorical \
                else col <= node.split.threshold
            stack.append((node.left, idx[go_left]))
            stack.append((node.right, idx[~go_left]))
    return out


def annotate(tree: DecisionTree, data: Dataset) -> DecisionTree:
    """Return a copy whose every leaf carries its (n0, n1) training class counts."""
    split_vars = tree.variables_used()
    if split_vars and max(split_vars) >= data.m:
        raise ValueError("tree splits on a variable beyond the dataset arity")
    parts = leaf_rows(tree, data.X)
    nodes = dict(tree.nodes)
    for nid, idx in parts.items():
        n1 = int(data.y[idx].sum())
        nodes[nid] = replace(nodes[nid], counts=(idx.size - n1, n1))
    return DecisionTree(nodes, tree.root)


def leaf_log_marginal(n0: int, n1: int, alpha: float) -> float:
    """log[ B(n0+a, n1+a) / B(a, a) ], the one-leaf Dirichlet-multinomial marginal."""
    return (
        lgamma(n0 + alpha) + lgamma(n1 + alpha) - lgamma(n0 + n1 + 2 * alpha)
        - 2 * lgamma(alpha) + lgamma(2 * alpha)
    )


def log_marginal_likelihood(tree: DecisionTree, prior: TreePrior) -> float:
    """Sum of per-leaf Dirichlet-multinomial log marginals over an annotated tree."""
    total = 0.0
    for nid in tree.leaf_ids():
        counts = tree.nodes[nid].counts
        if counts is None:
            raise ValueError(f"leaf {nid} is not annotated")
        total += leaf_log_marginal(counts[0], counts[1], prior.dirichlet_alpha)
    return total


def leaf_predictive(counts: tuple[int, int], prior: TreePrior) -> tuple[float, float]:
    """Posterior-mean class probabilities ((n0+a)/(n+2a), (n1+a)/(n+2a))."""
    n0, n1 = counts
    if n0 < 0 or n1 < 0:
        raise ValueError("leaf counts must be nonnegative")
    a = prior.dirichlet_alpha
    denom = n0 + n1 + 2 * a
    return ((n0 + a) / denom, (n1 + a) / denom)


def candidate_rules(data: Dataset, variable: int) -> list[SplitRule]:
    """Admissible split rules for one variable, from the observed training values.

    Continuous columns: one threshold per distinct observed value except the
    maximum, so both children are reachable. Categorical columns: one equality
    rule per declared level present in the data (empty if the column is
    constant). A constant column yields an empty list.
    """
    if not 0 <= variable < data.m:
        raise ValueError(f"variable index {variable} out of range")
    var = data.schema.variables[variable]
    values = np.unique(data.X[:, variable])
    if values.size <= 1:
        return []
    if var.is_categorical:
        return [SplitRule(variable, level=int(v)) for v in values]
    return [SplitRule(variable, threshold=float(v)) for v in values[:-1]]


# ---------------------------------------------------------------------------
# One-line JSON serialization (ensemble file format)
# ---------------------------------------------------------------------------

def serialize(tree: DecisionTree, loglik: float | None = None) -> str:
    """Encode a tree as a single JSON line, optionally with its train loglik."""
    nodes = []
    for nid in sorted(tree.nodes):
        nd = tree.nodes[nid]
        if nd.is_leaf:
            rec = {"id": nid, "leaf": list(nd.counts) if nd.counts is not None else None}
        else:
            sp = nd.split
            rule = {"var": sp.variable, "level": sp.level} if sp.is_categorical \
                else {"var": sp.variable, "thr": sp.threshold}
            rec = {"id": nid, "split": rule, "left": nd.left, "right": nd.right}
        nodes.append(rec)
    doc = {"nodes": nodes, "root": tree.root}
    if loglik is not None:
        doc["loglik"] = loglik
    return json.dumps(doc, separators=(",", ":"))


def deserialize(line: str) -> tuple[DecisionTree, float | None]:
    """Decode one serialized tree line; returns (tree, loglik-or-None)."""
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as e:
        raise TreeFormatError(f"invalid JSON at position {e.pos}: {e.msg}") from e
    try:
        nodes = {}
        for i, rec in enumerate(doc["nodes"]):
            nid = rec["id"]
            if "leaf" in rec:
                counts = rec["leaf"]
                nodes[nid] = TreeNode(nid, counts=tuple(counts) if counts is not None else None)
            elif "split" in rec:
                rule = rec["split"]
                if "thr" in rule:
                    sp = SplitRule(rule["var"], threshold=float(rule["thr"]))
                else:
                    sp = SplitRule(rule["var"], level=int(rule["level"]))
                nodes[nid] = TreeNode(nid, split=sp, left=rec["left"], right=rec["right"])
            else:
                raise TreeFormatError(f"node record {i} is neither split nor leaf")
        tree = DecisionTree(nodes, doc["root"])
    except TreeFormatError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise TreeFormatError(f"malformed tree record: {e}") from e
    return tree, doc.get("loglik")
