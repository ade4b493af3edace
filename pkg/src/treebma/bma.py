"""Model averaging over a sampled tree ensemble: prediction and evaluation.

Predictions are the unweighted mean over trees of each tree's leaf predictive
probabilities; sampled trees are posterior draws, so equal weights are the
Monte Carlo estimate of the predictive distribution. Probability pairs are
indexed by label value: p[0] is the probability of class 0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .tree import DecisionTree, TreePrior, deserialize, leaf_rows, leaf_predictive, serialize

__all__ = [
    "Ensemble",
    "Prediction",
    "EvalReport",
    "predict",
    "predict_batch",
    "evaluate",
    "max_loglikelihood",
    "save_ensemble",
    "load_ensemble",
]


@dataclass(frozen=True)
class Ensemble:
    """Ordered post-burn-in trees with their training log marginal likelihoods."""

    trees: list[DecisionTree]
    logliks: list[float]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.trees) < 1:
            raise ValueError("ensemble needs at least one tree")
        if len(self.logliks) != len(self.trees):
            raise ValueError("one loglik per tree required")

    def __len__(self) -> int:
        return len(self.trees)

    def prior(self) -> TreePrior:
        cfg = self.meta.get("config", {})
        return TreePrior(
            s_max=self.meta.get("s_max", 1),
            min_leaf=cfg.get("min_leaf", 3),
            dirichlet_alpha=cfg.get("dirichlet_alpha", 1.0),
        )


@dataclass(frozen=True)
class Prediction:
    """Class-probability pair, indexed by label value."""

    p: tuple[float, float]

    def __post_init__(self):
        p0, p1 = self.p
        if not (0.0 <= p0 <= 1.0 and 0.0 <= p1 <= 1.0):
            raise ValueError("probabilities must lie in [0,1]")

    @property
    def label(self) -> int:
        # tie at exactly 0.5 breaks toward label 0 (the majority class)
        return 1 if self.p[1] > self.p[0] else 0

    @property
    def entropy_bits(self) -> float:
        return float(_entropy_bits(np.asarray(self.p)))


def _entropy_bits(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=-1)


def predict_batch(ensemble: Ensemble, X: np.ndarray) -> np.ndarray:
    """Averaged class probabilities for each row of X; shape (n, 2)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-d")
    prior = ensemble.prior()
    arity = max((v for t in ensemble.trees for v in t.variables_used()), default=-1)
    if arity >= X.shape[1]:
        raise ValueError(f"feature arity {X.shape[1]} too small for ensemble splits")
    acc = np.zeros((X.shape[0], 2))
    for tree in ensemble.trees:
        for nid, idx in leaf_rows(tree, X).items():
            acc[idx] += leaf_predictive(tree.nodes[nid].counts, prior)
    return acc / len(ensemble)


def predict(ensemble: Ensemble, x) -> Prediction:
    """Averaged predictive distribution for a single feature vector."""
    p = predict_batch(ensemble, np.asarray(x, dtype=np.float64)[None, :])[0]
    return Prediction((float(p[0]), float(p[1])))


@dataclass(frozen=True)
class EvalReport:
    """Held-out metrics of one ensemble on one test set.

    ``performance_pct`` is the accuracy of the argmax rule (ties toward label
    0); ``entropy_bits`` is the Shannon entropy of the averaged predictive
    distribution summed over test rows (``entropy_bits_mean`` is the per-row
    mean); ``max_train_loglik`` is the best single sampled tree's training
    marginal likelihood.
    """

    performance_pct: float
    entropy_bits: float
    entropy_bits_mean: float
    max_train_loglik: float
    per_point: list[tuple[int, Prediction]]

    def __post_init__(self):
        if not 0.0 <= self.performance_pct <= 100.0:
            raise ValueError("performance_pct out of range")
        if self.entropy_bits < 0:
            raise ValueError("entropy must be nonnegative")


def evaluate(ensemble: Ensemble, test: Dataset) -> EvalReport:
    """Score an ensemble on a held-out dataset."""
    if test.n < 1:
        raise ValueError("test set is empty")
    probs = predict_batch(ensemble, test.X)
    pred_labels = (probs[:, 1] > probs[:, 0]).astype(np.int64)
    correct = float((pred_labels == test.y).mean())
    ent = _entropy_bits(probs)
    per_point = [
        (int(test.y[i]), Prediction((float(probs[i, 0]), float(probs[i, 1]))))
        for i in range(test.n)
    ]
    return EvalReport(
        performance_pct=100.0 * correct,
        entropy_bits=float(ent.sum()),
        entropy_bits_mean=float(ent.mean()),
        max_train_loglik=max_loglikelihood(ensemble),
        per_point=per_point,
    )


def max_loglikelihood(ensemble: Ensemble) -> float:
    """Best training log marginal likelihood over the sampled trees."""
    return float(max(ensemble.logliks))


# ---------------------------------------------------------------------------
# Ensemble file I/O: one JSON tree record per line, metadata in a sidecar
# ---------------------------------------------------------------------------

def save_ensemble(ensemble: Ensemble, path, meta_path=None) -> None:
    """Write trees as JSON lines; chain metadata goes to the sidecar file."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for tree, ll in zip(ensemble.trees, ensemble.logliks):
            fh.write(serialize(tree, loglik=ll) + "\n")
    if meta_path is not None:
        Path(meta_path).write_text(
            json.dumps(ensemble.meta, indent=2, sort_keys=True), encoding="utf-8"
        )


def load_ensemble(path, meta_path=None) -> Ensemble:
    """Read an ensemble file (and optionally its metadata sidecar)."""
    trees, logliks = [], []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                tree, ll = deserialize(line)
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: {e}") from e
            if ll is None:
                raise ValueError(f"{path}:{lineno}: tree record missing loglik")
            trees.append(tree)
            logliks.append(ll)
    meta = {}
    if meta_path is not None and Path(meta_path).exists():
        meta = json.loads(Path(meta_path).read_text(encoding="utf-8"))
    return Ensemble(trees=trees, logliks=logliks, meta=meta)
