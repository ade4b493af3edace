"""Posterior variable importance, ensemble filtering, and experiment arms.

Importance is the proportion of split nodes across the sampled ensemble that
test each variable. Filtering drops every sampled tree that splits on a
designated weak variable, so the kept ensemble never consults it.
``run_comparison`` runs the four experiment arms (full variable set, dropped
variable, filtered ensemble, dropped + noise) per cross-validation fold under
one shared fold plan.
"""
from __future__ import annotations

from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .bma import Ensemble, EvalReport, evaluate
from .dataset import Dataset, FoldPlan, add_noise, drop_variable, make_folds
from .sampler import ChainConfig, run_chain

__all__ = [
    "SelectionResult",
    "ComparisonReport",
    "ARMS",
    "variable_importance",
    "filter_ensemble",
    "run_comparison",
    "derive_seed",
]

ARMS = ("all_vars", "dropped", "filtered", "dropped_noise")


def variable_importance(ensemble: Ensemble, m: int | None = None,
                        per_tree: bool = False) -> np.ndarray:
    """Posterior usage probability per variable.

    Default: split-node proportions (counts of split nodes testing variable j,
    normalized by total split nodes; entries sum to 1). With ``per_tree=True``,
    the fraction of trees containing at least one split on the variable
    (entries then need not sum to 1).
    """
    used = [t.variables_used() for t in ensemble.trees]
    if m is None:
        flat = [v for vs in used for v in vs]
        if not flat:
            raise ValueError("cannot infer arity from an ensemble of single leaves")
        m = max(flat) + 1
    imp = np.zeros(m)
    if per_tree:
        for vs in used:
            for v in set(vs):
                imp[v] += 1
        return imp / len(ensemble)
    total = 0
    for vs in used:
        total += len(vs)
        for v in vs:
            imp[v] += 1
    if total == 0:
        raise ValueError("importance undefined: no split nodes in the ensemble")
    return imp / total


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of excluding trees that use one variable."""

    kept: Ensemble
    omitted_count: int
    excluded_variable: int


def filter_ensemble(ensemble: Ensemble, variable: int) -> SelectionResult:
    """Keep only trees with zero splits on ``variable``, preserving order."""
    keep_idx = [i for i, t in enumerate(ensemble.trees)
                if variable not in t.variables_used()]
    omitted = len(ensemble) - len(keep_idx)
    if not keep_idx:
        raise ValueError(f"every tree splits on variable {variable}; nothing kept")
    kept = Ensemble(
        trees=[ensemble.trees[i] for i in keep_idx],
        logliks=[ensemble.logliks[i] for i in keep_idx],
        meta={**ensemble.meta, "filtered_variable": variable, "omitted": omitted},
    )
    return SelectionResult(kept=kept, omitted_count=omitted, excluded_variable=variable)


def derive_seed(master_seed: int, fold: int, arm: int) -> int:
    """Per-(fold, arm) chain seed from the master seed, via a seed sequence."""
    return int(np.random.SeedSequence([master_seed, fold, arm]).generate_state(1)[0])


@dataclass(frozen=True)
class ComparisonReport:
    """Per-arm, per-fold evaluation reports plus shared experiment metadata."""

    folds: FoldPlan
    weakest: int
    noise_intensity: float
    reports: dict[str, list[EvalReport]]
    omitted_counts: list[int]
    importance: np.ndarray

    def arm_summary(self, arm: str) -> tuple[float, float, float, float]:
        """(performance mean, performance std, entropy mean, entropy std) over folds."""
        perf = np.array([r.performance_pct for r in self.reports[arm]])
        ent = np.array([r.entropy_bits for r in self.reports[arm]])
        sd = (lambda a: float(a.std(ddof=1)) if a.size > 1 else 0.0)
        return float(perf.mean()), sd(perf), float(ent.mean()), sd(ent)

    def deltas(self, arm: str, baseline: str = "all_vars") -> dict[str, tuple[float, float]]:
        """Paired per-fold differences (arm - baseline), mean and std."""
        dp = np.array([a.performance_pct - b.performance_pct
                       for a, b in zip(self.reports[arm], self.reports[baseline])])
        de = np.array([a.entropy_bits - b.entropy_bits
                       for a, b in zip(self.reports[arm], self.reports[baseline])])
        sd = (lambda a: float(a.std(ddof=1)) if a.size > 1 else 0.0)
        return {"performance_pct": (float(dp.mean()), sd(dp)),
                "entropy_bits": (float(de.mean()), sd(de))}


def run_comparison(data: Dataset, config: ChainConfig, weakest: int | None = None,
                   noise_intensity: float = 0.01, k: int = 5) -> ComparisonReport:
    """Run the four experiment arms per fold under one shared fold plan.

    Arms: (a) all variables; (b) drop the weakest variable; (c) train on all
    variables, then filter out trees that use the weakest; (d) drop the weakest
    and add range-scaled uniform noise to the remaining columns. Noise is added
    to the full dataset before the train/test split; that choice is recorded in
    the report metadata. When ``weakest`` is None it defaults to the argmin of
    arm (a)'s pooled variable importance.
    """
    folds = make_folds(data, k, seed=config.seed)
    noised = add_noise(data, noise_intensity, seed=derive_seed(config.seed, 0, 99))

    # arm (a) ensembles are needed first: they define the default weakest
    # variable and are reused by arm (c)
    arm_a_ensembles = []
    for f in range(k):
        train, _ = folds.train_test(data, f)
        cfg = dc_replace(config, seed=derive_seed(config.seed, f, 0))
        arm_a_ensembles.append(run_chain(train, cfg))

    if weakest is None:
        pooled = np.zeros(data.m)
        for ens in arm_a_ensembles:
            pooled += variable_importance(ens, m=data.m)
        pooled /= k
        weakest = int(np.argmin(pooled))
    importance = np.zeros(data.m)
    for ens in arm_a_ensembles:
        importance += variable_importance(ens, m=data.m)
    importance /= k

    dropped = drop_variable(data, weakest)
    dropped_noise = drop_variable(noised, weakest)

    reports: dict[str, list[EvalReport]] = {arm: [] for arm in ARMS}
    omitted_counts = []
    for f in range(k):
        _, test_a = folds.train_test(data, f)
        reports["all_vars"].append(evaluate(arm_a_ensembles[f], test_a))

        sel = filter_ensemble(arm_a_ensembles[f], weakest)
        omitted_counts.append(sel.omitted_count)
        reports["filtered"].append(evaluate(sel.kept, test_a))

        train_b, test_b = folds.train_test(dropped, f)
        cfg_b = dc_replace(config, seed=derive_seed(config.seed, f, 1))
        reports["dropped"].append(evaluate(run_chain(train_b, cfg_b), test_b))

        train_d, test_d = folds.train_test(dropped_noise, f)
        cfg_d = dc_replace(config, seed=derive_seed(config.seed, f, 3))
        reports["dropped_noise"].append(evaluate(run_chain(train_d, cfg_d), test_d))

    return ComparisonReport(
        folds=folds,
        weakest=weakest,
        noise_intensity=noise_intensity,
        reports=reports,
        omitted_counts=omitted_counts,
        importance=importance,
    )
