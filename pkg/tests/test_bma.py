"""Model-averaged prediction, evaluation metrics, ensemble file round-trips."""
import math

import numpy as np
import pytest

from treebma import (
    DecisionTree,
    Ensemble,
    Prediction,
    SplitRule,
    TreeNode,
    evaluate,
    load_ensemble,
    max_loglikelihood,
    predict,
    predict_batch,
    save_ensemble,
)
from treebma.dataset import Dataset, Schema, VariableSpec


def leaf_tree(counts) -> DecisionTree:
    return DecisionTree({0: TreeNode(0, counts=counts)}, 0)


def stump(threshold, left_counts, right_counts) -> DecisionTree:
    return DecisionTree(
        {
            0: TreeNode(0, split=SplitRule(0, threshold=threshold), left=1, right=2),
            1: TreeNode(1, counts=left_counts),
            2: TreeNode(2, counts=right_counts),
        },
        0,
    )


class TestEnsemble:
    def test_needs_trees(self):
        with pytest.raises(ValueError, match="at least one tree"):
            Ensemble(trees=[], logliks=[])

    def test_loglik_count_must_match(self):
        with pytest.raises(ValueError, match="one loglik per tree"):
            Ensemble(trees=[leaf_tree((1, 1))], logliks=[])

    def test_prior_read_from_meta(self):
        ens = Ensemble(trees=[leaf_tree((1, 1))], logliks=[-1.0],
                       meta={"s_max": 9, "config": {"min_leaf": 4, "dirichlet_alpha": 2.0}})
        prior = ens.prior()
        assert (prior.s_max, prior.min_leaf, prior.dirichlet_alpha) == (9, 4, 2.0)


class TestPrediction:
    def test_probabilities_validated(self):
        with pytest.raises(ValueError):
            Prediction((1.2, -0.2))

    def test_tie_breaks_toward_zero(self):
        assert Prediction((0.5, 0.5)).label == 0
        assert Prediction((0.49, 0.51)).label == 1

    def test_entropy_cases(self):
        assert Prediction((1.0, 0.0)).entropy_bits == 0.0
        assert Prediction((0.5, 0.5)).entropy_bits == pytest.approx(1.0, abs=1e-12)


class TestPredict:
    def test_single_leaf_posterior_mean(self):
        # counts (3,1), alpha=1: p = (4/6, 2/6)
        ens = Ensemble(trees=[leaf_tree((3, 1))], logliks=[-1.0])
        p = predict(ens, [0.0])
        assert p.p == pytest.approx((4 / 6, 2 / 6), abs=1e-12)

    def test_two_tree_average_by_hand(self):
        # stump sends x=1 left -> leaf (2,0): p=(3/4, 1/4)
        # leaf tree (1,3): p=(2/6, 4/6); average = (13/24, 11/24)
        ens = Ensemble(
            trees=[stump(1.5, (2, 0), (0, 2)), leaf_tree((1, 3))],
            logliks=[-1.0, -2.0],
        )
        p = predict(ens, [1.0])
        assert p.p == pytest.approx((13 / 24, 11 / 24), abs=1e-12)

    def test_batch_shape_and_rows(self):
        ens = Ensemble(trees=[stump(1.5, (2, 0), (0, 2))], logliks=[-1.0])
        X = np.array([[1.0], [2.0]])
        probs = predict_batch(ens, X)
        assert probs.shape == (2, 2)
        assert probs[0] == pytest.approx((3 / 4, 1 / 4))
        assert probs[1] == pytest.approx((1 / 4, 3 / 4))

    def test_arity_check(self):
        ens = Ensemble(trees=[stump(1.5, (1, 0), (0, 1))], logliks=[-1.0])
        with pytest.raises(ValueError, match="arity"):
            predict_batch(ens, np.zeros((2, 0)))

    def test_requires_2d(self):
        ens = Ensemble(trees=[leaf_tree((1, 1))], logliks=[-1.0])
        with pytest.raises(ValueError, match="2-d"):
            predict_batch(ens, np.zeros(3))


class TestEvaluate:
    @pytest.fixture
    def one_var_data(self):
        schema = Schema((VariableSpec("x0", "continuous"),), "y")
        X = np.array([[1.0], [2.0], [3.0], [4.0]])
        return Dataset(schema, X, np.array([0, 0, 1, 1]))

    def test_metrics_by_hand(self, one_var_data):
        ens = Ensemble(trees=[stump(2.5, (4, 0), (0, 4))], logliks=[-3.5])
        rep = evaluate(ens, one_var_data)
        assert rep.performance_pct == 100.0
        # each point: p = (5/6, 1/6) or (1/6, 5/6); entropy identical per point
        h = -(5 / 6) * math.log2(5 / 6) - (1 / 6) * math.log2(1 / 6)
        assert rep.entropy_bits == pytest.approx(4 * h)
        assert rep.entropy_bits_mean == pytest.approx(h)
        assert rep.max_train_loglik == -3.5
        assert len(rep.per_point) == 4
        assert rep.per_point[0][0] == 0  # true label recorded

    def test_tie_counts_as_class_zero(self, one_var_data):
        ens = Ensemble(trees=[leaf_tree((2, 2))], logliks=[-1.0])
        rep = evaluate(ens, one_var_data)
        assert rep.performance_pct == 50.0  # predicts 0 everywhere

    def test_max_loglikelihood(self):
        ens = Ensemble(trees=[leaf_tree((1, 1)), leaf_tree((2, 2))],
                       logliks=[-5.0, -3.0])
        assert max_loglikelihood(ens) == -3.0


class TestEnsembleIO:
    def test_round_trip(self, tmp_path, small_ensemble):
        ens_path, meta_path = tmp_path / "e.jsonl", tmp_path / "m.json"
        save_ensemble(small_ensemble, ens_path, meta_path)
        back = load_ensemble(ens_path, meta_path)
        assert len(back) == len(small_ensemble)
        assert back.trees == small_ensemble.trees
        assert back.logliks == pytest.approx(small_ensemble.logliks)
        assert back.meta["n"] == small_ensemble.meta["n"]

    def test_missing_loglik_rejected(self, tmp_path):
        p = tmp_path / "e.jsonl"
        p.write_text('{"nodes":[{"id":0,"leaf":[1,1]}],"root":0}\n')
        with pytest.raises(ValueError, match="missing loglik"):
            load_ensemble(p)

    def test_malformed_line_reports_lineno(self, tmp_path):
        p = tmp_path / "e.jsonl"
        good = '{"nodes":[{"id":0,"leaf":[1,1]}],"root":0,"loglik":-1.0}\n'
        p.write_text(good + "{broken\n")
        with pytest.raises(ValueError, match=r"e\.jsonl:2"):
            load_ensemble(p)

    def test_blank_lines_ignored(self, tmp_path):
        p = tmp_path / "e.jsonl"
        p.write_text('{"nodes":[{"id":0,"leaf":[1,1]}],"root":0,"loglik":-1.0}\n\n')
        assert len(load_ensemble(p)) == 1
