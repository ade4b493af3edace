"""Bayesian model averaging over classification trees sampled by RJ-MCMC."""

__version__ = "0.1.0"

from .dataset import (
    DataValidationError,
    Dataset,
    FoldPlan,
    Schema,
    VariableSpec,
    add_noise,
    drop_variable,
    load_csv,
    make_folds,
    save_csv,
    synth_trauma,
    trauma_schema,
)
from .tree import (
    DecisionTree,
    SplitRule,
    TreeNode,
    TreePrior,
    annotate,
    candidate_rules,
    deserialize,
    leaf_predictive,
    log_marginal_likelihood,
    route,
    serialize,
)
from .bma import (
    Ensemble,
    EvalReport,
    Prediction,
    evaluate,
    load_ensemble,
    max_loglikelihood,
    predict,
    predict_batch,
    save_ensemble,
)
from .sampler import (
    ChainConfig,
    ChainState,
    Proposal,
    chain_diagnostics,
    init_chain,
    mh_step,
    propose,
    run_chain,
)
from .analysis import (
    ComparisonReport,
    SelectionResult,
    filter_ensemble,
    run_comparison,
    variable_importance,
)
