"""Shared fixtures: small handmade datasets and a quick sampled ensemble."""
import numpy as np
import pytest

from treebma import ChainConfig, run_chain, synth_trauma
from treebma.dataset import Dataset, Schema, VariableSpec


@pytest.fixture(scope="session")
def tiny_schema() -> Schema:
    return Schema(
        (
            VariableSpec("x0", "continuous"),
            VariableSpec("x1", "categorical", (0, 1, 2)),
        ),
        "y",
    )


@pytest.fixture(scope="session")
def tiny_data(tiny_schema) -> Dataset:
    # 8 rows, label correlates with x0 <= 2.5
    X = np.array(
        [
            [1.0, 0],
            [2.0, 1],
            [2.5, 2],
            [1.5, 0],
            [3.0, 1],
            [4.0, 2],
            [3.5, 0],
            [5.0, 1],
        ]
    )
    y = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    return Dataset(tiny_schema, X, y, provenance="tiny")


@pytest.fixture(scope="session")
def small_data() -> Dataset:
    return synth_trauma(120, 5, frozenset({8}))


@pytest.fixture(scope="session")
def small_ensemble(small_data):
    cfg = ChainConfig(
        burn_in_steps=2000, collect_count=200, thin=1, min_leaf=8, s_max=10, seed=17
    )
    return run_chain(small_data, cfg)
