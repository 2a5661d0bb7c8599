"""Desk-scale end-to-end runs; deselected by default, run with `pytest -m slow`.

The comparative runs train on MNIST when CODENET_MNIST_DIR holds the IDX
training files, and otherwise on overlapping synthetic classes with label
noise, where persistent weight corruption costs accuracy.
"""
import os

import numpy as np
import pytest

from src.cluster.faults import ErrorModel, FaultSpec, SparseUniform
from src.data.mnist import find_mnist, load_mnist, synthetic_dataset
from src.dnn.dnn_math import accuracy, layer_chain, oracle_step
from src.strategies.strategy_manager import StrategyKind
from src.strategies.trainer import run_training
from tests.conftest import make_strategy

pytestmark = pytest.mark.slow

DESK = [784, 100, 100, 10]
ITERATIONS = 2000
SEEDS = range(5)
PERIODS = (10, 20, 30, 200)
LEARNING_RATE = 0.5


@pytest.fixture(scope="module")
def desk_data():
    return synthetic_dataset(2500, features=784, classes=10, seed=21).split(2000)


@pytest.fixture(scope="module")
def comparative_data():
    paths = find_mnist(os.environ.get("CODENET_MNIST_DIR"))
    if paths is not None:
        return load_mnist(*paths, limit=2500).split(2000)
    return synthetic_dataset(2500, features=784, classes=10, seed=21, spread=0.3, separation=0.3,
                             label_noise=0.05).split(2000)


@pytest.mark.parametrize("kind,t", [(StrategyKind.CODENET, 1), (StrategyKind.REPLICATION, 0),
                                    (StrategyKind.UNCODED, 0)])
def test_fault_free_trajectory_matches_oracle(kind, t, desk_data):
    train, _ = desk_data
    strategy, state = make_strategy(kind, layer_chain(DESK), m=5, n=4, t=t)
    for k in range(200):
        strategy.injector.begin_iteration(k)
        strategy.run_iteration(k, *train.sample(k))
        state, _ = oracle_step(state, *train.sample(k))
        worst = max(float(np.max(np.abs(a - b))) for a, b in zip(strategy.base_weights(), state.weights))
        assert worst < 1e-10, f"iteration {k}: {worst}"


def _faults(seed):
    return FaultSpec(model=ErrorModel.PROBABILISTIC, p=3e-4, noise=SparseUniform(0.005, -5.0, 5.0), seed=seed)


def _desk_strategy(kind, t, seed, faults=None):
    return make_strategy(kind, layer_chain(DESK), m=5, n=4, t=t, faults=faults, seed=seed,
                         init_scale=None, learning_rate=LEARNING_RATE)


def _best_run(kind, t, train, seed):
    """(coarse time, strategy) of the fastest checkpoint period."""
    best = None
    for period in PERIODS:
        strategy, _ = _desk_strategy(kind, t, seed, _faults(seed))
        summary = run_training(strategy, train, ITERATIONS, checkpoint_period=period)
        assert summary.completed
        if best is None or summary.coarse_time < best[0]:
            best = (summary.coarse_time, strategy)
    return best


def _uncoded_accuracy(train, test, seed):
    strategy, _ = _desk_strategy(StrategyKind.UNCODED, 0, seed, _faults(seed))
    run_training(strategy, train, ITERATIONS, checkpoint_period=ITERATIONS)
    return accuracy(strategy.base_weights(), strategy.layers, test.images, test.labels)


def _oracle_accuracy(train, test, seed):
    _, state = _desk_strategy(StrategyKind.UNCODED, 0, seed)
    for k in range(ITERATIONS):
        state, _ = oracle_step(state, *train.sample(k))
    return accuracy(state.weights, state.layers, test.images, test.labels)


def test_codenet_beats_replication_and_uncoded(comparative_data):
    train, test = comparative_data
    faster, uncoded_behind = 0, 0
    for seed in SEEDS:
        codenet_time, codenet = _best_run(StrategyKind.CODENET, 1, train, seed)
        replication_time, _ = _best_run(StrategyKind.REPLICATION, 0, train, seed)
        faster += codenet_time < replication_time

        reference = _oracle_accuracy(train, test, seed)
        achieved = accuracy(codenet.base_weights(), codenet.layers, test.images, test.labels)
        assert abs(achieved - reference) <= 0.01, f"seed {seed}: {achieved} vs fault-free {reference}"

        uncoded = _uncoded_accuracy(train, test, seed)
        uncoded_behind += achieved - uncoded >= 0.10
    assert faster >= 4
    assert uncoded_behind >= 4
