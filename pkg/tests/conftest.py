import numpy as np
import pytest

from src.cluster.faults import DenseGaussian, ErrorModel, FaultSpec
from src.data.mnist import synthetic_dataset
from src.dnn.dnn_math import DnnState, layer_chain
from src.strategies.strategy_manager import StrategyConfig, get_strategy


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_layers():
    return layer_chain([12, 8, 6, 4])


@pytest.fixture
def small_data():
    train, test = synthetic_dataset(60, features=12, classes=4, seed=7).split(40)
    return train, test


def make_strategy(kind, layers, m=2, n=2, t=0, faults=None, seed=3, init_scale=0.5, **kwargs):
    """Strategy with weights initialized from `seed`; returns (strategy, initial state)."""
    config = StrategyConfig(kind=kind, layers=layers, m=m, n=n, t=t,
                            faults=faults or FaultSpec(), **kwargs)
    strategy = get_strategy(config)
    state = DnnState.initialize(layers, seed=seed, learning_rate=config.learning_rate, init_scale=init_scale)
    strategy.setup(state)
    return strategy, state


def scheduled(*injections, seed=0):
    return FaultSpec(model=ErrorModel.ADVERSARIAL, noise=DenseGaussian(1.0),
                     schedule=list(injections), seed=seed)
