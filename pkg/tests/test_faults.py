import numpy as np
import pytest

from src.cluster.faults import (DenseGaussian, ErrorModel, FaultContext, FaultInjector, FaultSpec,
                                Injection, SparseUniform, Step)
from src.cluster.layout import ClusterError, GridLayout


def _ctx(step=Step.O1, iteration=3, layer=1, row=0, col=1, replica=0):
    return FaultContext(iteration, layer, step, row, col, replica)


def test_sparse_noise_hits_at_least_one_entry():
    noise = SparseUniform(density=0.0, low=-5.0, high=5.0)
    sample = noise.sample(np.random.default_rng(0), (4, 5))
    assert sample.shape == (4, 5)
    assert np.count_nonzero(sample) == 1
    assert np.all(np.abs(sample) <= 5.0)


def test_sparse_noise_density():
    sample = SparseUniform(density=0.1).sample(np.random.default_rng(1), (10000,))
    assert 800 < np.count_nonzero(sample) < 1200


def test_dense_noise_shape():
    sample = DenseGaussian(2.0).sample(np.random.default_rng(0), (3,))
    assert sample.shape == (3,) and np.all(sample != 0)


def test_schedule_tuples_are_coerced():
    spec = FaultSpec(model="adversarial", schedule=[(1, 2, "O2", 0, 1)])
    assert spec.schedule == [Injection(1, 2, Step.O2, 0, 1)]
    assert not spec.verified
    assert FaultSpec(model="probabilistic").verified


def test_probability_range():
    with pytest.raises(ClusterError):
        FaultSpec(p=1.5)


def test_no_faults_when_disabled():
    injector = FaultInjector()
    payload = np.ones(3)
    out, hit = injector.maybe_corrupt(_ctx(), payload)
    assert not hit and out is payload


def test_scheduled_fault_fires_once_at_its_site():
    spec = FaultSpec(model="adversarial", schedule=[Injection(3, 1, Step.O1, 0, 1)], noise=DenseGaussian())
    injector = FaultInjector(spec)
    injector.begin_iteration(3)
    out, hit = injector.maybe_corrupt(_ctx(), np.zeros(4))
    assert hit and np.any(out != 0)
    assert not injector.fires(_ctx(col=0))
    assert not injector.fires(_ctx(step=Step.O2))
    assert not injector.fires(_ctx(replica=1))
    assert injector.events_for(3) == [_ctx()]
    injector.begin_iteration(3, replay=True)
    assert not injector.fires(_ctx())


def test_scheduled_noise_ignores_replica():
    spec = FaultSpec(model="adversarial", noise=DenseGaussian(),
                     schedule=[Injection(3, 1, Step.O1, 0, 1, 0), Injection(3, 1, Step.O1, 0, 1, 1)])
    injector = FaultInjector(spec)
    injector.begin_iteration(3)
    a, _ = injector.maybe_corrupt(_ctx(replica=0), np.zeros(4))
    b, _ = injector.maybe_corrupt(_ctx(replica=1), np.zeros(4))
    assert np.array_equal(a, b)


def test_adversarial_model_ignores_extended_steps():
    spec = FaultSpec(model="adversarial", schedule=[])
    injector = FaultInjector(spec)
    assert injector.step_enabled(Step.O3)
    assert not injector.step_enabled(Step.C1)


def test_probabilistic_draws_are_reproducible_and_epoch_keyed():
    spec = FaultSpec(model="probabilistic", p=0.5, seed=9)
    contexts = [_ctx(iteration=i, row=r) for i in range(20) for r in range(3)]
    first = [FaultInjector(spec).fires(c) for c in contexts]
    again = [FaultInjector(spec).fires(c) for c in contexts]
    assert first == again
    assert 0 < sum(first) < len(first)
    later = FaultInjector(spec)
    later.advance_epoch()
    assert [later.fires(c) for c in contexts] != first


def test_probabilistic_rate():
    spec = FaultSpec(model="probabilistic", p=0.2, seed=1)
    injector = FaultInjector(spec)
    hits = sum(injector.fires(_ctx(iteration=i, row=r, col=c))
               for i in range(100) for r in range(5) for c in range(10))
    assert 800 < hits < 1200


def test_steps_filter_and_replay_suppression():
    spec = FaultSpec(model="probabilistic", p=1.0, steps=(Step.C1,), suppress_on_replay=True)
    injector = FaultInjector(spec)
    assert injector.fires(_ctx(step=Step.C1))
    assert not injector.fires(_ctx(step=Step.O1))
    injector.begin_iteration(3, replay=True)
    assert not injector.fires(_ctx(step=Step.C1))


def test_validate_rejects_bad_schedules():
    layout = GridLayout.symmetric(2, 2, 1)
    with pytest.raises(ClusterError):
        FaultSpec(model="adversarial", schedule=[(1, 1, "C1", 0, 0)]).validate(layout, 2)
    with pytest.raises(ClusterError):
        FaultSpec(model="adversarial", schedule=[(1, 3, "O1", 0, 0)]).validate(layout, 2)
    with pytest.raises(ClusterError):
        FaultSpec(model="adversarial", schedule=[(1, 1, "O1", 2, 2)]).validate(layout, 2)
    with pytest.raises(ClusterError):
        FaultSpec(model="adversarial",
                  schedule=[(1, 1, "O1", 0, 0), (1, 1, "O1", 1, 0)]).validate(layout, 2)
    FaultSpec(model="adversarial", schedule=[(1, 1, "O1", 0, 0), (2, 1, "O1", 1, 0)]).validate(layout, 2)


def test_sparse_noise_floor_raises_density_on_small_blocks():
    noise = SparseUniform(density=0.005)
    rng = np.random.default_rng(2)
    counts = [np.count_nonzero(noise.sample(rng, (2, 25))) for _ in range(100)]
    assert min(counts) >= 1
    assert np.mean(counts) / 50 > 0.02


def test_event_history_is_bounded():
    injector = FaultInjector(FaultSpec(model="probabilistic", p=1.0), history=5)
    for i in range(12):
        injector.begin_iteration(i)
        injector.maybe_corrupt(_ctx(iteration=i), np.zeros(3))
    assert injector.fault_count == 12
    assert len(injector.events) == 5
    assert injector.events_for(11) == [_ctx(iteration=11)]
    assert injector.events_for(2) == []
