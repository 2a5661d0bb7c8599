import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, List, Optional

from src.checkpoints.checkpoint_manager import CheckpointManager
from src.cluster.ledger import ClockMode
from src.dnn.dnn_math import accuracy
from src.strategies.strategy_manager import IterationReport, Outcome

logger = logging.getLogger(__name__)

ROLLBACK_STORM = 10


@dataclass
class MetricsRow:
    iter: int
    outcome: str
    loss: Optional[float]
    accuracy: Optional[float]
    coarse_time: float
    comm_time: float
    comp_time: float
    rollbacks: int


@dataclass
class TrainingSummary:
    reports: List[IterationReport] = field(default_factory=list)
    executed: int = 0
    completed: bool = True
    outcomes: Counter = field(default_factory=Counter)
    rollback_causes: Counter = field(default_factory=Counter)
    final_loss: Optional[float] = None
    final_accuracy: Optional[float] = None
    coarse_time: float = 0.0
    comm_time: float = 0.0
    comp_time: float = 0.0
    checkpoint_time: float = 0.0
    checkpoints: int = 0


def _evaluate(strategy, eval_set, eval_samples):
    images, labels = eval_set.images, eval_set.labels
    if eval_samples:
        images, labels = images[:eval_samples], labels[:eval_samples]
    return accuracy(strategy.base_weights(), strategy.layers, images, labels)


def run_training(strategy, dataset, iterations, checkpoint_period=None, checkpoints=None,
                 eval_set=None, eval_every=0, eval_samples=None, resume_from=None,
                 on_row: Optional[Callable[[MetricsRow], None]] = None, max_steps=None):
    """Serial SGD loop with periodic checkpoints and rollback on unrecoverable iterations.

    Iteration k trains on sample k mod len(dataset). A checkpoint is taken
    whenever k is a multiple of the period, except right after returning to
    that same checkpoint. Rolled-back iterations replay from the checkpoint
    with a fresh fault cursor.
    """
    if len(dataset) == 0:
        raise ValueError("training needs a nonempty dataset")
    period = checkpoint_period or strategy.config.checkpoint_period
    checkpoints = checkpoints or CheckpointManager()
    ledger, injector = strategy.ledger, strategy.injector
    summary = TrainingSummary()

    iteration = 0
    just_restored = False
    if resume_from is not None:
        strategy.restore_checkpoint(resume_from)
        checkpoints.latest = resume_from
        iteration = resume_from.iteration
        just_restored = True
        logger.info(f"Resuming at iteration {iteration}")
    high_water = iteration - 1
    consecutive = 0
    rollbacks = 0

    logger.info(f"Training {strategy.kind.value} for {iterations} iterations, checkpoint period {period}")
    while iteration < iterations:
        if max_steps is not None and summary.executed >= max_steps:
            logger.warning(f"Stopping after {summary.executed} steps at iteration {iteration}")
            summary.completed = False
            break
        if iteration % period == 0 and not just_restored:
            checkpoints.save(strategy.capture_checkpoint(iteration))
            ledger.advance_iteration_clock(ClockMode.CHECKPOINT)
            summary.checkpoints += 1
        just_restored = False

        injector.begin_iteration(iteration, replay=iteration <= high_water)
        high_water = max(high_water, iteration)
        images, labels = dataset.sample(iteration)
        report = strategy.run_iteration(iteration, images, labels)
        summary.executed += 1
        summary.reports.append(report)
        summary.outcomes[report.outcome.value] += 1
        if report.loss is not None:
            summary.final_loss = report.loss

        if report.outcome is Outcome.ROLLED_BACK:
            rollbacks += 1
            consecutive += 1
            summary.rollback_causes[report.cause.value] += 1
            if consecutive == ROLLBACK_STORM:
                logger.warning(f"{consecutive} consecutive rollbacks at iteration {iteration}")
            ckpt = checkpoints.latest
            strategy.restore_checkpoint(ckpt, restore_cursor=False)
            injector.advance_epoch()
            iteration = ckpt.iteration
            just_restored = True
        else:
            consecutive = 0
            iteration += 1

        acc = None
        if eval_set is not None and eval_every and summary.executed % eval_every == 0:
            acc = _evaluate(strategy, eval_set, eval_samples)
            logger.info(f"Step {summary.executed} (iteration {iteration}): accuracy {acc:.4f}")
        if on_row is not None:
            on_row(MetricsRow(summary.executed, report.label, report.loss, acc, ledger.coarse_time,
                              ledger.comm_time, ledger.comp_time, rollbacks))

    if eval_set is not None:
        summary.final_accuracy = _evaluate(strategy, eval_set, eval_samples)
    summary.coarse_time = ledger.coarse_time
    summary.comm_time = ledger.comm_time
    summary.comp_time = ledger.comp_time
    summary.checkpoint_time = ledger.checkpoint_time
    logger.info(f"Finished after {summary.executed} steps: {dict(summary.outcomes)}, "
                f"{injector.fault_count} faults injected, coarse time {summary.coarse_time:.6g}")
    return summary
