import logging
from abc import ABC, abstractmethod
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from src.checkpoints.checkpoint_manager import Checkpoint, CheckpointError, LayerHeader
from src.cluster.faults import FaultInjector, FaultSpec
from src.cluster.layout import GridLayout, inflate_grid
from src.cluster.ledger import ClockMode, CostLedger, CostModel
from src.dnn.dnn_math import DEFAULT_LEARNING_RATE, LayerSpec


class StrategyKind(str, Enum):
    CODENET = "codenet"
    REPLICATION = "replication"
    UNCODED = "uncoded"


class Outcome(str, Enum):
    CLEAN = "Clean"
    CORRECTED = "Corrected"
    ROLLED_BACK = "RolledBack"


class RollbackCause(str, Enum):
    TOO_MANY_ERRORS = "TooManyErrors"
    DETECTION_DISAGREEMENT = "DetectionDisagreement"
    DECODE_DISAGREEMENT = "DecodeDisagreement"
    REPLICA_MISMATCH = "ReplicaMismatch"


class StrategyConfigError(ValueError):
    """Raised for inconsistent strategy settings."""


@dataclass
class StrategyConfig:
    kind: StrategyKind
    layers: List[LayerSpec]
    m: int = 1
    n: int = 1
    t: int = 0
    checkpoint_period: int = 100
    checkpoint_path: Optional[str] = None
    learning_rate: float = DEFAULT_LEARNING_RATE
    faults: FaultSpec = field(default_factory=FaultSpec)
    cost: CostModel = field(default_factory=CostModel)
    uncoded_equal_nodes: bool = False
    # explicit (t1, t2, t3); overrides the symmetric t
    tolerances: Optional[Tuple[int, int, int]] = None
    row_parity: Optional[np.ndarray] = None
    col_parity: Optional[np.ndarray] = None

    def __post_init__(self):
        self.kind = StrategyKind(self.kind)
        self.validate()

    def validate(self):
        if self.m < 1 or self.n < 1:
            raise StrategyConfigError(f"grid dims must be >= 1, got {self.m}x{self.n}")
        if self.checkpoint_period < 1:
            raise StrategyConfigError(f"checkpoint period must be >= 1, got {self.checkpoint_period}")
        if self.t < 0:
            raise StrategyConfigError(f"t must be >= 0, got {self.t}")
        coded = self.t > 0 or (self.tolerances is not None and any(self.tolerances))
        if coded and self.kind is not StrategyKind.CODENET:
            raise StrategyConfigError("t requires codenet")
        if not self.layers:
            raise StrategyConfigError("at least one layer is required")

    def grid_layout(self):
        if self.kind is StrategyKind.CODENET:
            if self.tolerances is not None:
                return GridLayout(self.m, self.n, *self.tolerances)
            return GridLayout.symmetric(self.m, self.n, self.t)
        if self.kind is StrategyKind.UNCODED and self.uncoded_equal_nodes:
            return GridLayout(*inflate_grid(self.m, self.n, 2 * self.m * self.n))
        return GridLayout(self.m, self.n)


@dataclass(frozen=True)
class Correction:
    stage: str
    layer: int
    locations: Tuple[int, ...]


@dataclass(frozen=True)
class RollbackSignal:
    cause: RollbackCause
    layer: int
    stage: str


@dataclass
class StepResult:
    corrections: List[Correction] = field(default_factory=list)
    rollback: Optional[RollbackSignal] = None
    loss: Optional[float] = None


@dataclass
class IterationReport:
    iteration: int
    outcome: Outcome
    corrections: List[Correction] = field(default_factory=list)
    cause: Optional[RollbackCause] = None
    loss: Optional[float] = None
    coarse_delta: float = 0.0
    comm_delta: float = 0.0
    comp_delta: float = 0.0

    @property
    def label(self):
        if self.outcome is Outcome.ROLLED_BACK:
            return f"{self.outcome.value}({self.cause.value})"
        return self.outcome.value


class AbstractStrategy(ABC):
    kind: StrategyKind

    def __init__(self, config: StrategyConfig):
        self.logger = logging.getLogger(__name__)
        self.config = config
        self.layout = config.grid_layout()
        self.ledger = CostLedger(config.cost)
        self.injector = FaultInjector(config.faults)
        config.faults.validate(self.layout, len(config.layers), bounded=config.kind is StrategyKind.CODENET)
        self.cluster = None
        self.layer_costs = {}
        self._iteration = 0

    @property
    @abstractmethod
    def node_count(self):
        """Total nodes the strategy occupies"""
        pass

    @abstractmethod
    def setup(self, state):
        """Partition (and encode) the initial weights onto the cluster"""
        pass

    @abstractmethod
    def base_weights(self):
        """Current unpadded weight matrices, one per layer"""
        pass

    @abstractmethod
    def _train_step(self, iteration, data, label) -> StepResult:
        """Feedforward, backpropagation and update for one sample"""
        pass

    @abstractmethod
    def _grids_in_order(self):
        """Weight grids in checkpoint order"""
        pass

    @contextmanager
    def _layer_charges(self, layer):
        before = self.ledger.snapshot()
        try:
            yield
        finally:
            delta = before.delta(self.ledger.snapshot())
            costs = self.layer_costs.setdefault(layer, [0.0, 0.0])
            costs[0] += delta.comm_time
            costs[1] += delta.comp_time

    def run_iteration(self, iteration, data, label) -> IterationReport:
        self._iteration = iteration
        self.layer_costs = {}
        before = self.ledger.snapshot()
        result = self._train_step(iteration, data, label)

        if result.rollback is not None:
            outcome, mode = Outcome.ROLLED_BACK, ClockMode.ROLLBACK
            self.logger.info(f"Iteration {iteration} rolls back: {result.rollback.cause.value} "
                             f"at layer {result.rollback.layer} ({result.rollback.stage})")
        elif result.corrections:
            outcome, mode = Outcome.CORRECTED, ClockMode.CORRECT_AND_REGENERATE
            for c in result.corrections:
                self.logger.info(f"Iteration {iteration}: corrected {c.stage} layer {c.layer} at {list(c.locations)}")
        else:
            outcome, mode = Outcome.CLEAN, ClockMode.ERROR_FREE
        self.ledger.advance_iteration_clock(mode)

        delta = before.delta(self.ledger.snapshot())
        return IterationReport(
            iteration=iteration,
            outcome=outcome,
            corrections=list(result.corrections),
            cause=result.rollback.cause if result.rollback else None,
            loss=result.loss,
            coarse_delta=delta.coarse_time,
            comm_delta=delta.comm_time,
            comp_delta=delta.comp_time,
        )

    def _layer_headers(self):
        t = self.layout.row_t
        return [LayerHeader(spec.out_dim, spec.in_dim, self.layout.m, self.layout.n, t)
                for spec in self.config.layers]

    def capture_checkpoint(self, iteration):
        blocks = [b.copy() for grid in self._grids_in_order() for b in grid.stored_blocks()]
        return Checkpoint(self.kind.value, iteration, self._layer_headers(), blocks, self.injector.epoch)

    def restore_checkpoint(self, ckpt: Checkpoint, restore_cursor=True):
        """Load stored blocks; a rollback keeps the live cursor so replays draw fresh faults."""
        if ckpt.kind != self.kind.value:
            raise CheckpointError(f"checkpoint was taken by {ckpt.kind}, not {self.kind.value}")
        if list(ckpt.layers) != self._layer_headers():
            raise CheckpointError("checkpoint layer headers do not match this network and grid")
        flat = ckpt.flat_blocks()
        grids = self._grids_in_order()
        expected = sum(g.value_count() for g in grids)
        if flat.size != expected:
            raise CheckpointError(f"checkpoint holds {flat.size} values, expected {expected}")
        offset = 0
        for grid in grids:
            count = grid.value_count()
            grid.load_blocks(flat[offset:offset + count])
            offset += count
        if restore_cursor:
            self.injector.epoch = ckpt.rng_cursor
        self.logger.debug(f"Restored checkpoint from iteration {ckpt.iteration}")


def get_strategy(config: StrategyConfig, **kwargs):
    """Factory function for the strategy named by the config"""
    if config.kind is StrategyKind.CODENET:
        from .codenet_strategy import CodeNetStrategy
        return CodeNetStrategy(config, **kwargs)
    elif config.kind is StrategyKind.REPLICATION:
        from .replication_strategy import ReplicationStrategy
        return ReplicationStrategy(config)
    else:
        from .uncoded_strategy import UncodedStrategy
        return UncodedStrategy(config)
