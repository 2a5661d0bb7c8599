"""Soft-error injection under the adversarial and probabilistic error models."""
import hashlib
import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, List, Optional, Tuple, Union

import numpy as np

from src.cluster.layout import ClusterError


class ErrorModel(str, Enum):
    NONE = "none"
    ADVERSARIAL = "adversarial"
    PROBABILISTIC = "probabilistic"


class Step(str, Enum):
    O1 = "O1"
    O2 = "O2"
    O3 = "O3"
    C1 = "C1"
    C2 = "C2"
    ENC = "ENC"
    DL = "DL"
    DET = "DET"
    DEC = "DEC"


PRIMARY_STEPS = (Step.O1, Step.O2, Step.O3)
_STEP_INDEX = {step: idx for idx, step in enumerate(Step)}
EVENT_HISTORY = 1000


@dataclass(frozen=True)
class DenseGaussian:
    sigma: float = 1.0

    def sample(self, rng, shape):
        return rng.normal(0.0, self.sigma, size=shape)


@dataclass(frozen=True)
class SparseUniform:
    """Perturbs a share `density` of the entries, with a floor of one entry per fault."""
    density: float = 0.005
    low: float = -5.0
    high: float = 5.0

    def sample(self, rng, shape):
        size = int(np.prod(shape))
        noise = np.zeros(size)
        if size == 0:
            return noise.reshape(shape)
        count = max(1, int(rng.binomial(size, self.density)))
        where = rng.choice(size, size=count, replace=False)
        noise[where] = rng.uniform(self.low, self.high, size=count)
        return noise.reshape(shape)


NoiseGenerator = Union[DenseGaussian, SparseUniform]


@dataclass(frozen=True)
class Injection:
    """One scheduled adversarial fault at node (row, col) of a replica."""
    iteration: int
    layer: int
    step: Step
    row: int
    col: int
    replica: int = 0


@dataclass(frozen=True)
class FaultContext:
    iteration: int
    layer: int
    step: Step
    row: int
    col: int
    replica: int = 0


@dataclass
class FaultSpec:
    model: ErrorModel = ErrorModel.NONE
    p: float = 0.0
    noise: NoiseGenerator = field(default_factory=SparseUniform)
    steps: Tuple[Step, ...] = PRIMARY_STEPS
    schedule: List[Injection] = field(default_factory=list)
    seed: int = 0
    suppress_on_replay: bool = False

    def __post_init__(self):
        self.model = ErrorModel(self.model)
        self.steps = tuple(Step(s) for s in self.steps)
        self.schedule = [
            inj if isinstance(inj, Injection) else Injection(inj[0], inj[1], Step(inj[2]), *inj[3:])
            for inj in self.schedule
        ]
        if not 0.0 <= self.p <= 1.0:
            raise ClusterError(f"fault probability must be in [0, 1], got {self.p}")

    @property
    def verified(self):
        """Verification exchanges run unless faults are adversarial-only."""
        return self.model is not ErrorModel.ADVERSARIAL

    def validate(self, layout=None, layer_count=None, bounded=True):
        """Check scheduled faults fit the grid; `bounded` also caps them at the code's tolerances."""
        if self.model is not ErrorModel.ADVERSARIAL:
            return
        per_site = {}
        for inj in self.schedule:
            if inj.step not in PRIMARY_STEPS:
                raise ClusterError(f"adversarial faults are limited to O1/O2/O3, got {inj.step.value}")
            if layer_count is not None and not 1 <= inj.layer <= layer_count:
                raise ClusterError(f"scheduled layer {inj.layer} outside 1..{layer_count}")
            if layout is not None and not layout.has_node(inj.row, inj.col):
                raise ClusterError(f"no node at ({inj.row}, {inj.col})")
            key = (inj.iteration, inj.layer, inj.step, inj.replica)
            per_site[key] = per_site.get(key, 0) + 1
        if layout is None or not bounded:
            return
        for (iteration, layer, step, _), count in per_site.items():
            bound = layout.step_bound(step.value)
            if count > bound:
                raise ClusterError(
                    f"{count} {step.value} faults at iteration {iteration} layer {layer} exceed the bound {bound}")


def _uniform_from_key(*key):
    digest = hashlib.blake2b(repr(key).encode("ascii"), digest_size=8).digest()
    return int.from_bytes(digest, "little") / 2.0 ** 64


class FaultInjector:
    """Decides, per (iteration, layer, step, node), whether a payload is corrupted.

    Probabilistic draws are keyed by the full context plus the rollback epoch,
    so a replay after rollback faces fresh but reproducible faults. Scheduled
    faults only fire on the first attempt of their iteration.
    """

    def __init__(self, spec=None, history=EVENT_HISTORY):
        self.logger = logging.getLogger(__name__)
        self.spec = spec or FaultSpec()
        self.epoch = 0
        self.iteration = 0
        # most recent faults only; `fault_count` keeps the running total
        self.events: Deque[FaultContext] = deque(maxlen=history)
        self.fault_count = 0
        self._replay = False
        self._schedule = {}
        for inj in self.spec.schedule:
            key = (inj.iteration, inj.layer, inj.step, inj.row, inj.col, inj.replica)
            self._schedule[key] = inj

    def begin_iteration(self, iteration, replay=False):
        self.iteration = iteration
        self._replay = replay

    def advance_epoch(self):
        self.epoch += 1

    def step_enabled(self, step):
        if self.spec.model is ErrorModel.NONE:
            return False
        if self.spec.model is ErrorModel.ADVERSARIAL:
            return step in PRIMARY_STEPS
        return self.spec.p > 0 and step in self.spec.steps

    def fires(self, context: FaultContext):
        spec = self.spec
        if not self.step_enabled(context.step) or (self._replay and spec.suppress_on_replay):
            return False
        if spec.model is ErrorModel.ADVERSARIAL:
            if self._replay:
                return False
            return (context.iteration, context.layer, context.step, context.row,
                    context.col, context.replica) in self._schedule
        u = _uniform_from_key(spec.seed, self.epoch, context.iteration, context.layer,
                              context.step.value, context.row, context.col, context.replica)
        return u < spec.p

    def noise(self, context: FaultContext, shape):
        spec = self.spec
        if spec.model is ErrorModel.ADVERSARIAL:
            # replica is left out so mirrored injections carry identical noise
            key = [spec.seed, context.iteration, context.layer, _STEP_INDEX[context.step],
                   context.row, context.col]
        else:
            key = [spec.seed, self.epoch, context.iteration, context.layer, _STEP_INDEX[context.step],
                   context.row, context.col, context.replica]
        return spec.noise.sample(np.random.default_rng(key), shape)

    def strike(self, context: FaultContext):
        """fires() plus bookkeeping, for faults that corrupt a decision rather than data."""
        if not self.fires(context):
            return False
        self.events.append(context)
        self.fault_count += 1
        self.logger.debug(f"Injected {context.step.value} fault at node ({context.row}, {context.col}) "
                          f"replica {context.replica}, iteration {context.iteration} layer {context.layer}")
        return True

    def maybe_corrupt(self, context: FaultContext, payload) -> Tuple[np.ndarray, bool]:
        if not self.strike(context):
            return payload, False
        return np.asarray(payload, dtype=float) + self.noise(context, np.shape(payload)), True

    def events_for(self, iteration: Optional[int] = None):
        return [e for e in self.events if iteration is None or e.iteration == iteration]
