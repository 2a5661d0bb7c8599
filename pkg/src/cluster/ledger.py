"""(alpha, beta, gamma) cost accounting and the coarse per-iteration clock."""
import logging
import math
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum


class ClockMode(Enum):
    ERROR_FREE = "error_free"
    CORRECT_AND_REGENERATE = "correct_and_regenerate"
    ROLLBACK = "rollback"
    CHECKPOINT = "checkpoint"


@dataclass(frozen=True)
class CostModel:
    alpha: float = 1e-6
    beta: float = 1e-9
    gamma: float = 1e-11
    tau_f: float = 1.0
    tau_b: float = 1000.0
    tau_cpt: float = 1000.0

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("alpha, beta and gamma must be >= 0")
        if not self.tau_b >= self.tau_f > 0 or self.tau_cpt < 0:
            raise ValueError("need tau_b >= tau_f > 0 and tau_cpt >= 0")


@dataclass(frozen=True)
class LedgerSnapshot:
    comm_time: float
    comp_time: float
    checkpoint_time: float
    coarse_time: float

    def delta(self, later):
        return LedgerSnapshot(later.comm_time - self.comm_time,
                              later.comp_time - self.comp_time,
                              later.checkpoint_time - self.checkpoint_time,
                              later.coarse_time - self.coarse_time)


def _log2(size):
    return math.log2(size) if size > 1 else 0.0


def collective_cost(kind, group_size, length, alpha, beta, gamma):
    """(comm, comp) of one collective over `group_size` nodes on vectors of `length`."""
    p = group_size
    if p < 1:
        raise ValueError("collective over an empty group")
    lat = alpha * _log2(p)
    if kind == "reduce":
        return lat + beta * length, gamma * (p - 1) / p * length
    if kind == "all_reduce":
        return lat + 2 * beta * (p - 1) / p * length, gamma * (p - 1) / p * length
    if kind == "broadcast":
        return lat + beta * length, 0.0
    if kind in ("gather", "all_gather"):
        return lat + 2 * beta * (p - 1) * length, 0.0
    raise ValueError(f"unknown collective '{kind}'")


class CostLedger:
    """Accumulates simulated communication, computation and checkpoint time.

    Charges issued inside `concurrent()` model work done in parallel across
    nodes or groups: only the largest comm and the largest comp charge of the
    block are booked.
    """

    def __init__(self, model=None):
        self.logger = logging.getLogger(__name__)
        self.model = model or CostModel()
        self.comm_time = 0.0
        self.comp_time = 0.0
        self.checkpoint_time = 0.0
        self.coarse_time = 0.0
        self.counters = Counter()
        self._pending = None
        self._muted = 0

    @property
    def alpha(self):
        return self.model.alpha

    @property
    def beta(self):
        return self.model.beta

    @property
    def gamma(self):
        return self.model.gamma

    def _book(self, comm, comp):
        if comm < 0 or comp < 0:
            raise ValueError("charges must be nonnegative")
        if self._pending is not None:
            self._pending[0] = max(self._pending[0], comm)
            self._pending[1] = max(self._pending[1], comp)
        else:
            self.comm_time += comm
            self.comp_time += comp

    @contextmanager
    def concurrent(self):
        if self._pending is not None:
            yield
            return
        self._pending = [0.0, 0.0]
        try:
            yield
        finally:
            comm, comp = self._pending
            self._pending = None
            self._book(comm, comp)

    @contextmanager
    def muted(self):
        """Work mirrored in lockstep elsewhere; nothing is booked."""
        self._muted += 1
        try:
            yield
        finally:
            self._muted -= 1

    def charge_collective(self, kind, group_size, length):
        comm, comp = collective_cost(kind, group_size, length, self.alpha, self.beta, self.gamma)
        if self._muted:
            return comm, comp
        self.counters[kind] += 1
        self._book(comm, comp)
        return comm, comp

    def charge_compute(self, flops):
        if self._muted:
            return
        self.counters["compute"] += 1
        self._book(0.0, self.gamma * flops)

    def charge_detection_check(self, total_nodes, t):
        """Exchange of the 2t-long check values among all nodes."""
        if self._muted:
            return
        self.counters["verify_detection"] += 1
        self._book(self.alpha * _log2(total_nodes) + 2 * self.beta * total_nodes * t,
                   self.gamma * total_nodes * t)

    def charge_decode_check(self, total_nodes):
        """Exchange of every node's list of flagged nodes."""
        if self._muted:
            return
        self.counters["verify_decode"] += 1
        self._book(self.alpha * _log2(total_nodes) + self.beta * total_nodes ** 2, 0.0)

    def advance_iteration_clock(self, mode):
        step = {
            ClockMode.ERROR_FREE: self.model.tau_f,
            ClockMode.CORRECT_AND_REGENERATE: self.model.tau_b,
            ClockMode.ROLLBACK: self.model.tau_b,
            ClockMode.CHECKPOINT: self.model.tau_cpt,
        }[mode]
        self.coarse_time += step
        if mode is ClockMode.CHECKPOINT:
            self.checkpoint_time += step
        self.counters[mode.value] += 1
        return step

    def snapshot(self):
        return LedgerSnapshot(self.comm_time, self.comp_time, self.checkpoint_time, self.coarse_time)
