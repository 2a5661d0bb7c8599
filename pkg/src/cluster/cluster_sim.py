"""Logical cluster: per-node state, collectives with ledger charges, fault hooks."""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Set

import numpy as np

from src.cluster.faults import FaultContext, FaultInjector
from src.cluster.layout import ClusterError, NodeId
from src.cluster.ledger import CostLedger


@dataclass
class NodeState:
    node_id: NodeId
    blocks: Dict[int, np.ndarray] = field(default_factory=dict)
    x: Dict[int, np.ndarray] = field(default_factory=dict)
    delta: Dict[int, np.ndarray] = field(default_factory=dict)
    # diagnostics for tests; strategies never read it
    corrupted: Set[tuple] = field(default_factory=set)


def _fixed_order(vectors: Mapping[NodeId, np.ndarray]):
    if not vectors:
        raise ClusterError("collective over an empty group")
    keys = sorted(vectors)
    arrays = [np.asarray(vectors[k], dtype=float) for k in keys]
    length = arrays[0].size
    if any(a.size != length for a in arrays):
        raise ClusterError("collective members hold vectors of different lengths")
    return keys, arrays, length


class SimCluster:
    """Single-threaded stand-in for a grid of compute nodes.

    Collectives sum contributions in sorted node order so results never depend
    on the order callers hand them in.
    """

    def __init__(self, node_ids: Iterable[NodeId], ledger=None, injector=None):
        self.logger = logging.getLogger(__name__)
        self.ledger = ledger or CostLedger()
        self.injector = injector or FaultInjector()
        self.nodes = {NodeId(*nid): NodeState(NodeId(*nid)) for nid in node_ids}
        self.logger.debug(f"Cluster of {len(self.nodes)} nodes")

    @property
    def size(self):
        return len(self.nodes)

    def node(self, node_id):
        try:
            return self.nodes[NodeId(*node_id)]
        except KeyError:
            raise ClusterError(f"no node {tuple(node_id)}") from None

    def reduce(self, vectors: Mapping[NodeId, np.ndarray]):
        keys, arrays, length = _fixed_order(vectors)
        total = np.zeros_like(arrays[0])
        for a in arrays:
            total = total + a
        self.ledger.charge_collective("reduce", len(keys), length)
        return total

    def all_reduce(self, vectors: Mapping[NodeId, np.ndarray]):
        keys, arrays, length = _fixed_order(vectors)
        total = np.zeros_like(arrays[0])
        for a in arrays:
            total = total + a
        self.ledger.charge_collective("all_reduce", len(keys), length)
        return {k: total.copy() for k in keys}

    def broadcast(self, vector, members: Iterable[NodeId]):
        members = sorted(members)
        if not members:
            raise ClusterError("broadcast to an empty group")
        vector = np.asarray(vector, dtype=float)
        self.ledger.charge_collective("broadcast", len(members), vector.size)
        return {k: vector.copy() for k in members}

    def gather(self, vectors: Mapping[NodeId, np.ndarray]):
        keys, arrays, length = _fixed_order(vectors)
        self.ledger.charge_collective("gather", len(keys), length)
        return dict(zip(keys, arrays))

    def all_gather(self, vectors: Mapping[NodeId, np.ndarray]):
        keys, arrays, length = _fixed_order(vectors)
        self.ledger.charge_collective("all_gather", len(keys), length)
        return dict(zip(keys, arrays))

    def charge_compute(self, node_id, flops):
        self.ledger.charge_compute(flops)

    def _mark(self, context):
        nid = NodeId(context.row, context.col, context.replica)
        if nid in self.nodes:
            self.nodes[nid].corrupted.add((context.iteration, context.layer, context.step.value))

    def maybe_corrupt(self, context: FaultContext, payload):
        out, hit = self.injector.maybe_corrupt(context, payload)
        if hit:
            self._mark(context)
        return out, hit

    def strike(self, context: FaultContext):
        hit = self.injector.strike(context)
        if hit:
            self._mark(context)
        return hit

    def advance_iteration_clock(self, mode):
        return self.ledger.advance_iteration_clock(mode)
