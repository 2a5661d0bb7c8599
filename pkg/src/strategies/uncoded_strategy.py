"""Plain m x n block-partitioned training with no error detection.

Replication reuses the same per-replica lane and adds output comparison.
"""
import numpy as np

from src.cluster.cluster_sim import SimCluster
from src.cluster.faults import FaultContext, Step
from src.cluster.layout import NodeId
from src.coding.mds_codec import make_mds
from src.dnn.dnn_math import (activation_f, activation_g, block_matvec, block_rank1,
                              block_vecmat, output_delta, squared_error)
from src.strategies.coded_grid import CodedWeightGrid, join_parts, split_vector
from src.strategies.strategy_manager import (AbstractStrategy, StepResult, StrategyConfigError,
                                             StrategyKind)


class GridLane:
    """One copy of the network on an m x n grid (one replica)."""

    def __init__(self, strategy, replica):
        self.strategy = strategy
        self.cluster = strategy.cluster
        self.layout = strategy.layout
        self.replica = replica
        self.grids = []
        self.output = None
        self._x_full = {}

    def nid(self, i, j):
        return NodeId(i, j, self.replica)

    def _ctx(self, layer, step, i, j):
        return FaultContext(self.strategy._iteration, layer, step, i, j, self.replica)

    def setup(self, layers, weights):
        lay = self.layout
        row_code, col_code = make_mds(lay.m, 0), make_mds(lay.n, 0)
        self.grids = []
        for idx, (spec, w) in enumerate(zip(layers, weights), start=1):
            grid = CodedWeightGrid(self.cluster, lay, idx, spec.out_dim, spec.in_dim,
                                   row_code, col_code, replica=self.replica)
            grid.encode(w)
            self.grids.append(grid)

    def distribute_input(self, data):
        data = np.asarray(data, dtype=float).ravel()
        self._x_full = {1: data}
        parts = split_vector(data, self.layout.n, self.grids[0].cols_padded)
        for i, j in self.layout.positions():
            self.cluster.node(self.nid(i, j)).x[1] = parts[j].copy()

    def forward_sums(self, layer):
        """O1 products reduced along each row; returns s^l."""
        grid = self.grids[layer - 1]
        lay, cluster = self.layout, self.cluster
        products = {}
        with cluster.ledger.concurrent():
            for i, j in lay.positions():
                node = cluster.node(self.nid(i, j))
                out, flops = block_matvec(grid.block(i, j), node.x[layer])
                cluster.charge_compute(node.node_id, flops)
                products[node.node_id], _ = cluster.maybe_corrupt(self._ctx(layer, Step.O1, i, j), out)
        parts = []
        with cluster.ledger.concurrent():
            for i in range(lay.m):
                parts.append(cluster.reduce({self.nid(i, j): products[self.nid(i, j)] for j in range(lay.n)}))
        return join_parts(parts, grid.out_dim)

    def forward_redistribute(self, layer, sums):
        spec = self.strategy.layers[layer - 1]
        x_next = activation_f(sums, spec.activation)
        if layer == len(self.grids):
            self.output = x_next
            return
        lay, cluster = self.layout, self.cluster
        self._x_full[layer + 1] = x_next
        parts = split_vector(x_next, lay.n, self.grids[layer].cols_padded)
        with cluster.ledger.concurrent():
            for j in range(lay.n):
                copies = cluster.broadcast(parts[j], [self.nid(i, j) for i in range(lay.m)])
                for nid, vec in copies.items():
                    cluster.node(nid).x[layer + 1], _ = cluster.maybe_corrupt(
                        self._ctx(layer, Step.C1, nid.row, nid.col), vec)

    def seed_output_delta(self, label):
        depth = len(self.grids)
        delta = output_delta(self.output, label, self.strategy.layers[-1].activation)
        parts = split_vector(delta, self.layout.m, self.grids[-1].rows_padded)
        for i, j in self.layout.positions():
            self.cluster.node(self.nid(i, j)).delta[depth], _ = self.cluster.maybe_corrupt(
                self._ctx(depth, Step.DL, i, j), parts[i].copy())

    def backward_sums(self, layer):
        """O2 products reduced along each column; returns c^l."""
        grid = self.grids[layer - 1]
        lay, cluster = self.layout, self.cluster
        products = {}
        with cluster.ledger.concurrent():
            for i, j in lay.positions():
                node = cluster.node(self.nid(i, j))
                out, flops = block_vecmat(node.delta[layer], grid.block(i, j))
                cluster.charge_compute(node.node_id, flops)
                products[node.node_id], _ = cluster.maybe_corrupt(self._ctx(layer, Step.O2, i, j), out)
        parts = []
        with cluster.ledger.concurrent():
            for j in range(lay.n):
                parts.append(cluster.reduce({self.nid(i, j): products[self.nid(i, j)] for i in range(lay.m)}))
        return join_parts(parts, grid.in_dim)

    def backward_redistribute(self, layer, c):
        if layer == 1:
            return
        lay, cluster = self.layout, self.cluster
        layers = self.strategy.layers
        delta_prev = c * activation_g(self._x_full[layer], layers[layer - 2].activation)
        parts = split_vector(delta_prev, lay.m, self.grids[layer - 2].rows_padded)
        with cluster.ledger.concurrent():
            for i in range(lay.m):
                copies = cluster.broadcast(parts[i], [self.nid(i, j) for j in range(lay.n)])
                for nid, vec in copies.items():
                    cluster.node(nid).delta[layer - 1], _ = cluster.maybe_corrupt(
                        self._ctx(layer, Step.C2, nid.row, nid.col), vec)

    def update(self, layer):
        grid = self.grids[layer - 1]
        cluster = self.cluster
        eta = self.strategy.learning_rate
        with cluster.ledger.concurrent():
            for i, j in self.layout.positions():
                node = cluster.node(self.nid(i, j))
                block, flops = block_rank1(grid.block(i, j), eta, node.delta[layer], node.x[layer])
                cluster.charge_compute(node.node_id, flops)
                block, _ = cluster.maybe_corrupt(self._ctx(layer, Step.O3, i, j), block)
                grid.set_block(i, j, block)


class UncodedStrategy(AbstractStrategy):
    kind = StrategyKind.UNCODED
    replicas = 1

    def __init__(self, config):
        super().__init__(config)
        node_ids = [NodeId(i, j, r) for r in range(self.replicas) for i, j in self.layout.positions()]
        self.cluster = SimCluster(node_ids, self.ledger, self.injector)
        self.layers = list(config.layers)
        self.learning_rate = config.learning_rate
        self.lanes = [GridLane(self, r) for r in range(self.replicas)]

    @property
    def node_count(self):
        return self.replicas * self.layout.base_nodes

    def setup(self, state):
        if [(s.out_dim, s.in_dim) for s in state.layers] != [(s.out_dim, s.in_dim) for s in self.layers]:
            raise StrategyConfigError("initial state does not match the configured layers")
        self.layers = list(state.layers)
        self.learning_rate = state.learning_rate
        for lane in self.lanes:
            lane.setup(self.layers, state.weights)
        self.logger.info(f"{self.kind.value} on {self.replicas} x {self.layout.m}x{self.layout.n} grid, "
                         f"{self.node_count} nodes")

    def base_weights(self):
        return [grid.base_matrix() for grid in self.lanes[0].grids]

    def _grids_in_order(self):
        return [grid for lane in self.lanes for grid in lane.grids]

    def _on_lanes(self, action, *args):
        """Run an action on every lane; mirror lanes are not charged."""
        results = [action(self.lanes[0], *args)]
        for lane in self.lanes[1:]:
            with self.ledger.muted():
                results.append(action(lane, *args))
        return results

    def _compare(self, layer, stage, values):
        """Hook for replica comparison; a single lane never disagrees."""
        return None

    def _train_step(self, iteration, data, label):
        result = StepResult()
        depth = len(self.layers)
        self._on_lanes(GridLane.distribute_input, data)

        for layer in range(1, depth + 1):
            with self._layer_charges(layer):
                sums = self._on_lanes(GridLane.forward_sums, layer)
                result.rollback = self._compare(layer, "feedforward", sums)
                if result.rollback:
                    return result
                for lane, s in zip(self.lanes, sums):
                    self._on_lane(lane, lane.forward_redistribute, layer, s)
        result.loss = squared_error(self.lanes[0].output, label)

        self._on_lanes(GridLane.seed_output_delta, label)
        for layer in range(depth, 0, -1):
            with self._layer_charges(layer):
                sums = self._on_lanes(GridLane.backward_sums, layer)
                result.rollback = self._compare(layer, "backprop", sums)
                if result.rollback:
                    return result
                for lane, c in zip(self.lanes, sums):
                    self._on_lane(lane, lane.backward_redistribute, layer, c)
        for layer in range(1, depth + 1):
            with self._layer_charges(layer):
                self._on_lanes(GridLane.update, layer)
            # updated blocks are compared before any checkpoint can capture them
            result.rollback = self._compare(layer, "update",
                                            [lane.grids[layer - 1].base_matrix() for lane in self.lanes])
            if result.rollback:
                return result
        return result

    def _on_lane(self, lane, bound_action, *args):
        if lane.replica == 0:
            return bound_action(*args)
        with self.ledger.muted():
            return bound_action(*args)
