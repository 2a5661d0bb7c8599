"""Decentralized MDS-coded training on an (m + 2t) x (n + 2t) grid minus the corner.

Every layer runs three stages:

* feedforward: block products along rows, row sums checked by the row code
  through column-wise syndromes, decode/regenerate on detection, encoded
  x~ pushed to the parity columns, activation redistributed per column;
* backpropagation: the mirror image along columns with the column code,
  encoded delta~ pushed to the parity rows;
* update: each node applies one of the three coded rank-1 rules so parity
  blocks stay consistent without re-encoding.
"""
import numpy as np

from src.cluster.cluster_sim import SimCluster
from src.cluster.faults import FaultContext, Step
from src.cluster.layout import NodeId
from src.coding.mds_codec import BlockVector, decode, make_mds, syndrome_fires
from src.dnn.dnn_math import (activation_f, activation_g, block_matvec, block_rank1,
                              block_vecmat, output_delta, squared_error)
from src.strategies.coded_grid import CodedWeightGrid, join_parts, split_vector
from src.strategies.strategy_manager import (AbstractStrategy, Correction, RollbackCause,
                                             RollbackSignal, StepResult, StrategyConfigError,
                                             StrategyKind)


class CodeNetStrategy(AbstractStrategy):
    kind = StrategyKind.CODENET

    def __init__(self, config, row_code=None, col_code=None):
        super().__init__(config)
        lay = self.layout
        self.row_code = row_code or make_mds(lay.m, lay.row_t, config.row_parity)
        self.col_code = col_code or make_mds(lay.n, lay.col_t, config.col_parity)
        if (self.row_code.k, self.row_code.t) != (lay.m, lay.row_t):
            raise StrategyConfigError("row code does not match the grid")
        if (self.col_code.k, self.col_code.t) != (lay.n, lay.col_t):
            raise StrategyConfigError("column code does not match the grid")
        if lay.row_t == 0 or lay.col_t == 0:
            self.logger.warning(f"CodeNet with tolerances (t1, t2, t3) = ({lay.t1}, {lay.t2}, {lay.t3}) "
                                "cannot correct errors on every stage")
        self.cluster = SimCluster([NodeId(i, j) for i, j in lay.positions()], self.ledger, self.injector)
        self.grids = []
        self.layers = list(config.layers)
        self.learning_rate = config.learning_rate
        # agreed per-layer vectors, used to refresh caches of regenerated nodes
        self._x_parts = {}
        self._x_full = {}
        self._delta_parts = {}
        self._output = None

    @property
    def node_count(self):
        return self.layout.node_count

    def setup(self, state):
        if [(s.out_dim, s.in_dim) for s in state.layers] != [(s.out_dim, s.in_dim) for s in self.layers]:
            raise StrategyConfigError("initial state does not match the configured layers")
        self.layers = list(state.layers)
        self.learning_rate = state.learning_rate
        self.grids = []
        for idx, (spec, weights) in enumerate(zip(self.layers, state.weights), start=1):
            grid = CodedWeightGrid(self.cluster, self.layout, idx, spec.out_dim, spec.in_dim,
                                   self.row_code, self.col_code)
            grid.encode(weights)
            self.grids.append(grid)
        self.logger.info(f"CodeNet on {self.layout.total_rows}x{self.layout.total_cols} grid, "
                         f"{self.node_count} nodes, {len(self.grids)} layers encoded")

    def base_weights(self):
        return [grid.base_matrix() for grid in self.grids]

    def parity_drift(self):
        return max(grid.parity_drift() for grid in self.grids)

    def _grids_in_order(self):
        return self.grids

    def _ctx(self, layer, step, i, j):
        return FaultContext(self._iteration, layer, step, i, j)

    def _train_step(self, iteration, data, label):
        result = StepResult()
        self._distribute_input(data)
        depth = len(self.grids)

        for layer in range(1, depth + 1):
            with self._layer_charges(layer):
                result.rollback = self.feedforward_layer(layer, result.corrections)
            if result.rollback:
                return result
        result.loss = squared_error(self._output, label)

        result.rollback = self._seed_output_delta(label)
        if result.rollback:
            return result
        for layer in range(depth, 0, -1):
            with self._layer_charges(layer):
                result.rollback = self.backprop_layer(layer, result.corrections)
            if result.rollback:
                return result
        for layer in range(1, depth + 1):
            with self._layer_charges(layer):
                self.update_layer(layer)
        return result

    def _distribute_input(self, data):
        grid = self.grids[0]
        data = np.asarray(data, dtype=float).ravel()
        self._x_full = {1: data}
        self._x_parts = {1: split_vector(data, self.layout.n, grid.cols_padded)}
        for i, j in self.layout.feedforward_active():
            self.cluster.node((i, j)).x[1] = self._x_parts[1][j].copy()

    # Detection, verification and decoding shared by both passes

    def _check(self, layer, stage, code, word, check_groups, positions):
        """Run the consistency checks; return (rollback, decoded message, flagged indices)."""
        if code.r == 0:
            return None, word.blocks[:code.k], frozenset()
        verified = self.config.faults.verified
        h = code.parity_check

        syndromes = {}
        with self.ledger.concurrent():
            for group in check_groups:
                contributions = {nid: np.outer(h[:, pos], word[pos]).ravel()
                                 for nid, pos in zip(group, positions)}
                syndromes.update(self.cluster.all_reduce(contributions))
        shape = (code.r, word.block_len)

        views = {}
        for nid, syn in syndromes.items():
            views[nid], _ = self.cluster.maybe_corrupt(self._ctx(layer, Step.DET, nid.row, nid.col), syn)
        if verified:
            self.ledger.charge_detection_check(self.node_count, code.t)
            if len({v.tobytes() for v in views.values()}) > 1:
                return RollbackSignal(RollbackCause.DETECTION_DISAGREEMENT, layer, stage), None, None

        syn = next(iter(views.values())).reshape(shape)
        if not syndrome_fires(code, word, syn):
            return None, word.blocks[:code.k], frozenset()
        self.logger.debug(f"Layer {layer} {stage}: syndrome fires, max |syn| = {np.max(np.abs(syn)):.3g}")

        with self.ledger.concurrent():
            for group in check_groups:
                self.cluster.all_gather({nid: word[pos] for nid, pos in zip(group, positions)})
        outcome = decode(code, word)

        dissent = [nid for group in check_groups for nid in group
                   if self.cluster.strike(self._ctx(layer, Step.DEC, nid.row, nid.col))]
        if verified:
            self.ledger.charge_decode_check(self.node_count)
            if dissent:
                return RollbackSignal(RollbackCause.DECODE_DISAGREEMENT, layer, stage), None, None
        if not outcome.ok:
            return RollbackSignal(RollbackCause.TOO_MANY_ERRORS, layer, stage), None, None
        return None, outcome.message, outcome.error_locations

    # Feedforward

    def feedforward_layer(self, layer, corrections):
        grid = self.grids[layer - 1]
        lay = self.layout
        cluster = self.cluster

        products = {}
        with self.ledger.concurrent():
            for i, j in lay.feedforward_active():
                node = cluster.node((i, j))
                out, flops = block_matvec(grid.block(i, j), node.x[layer])
                cluster.charge_compute(node.node_id, flops)
                products[node.node_id], _ = cluster.maybe_corrupt(self._ctx(layer, Step.O1, i, j), out)

        sums = {}
        with self.ledger.concurrent():
            for i in range(lay.total_rows):
                row = cluster.all_reduce({NodeId(i, j): products[NodeId(i, j)] for j in range(lay.n)})
                sums[i] = row[NodeId(i, 0)]
        word = BlockVector(np.vstack([sums[i] for i in range(lay.total_rows)]))

        columns = [[NodeId(i, j) for i in range(lay.total_rows)] for j in range(lay.n)]
        rollback, message, flagged = self._check(layer, "feedforward", self.row_code, word,
                                                 columns, list(range(lay.total_rows)))
        if rollback:
            return rollback
        if flagged:
            corrections.append(Correction("feedforward", layer, tuple(sorted(flagged))))
            grid.regenerate_rows(flagged)
            for i in flagged:
                for j in range(lay.n):
                    cluster.node((i, j)).x[layer] = self._x_parts[layer][j].copy()

        self._encode_parity_inputs(layer)

        spec = self.layers[layer - 1]
        x_next = activation_f(join_parts(message, spec.out_dim), spec.activation)
        if layer == len(self.grids):
            self._output = x_next
            return None

        nxt = self.grids[layer]
        parts = split_vector(x_next, lay.n, nxt.cols_padded)
        self._x_full[layer + 1] = x_next
        self._x_parts[layer + 1] = parts
        with self.ledger.concurrent():
            for j in range(lay.n):
                copies = cluster.broadcast(parts[j], [NodeId(i, j) for i in range(lay.total_rows)])
                for nid, vec in copies.items():
                    cluster.node(nid).x[layer + 1], _ = cluster.maybe_corrupt(
                        self._ctx(layer, Step.C1, nid.row, nid.col), vec)
        return None

    def _encode_parity_inputs(self, layer):
        """x~_j for the parity columns, one reduce per base row."""
        lay = self.layout
        r = self.col_code.r
        if r == 0:
            return
        a_c = self.col_code.parity
        grid = self.grids[layer - 1]
        with self.ledger.concurrent():
            for i in range(lay.m):
                contributions = {}
                for j in range(lay.total_cols):
                    if j < lay.n:
                        contributions[NodeId(i, j)] = np.outer(a_c[j], self.cluster.node((i, j)).x[layer]).ravel()
                    else:
                        contributions[NodeId(i, j)] = np.zeros(r * grid.block_cols)
                encoded = self.cluster.reduce(contributions).reshape(r, grid.block_cols)
                for k in range(r):
                    j = lay.n + k
                    self.cluster.node((i, j)).x[layer], _ = self.cluster.maybe_corrupt(
                        self._ctx(layer, Step.ENC, i, j), encoded[k])

    # Backpropagation

    def _seed_output_delta(self, label):
        """Every backprop node derives its own copy of delta^L from the shared label."""
        depth = len(self.grids)
        spec = self.layers[-1]
        delta = output_delta(self._output, label, spec.activation)
        parts = split_vector(delta, self.layout.m, self.grids[-1].rows_padded)
        self._delta_parts = {depth: parts}

        copies = {}
        for i, j in self.layout.backprop_active():
            vec, _ = self.cluster.maybe_corrupt(self._ctx(depth, Step.DL, i, j), parts[i].copy())
            self.cluster.node((i, j)).delta[depth] = vec
            copies.setdefault(i, set()).add(vec.tobytes())
        if self.injector.step_enabled(Step.DL) and self.config.faults.verified:
            self.ledger.charge_detection_check(self.node_count, max(1, self.layout.row_t))
            if any(len(v) > 1 for v in copies.values()):
                return RollbackSignal(RollbackCause.DETECTION_DISAGREEMENT, depth, "output_delta")
        return None

    def _parity_input(self, layer, j):
        """x~_j re-derived from the agreed column parts."""
        parts = self._x_parts[layer]
        a_c = self.col_code.parity
        return sum(a_c[v, j - self.layout.n] * parts[v] for v in range(self.layout.n))

    def backprop_layer(self, layer, corrections):
        grid = self.grids[layer - 1]
        lay = self.layout
        cluster = self.cluster

        products = {}
        with self.ledger.concurrent():
            for i, j in lay.backprop_active():
                node = cluster.node((i, j))
                out, flops = block_vecmat(node.delta[layer], grid.block(i, j))
                cluster.charge_compute(node.node_id, flops)
                products[node.node_id], _ = cluster.maybe_corrupt(self._ctx(layer, Step.O2, i, j), out)

        sums = {}
        with self.ledger.concurrent():
            for j in range(lay.total_cols):
                col = cluster.all_reduce({NodeId(i, j): products[NodeId(i, j)] for i in range(lay.m)})
                sums[j] = col[NodeId(0, j)]
        word = BlockVector(np.vstack([sums[j] for j in range(lay.total_cols)]))

        rows = [[NodeId(i, j) for j in range(lay.total_cols)] for i in range(lay.m)]
        rollback, message, flagged = self._check(layer, "backprop", self.col_code, word,
                                                 rows, list(range(lay.total_cols)))
        if rollback:
            return rollback
        if flagged:
            corrections.append(Correction("backprop", layer, tuple(sorted(flagged))))
            grid.regenerate_cols(flagged)
            for j in flagged:
                for i in range(lay.m):
                    node = cluster.node((i, j))
                    node.delta[layer] = self._delta_parts[layer][i].copy()
                    if j < lay.n:
                        node.x[layer] = self._x_parts[layer][j].copy()
                    else:
                        node.x[layer] = self._parity_input(layer, j)

        self._encode_parity_deltas(layer)
        if layer == 1:
            return None

        prev = self.grids[layer - 2]
        c = join_parts(message, self.layers[layer - 1].in_dim)
        delta_prev = c * activation_g(self._x_full[layer], self.layers[layer - 2].activation)
        parts = split_vector(delta_prev, lay.m, prev.rows_padded)
        self._delta_parts[layer - 1] = parts
        with self.ledger.concurrent():
            for i in range(lay.m):
                copies = cluster.broadcast(parts[i], [NodeId(i, j) for j in range(lay.total_cols)])
                for nid, vec in copies.items():
                    cluster.node(nid).delta[layer - 1], _ = cluster.maybe_corrupt(
                        self._ctx(layer, Step.C2, nid.row, nid.col), vec)
        return None

    def _encode_parity_deltas(self, layer):
        """delta~_i for the parity rows, one reduce per base column."""
        lay = self.layout
        r = self.row_code.r
        if r == 0:
            return
        a_r = self.row_code.parity
        grid = self.grids[layer - 1]
        with self.ledger.concurrent():
            for j in range(lay.n):
                contributions = {}
                for i in range(lay.total_rows):
                    if i < lay.m:
                        contributions[NodeId(i, j)] = np.outer(a_r[i], self.cluster.node((i, j)).delta[layer]).ravel()
                    else:
                        contributions[NodeId(i, j)] = np.zeros(r * grid.block_rows)
                encoded = self.cluster.reduce(contributions).reshape(r, grid.block_rows)
                for k in range(r):
                    i = lay.m + k
                    self.cluster.node((i, j)).delta[layer], _ = self.cluster.maybe_corrupt(
                        self._ctx(layer, Step.ENC, i, j), encoded[k])

    # Update

    def update_layer(self, layer):
        """W += eta delta x^T, with x~ on parity columns and delta~ on parity rows."""
        grid = self.grids[layer - 1]
        with self.ledger.concurrent():
            for i, j in self.layout.positions():
                node = self.cluster.node((i, j))
                block, flops = block_rank1(grid.block(i, j), self.learning_rate, node.delta[layer], node.x[layer])
                self.cluster.charge_compute(node.node_id, flops)
                block, _ = self.cluster.maybe_corrupt(self._ctx(layer, Step.O3, i, j), block)
                grid.set_block(i, j, block)
