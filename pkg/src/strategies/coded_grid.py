"""Block partition of one layer's weight matrix across a node grid, with parity blocks."""
import logging

import numpy as np

from src.cluster.layout import NodeId
from src.coding.mds_codec import encode_block_vector, recover_message


def padded(length, parts):
    return -(-length // parts) * parts


def split_vector(vector, parts, padded_len):
    """Zero-pad to padded_len and cut into equal parts."""
    vector = np.asarray(vector, dtype=float).ravel()
    out = np.zeros(padded_len)
    out[:vector.size] = vector
    return [p.copy() for p in np.split(out, parts)]


def join_parts(parts, length):
    return np.concatenate(parts)[:length]


class CodedWeightGrid:
    """Weight blocks W_{i,j} of one layer, stored on the cluster's nodes.

    Rows m.. hold row-parity blocks (row code across each column), columns
    n.. hold column-parity blocks (column code across each row). With zero
    tolerances this is the plain m x n partition.
    """

    def __init__(self, cluster, layout, layer, out_dim, in_dim, row_code, col_code, replica=0):
        self.logger = logging.getLogger(__name__)
        self.cluster = cluster
        self.layout = layout
        self.layer = layer
        self.out_dim = out_dim
        self.in_dim = in_dim
        self.row_code = row_code
        self.col_code = col_code
        self.replica = replica
        self.rows_padded = padded(out_dim, layout.m)
        self.cols_padded = padded(in_dim, layout.n)
        self.block_rows = self.rows_padded // layout.m
        self.block_cols = self.cols_padded // layout.n

    def node_id(self, i, j):
        return NodeId(i, j, self.replica)

    def block(self, i, j):
        return self.cluster.node(self.node_id(i, j)).blocks[self.layer]

    def set_block(self, i, j, value):
        self.cluster.node(self.node_id(i, j)).blocks[self.layer] = value

    def _base_blocks(self, weights):
        full = np.zeros((self.rows_padded, self.cols_padded))
        full[:self.out_dim, :self.in_dim] = weights
        br, bc = self.block_rows, self.block_cols
        return {(i, j): full[i * br:(i + 1) * br, j * bc:(j + 1) * bc].copy()
                for i in range(self.layout.m) for j in range(self.layout.n)}

    def _parity_blocks(self, base):
        m, n = self.layout.m, self.layout.n
        a_r, a_c = self.row_code.parity, self.col_code.parity
        parity = {}
        for k in range(a_r.shape[1]):
            for j in range(n):
                parity[(m + k, j)] = sum(a_r[u, k] * base[(u, j)] for u in range(m))
        for k in range(a_c.shape[1]):
            for i in range(m):
                parity[(i, n + k)] = sum(a_c[v, k] * base[(i, v)] for v in range(n))
        return parity

    def encode(self, weights):
        weights = np.asarray(weights, dtype=float)
        base = self._base_blocks(weights)
        for (i, j), b in base.items():
            self.set_block(i, j, b)
        for (i, j), b in self._parity_blocks(base).items():
            self.set_block(i, j, b)
        self.logger.debug(f"Encoded layer {self.layer} as {self.block_rows}x{self.block_cols} blocks")

    def base_matrix(self):
        m, n = self.layout.m, self.layout.n
        full = np.block([[self.block(i, j) for j in range(n)] for i in range(m)])
        return full[:self.out_dim, :self.in_dim].copy()

    def parity_drift(self):
        """Max deviation of stored parity blocks from a fresh encoding, relative to base scale."""
        m, n = self.layout.m, self.layout.n
        base = {(i, j): self.block(i, j) for i in range(m) for j in range(n)}
        scale = 1.0 + max(float(np.max(np.abs(b))) for b in base.values())
        drift = 0.0
        for key, expected in self._parity_blocks(base).items():
            drift = max(drift, float(np.max(np.abs(self.block(*key) - expected))))
        return drift / scale

    def regenerate_rows(self, rows):
        """Rebuild blocks (i, j < n) of flagged rows from the healthy rows of each column."""
        rows = set(rows)
        healthy = [i for i in range(self.layout.total_rows) if i not in rows]
        shape = (self.block_rows, self.block_cols)
        for j in range(self.layout.n):
            stack = np.vstack([self.block(i, j).ravel() for i in range(self.layout.total_rows)])
            word = encode_block_vector(self.row_code, recover_message(self.row_code, stack, healthy))
            for i in rows:
                self.set_block(i, j, word[i].reshape(shape))
        self.logger.info(f"Regenerated rows {sorted(rows)} of layer {self.layer}")

    def regenerate_cols(self, cols):
        """Rebuild blocks (i < m, j) of flagged columns from the healthy columns of each row."""
        cols = set(cols)
        healthy = [j for j in range(self.layout.total_cols) if j not in cols]
        shape = (self.block_rows, self.block_cols)
        for i in range(self.layout.m):
            stack = np.vstack([self.block(i, j).ravel() for j in range(self.layout.total_cols)])
            word = encode_block_vector(self.col_code, recover_message(self.col_code, stack, healthy))
            for j in cols:
                self.set_block(i, j, word[j].reshape(shape))
        self.logger.info(f"Regenerated columns {sorted(cols)} of layer {self.layer}")

    def stored_blocks(self):
        return [self.block(i, j) for i, j in self.layout.positions()]

    def value_count(self):
        return self.layout.node_count * self.block_rows * self.block_cols

    def load_blocks(self, flat):
        size = self.block_rows * self.block_cols
        shape = (self.block_rows, self.block_cols)
        for idx, (i, j) in enumerate(self.layout.positions()):
            self.set_block(i, j, np.array(flat[idx * size:(idx + 1) * size]).reshape(shape))
