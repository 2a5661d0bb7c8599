import logging
from dataclasses import dataclass
from typing import NamedTuple


class ClusterError(ValueError):
    """Raised for invalid grid layouts, groups or fault specifications."""


class NodeId(NamedTuple):
    row: int
    col: int
    replica: int = 0


@dataclass(frozen=True)
class GridLayout:
    """An m x n base grid plus parity rows and columns, minus the corner.

    t1, t2, t3 bound the erroneous nodes per layer in O1, O2 and O3. The row
    code corrects t1 + t3 errors after O1, the column code t2 + t3 after O2.
    """
    m: int
    n: int
    t1: int = 0
    t2: int = 0
    t3: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ClusterError(f"grid dims must be >= 1, got {self.m}x{self.n}")
        if min(self.t1, self.t2, self.t3) < 0:
            raise ClusterError("tolerances must be >= 0")
        expected = self.m * self.n + 2 * self.n * (self.t1 + self.t3) + 2 * self.m * (self.t2 + self.t3)
        counted = sum(1 for _ in self.positions())
        if counted != expected:
            raise ClusterError(f"node count {counted} disagrees with {expected}")
        logging.getLogger(__name__).debug(f"Grid {self.m}x{self.n} uses {counted} nodes")

    @classmethod
    def symmetric(cls, m, n, t):
        """t1 + t3 = t2 + t3 = t; O3 errors share the row and column budgets."""
        return cls(m, n, t, t, 0)

    @property
    def row_t(self):
        return self.t1 + self.t3

    @property
    def col_t(self):
        return self.t2 + self.t3

    @property
    def total_rows(self):
        return self.m + 2 * self.row_t

    @property
    def total_cols(self):
        return self.n + 2 * self.col_t

    @property
    def base_nodes(self):
        return self.m * self.n

    @property
    def node_count(self):
        return self.m * self.n + 2 * self.n * self.row_t + 2 * self.m * self.col_t

    @property
    def replication_node_count(self):
        return 2 * self.base_nodes

    def has_node(self, row, col):
        if not (0 <= row < self.total_rows and 0 <= col < self.total_cols):
            return False
        return row < self.m or col < self.n

    def positions(self):
        """Grid scan order: row-major, skipping the parity corner."""
        for i in range(self.total_rows):
            for j in range(self.total_cols):
                if self.has_node(i, j):
                    yield i, j

    def feedforward_active(self):
        return [(i, j) for i in range(self.total_rows) for j in range(self.n)]

    def backprop_active(self):
        return [(i, j) for i in range(self.m) for j in range(self.total_cols)]

    def step_bound(self, step):
        """Largest number of scheduled faults a single (iteration, layer, step) may carry."""
        if step == "O1":
            return self.row_t
        if step == "O2":
            return self.col_t
        return self.t3 if self.t3 else min(self.row_t, self.col_t)


def inflate_grid(m, n, target):
    """Add columns, keeping m rows, until m * n >= target."""
    while m * n < target:
        n += 1
    return m, n
