import numpy as np

from src.strategies.strategy_manager import RollbackCause, RollbackSignal, StrategyKind
from src.strategies.uncoded_strategy import UncodedStrategy


class ReplicationStrategy(UncodedStrategy):
    """Two mirrored m x n grids that compare every matrix-vector output and weight update.

    Faults are drawn independently per replica. Any mismatch rolls back to the
    last checkpoint; nothing is ever corrected. The mirror grid runs in
    lockstep, so only one replica's work is charged to the ledger.
    """
    kind = StrategyKind.REPLICATION
    replicas = 2

    def _compare(self, layer, stage, values):
        reference = values[0]
        if all(np.array_equal(reference, v) for v in values[1:]):
            return None
        self.logger.debug(f"Replicas disagree at layer {layer} ({stage})")
        return RollbackSignal(RollbackCause.REPLICA_MISMATCH, layer, stage)
