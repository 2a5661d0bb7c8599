"""Ledger-only dry runs of one fault-free layer, with no matrices allocated.

They replay the collective and compute charges the strategies issue for an
inner layer (both redistributions present), so large N can be costed.
"""
from src.cluster.layout import GridLayout
from src.cluster.ledger import CostLedger, CostModel
from src.strategies.coded_grid import padded


def codenet_layer_cost(m, n, t, n_out, n_in, alpha, beta, gamma, verified=True, redistribute=True):
    """(comm, comp) of one CodeNet layer: feedforward, backpropagation and update."""
    layout = GridLayout.symmetric(m, n, t)
    ledger = CostLedger(CostModel(alpha, beta, gamma))
    br, bc = padded(n_out, m) // m, padded(n_in, n) // n
    r = 2 * t
    flops = 2 * br * bc

    ledger.charge_compute(flops)
    with ledger.concurrent():
        ledger.charge_collective("all_reduce", n, br)
    if r:
        with ledger.concurrent():
            ledger.charge_collective("all_reduce", layout.total_rows, r * br)
        if verified:
            ledger.charge_detection_check(layout.node_count, t)
        with ledger.concurrent():
            ledger.charge_collective("reduce", layout.total_cols, r * bc)
    if redistribute:
        with ledger.concurrent():
            ledger.charge_collective("broadcast", layout.total_rows, padded(n_out, n) // n)

    ledger.charge_compute(flops)
    with ledger.concurrent():
        ledger.charge_collective("all_reduce", m, bc)
    if r:
        with ledger.concurrent():
            ledger.charge_collective("all_reduce", layout.total_cols, r * bc)
        if verified:
            ledger.charge_detection_check(layout.node_count, t)
        with ledger.concurrent():
            ledger.charge_collective("reduce", layout.total_rows, r * br)
    if redistribute:
        with ledger.concurrent():
            ledger.charge_collective("broadcast", layout.total_cols, padded(n_in, m) // m)

    ledger.charge_compute(flops)
    return ledger.comm_time, ledger.comp_time


def replication_layer_cost(m, n, n_out, n_in, alpha, beta, gamma, redistribute=True):
    """(comm, comp) of one layer on one replica; the mirror runs in lockstep."""
    ledger = CostLedger(CostModel(alpha, beta, gamma))
    br, bc = padded(n_out, m) // m, padded(n_in, n) // n
    flops = 2 * br * bc

    ledger.charge_compute(flops)
    ledger.charge_collective("reduce", n, br)
    if redistribute:
        ledger.charge_collective("broadcast", m, padded(n_out, n) // n)
    ledger.charge_compute(flops)
    ledger.charge_collective("reduce", m, bc)
    if redistribute:
        ledger.charge_collective("broadcast", n, padded(n_in, m) // m)
    ledger.charge_compute(flops)
    return ledger.comm_time, ledger.comp_time
