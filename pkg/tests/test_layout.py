import pytest

from src.cluster.layout import ClusterError, GridLayout, inflate_grid


@pytest.mark.parametrize("m,n,t,expected", [
    (2, 2, 1, 12),
    (4, 4, 1, 32),
    (5, 4, 1, 38),
    (3, 3, 0, 9),
])
def test_symmetric_node_count(m, n, t, expected):
    layout = GridLayout.symmetric(m, n, t)
    assert layout.node_count == expected
    assert len(list(layout.positions())) == expected


def test_codenet_uses_fewer_nodes_than_replication():
    layout = GridLayout.symmetric(5, 4, 1)
    assert layout.node_count == 38 < layout.replication_node_count == 40


def test_asymmetric_tolerances():
    layout = GridLayout(3, 2, t1=1, t2=2, t3=0)
    assert (layout.row_t, layout.col_t) == (1, 2)
    assert (layout.total_rows, layout.total_cols) == (5, 6)
    assert layout.node_count == 3 * 2 + 2 * 2 * 1 + 2 * 3 * 2
    layout = GridLayout(2, 2, t1=0, t2=0, t3=1)
    assert layout.node_count == 4 + 4 + 4
    assert layout.step_bound("O3") == 1


def test_parity_corner_is_empty():
    layout = GridLayout.symmetric(2, 2, 1)
    assert layout.has_node(3, 1) and layout.has_node(1, 3)
    assert not layout.has_node(2, 2)
    assert not layout.has_node(0, 4)


def test_scan_order_is_row_major():
    layout = GridLayout.symmetric(1, 1, 1)
    assert list(layout.positions()) == [(0, 0), (0, 1), (0, 2), (1, 0), (2, 0)]


def test_active_sets():
    layout = GridLayout.symmetric(2, 3, 1)
    assert len(layout.feedforward_active()) == layout.total_rows * 3
    assert len(layout.backprop_active()) == 2 * layout.total_cols


def test_step_bounds():
    layout = GridLayout(2, 2, t1=1, t2=2)
    assert layout.step_bound("O1") == 1
    assert layout.step_bound("O2") == 2
    assert layout.step_bound("O3") == 1


@pytest.mark.parametrize("args", [(0, 2), (2, 0), (2, 2, -1)])
def test_rejects_bad_grid(args):
    with pytest.raises(ClusterError):
        GridLayout(*args)


def test_inflate_grid_widens_columns():
    assert inflate_grid(5, 4, 40) == (5, 8)
    assert inflate_grid(2, 2, 3) == (2, 2)
    assert inflate_grid(1, 1, 7) == (1, 7)
    assert inflate_grid(3, 1, 10) == (3, 4)
