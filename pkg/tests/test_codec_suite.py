import io

import pytest

from src.reporting.codec_suite import print_table, run_codec_suite


@pytest.mark.parametrize("k,t", [(2, 1), (3, 1), (4, 2)])
def test_every_property_holds(k, t):
    results = run_codec_suite(k, t, trials=200, seed=5)
    assert len(results) == 6
    assert all(r.passed for r in results), [r for r in results if not r.passed]


def test_uncoded_suite_only_checks_round_trip():
    results = run_codec_suite(3, 0, trials=20)
    assert [r.name for r in results][-1] == "round trip clean"
    assert all(r.passed for r in results)


def test_table_layout():
    stream = io.StringIO()
    print_table(run_codec_suite(2, 1, trials=10), stream)
    lines = stream.getvalue().splitlines()
    assert lines[0].startswith("property")
    assert len(lines) == 7
    assert all(" ok " in line for line in lines[1:])
