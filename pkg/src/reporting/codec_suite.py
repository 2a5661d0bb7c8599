"""Seeded property checks for a (k + 2t, k) code, printed as a table by verify-codec."""
import logging
from dataclasses import dataclass

import numpy as np

from src.coding.mds_codec import (BlockVector, DecodeStatus, decode, encode_block_vector, make_mds,
                                  spark_at_least, syndrome_fires)

logger = logging.getLogger(__name__)

CORRECTION_TOL = 1e-9


@dataclass(frozen=True)
class PropertyResult:
    name: str
    value: str
    passed: bool


def _corrupt(rng, word, count, block_len):
    blocks = word.blocks.copy()
    support = rng.choice(word.count, size=count, replace=False)
    for idx in support:
        blocks[idx] += rng.normal(0.0, 1.0, size=block_len)
    return BlockVector(blocks), frozenset(int(s) for s in support)


def run_codec_suite(k, t, trials=1000, block_len=4, seed=0):
    code = make_mds(k, t)
    rng = np.random.default_rng(seed)
    results = []

    orthogonality = float(np.max(np.abs(code.parity_check @ code.generator.T))) if code.r else 0.0
    results.append(PropertyResult("H G^T = 0", f"{orthogonality:.3g}", orthogonality <= 1e-12))
    spark_ok = spark_at_least(code.parity_check, 2 * t) if t else True
    results.append(PropertyResult(f"every {2 * t} columns of H independent", str(spark_ok), spark_ok))

    round_trip = 0
    corrected, worst = 0, 0.0
    fired, silent = 0, 0
    for _ in range(trials):
        message = rng.normal(size=(k, block_len))
        word = encode_block_vector(code, message)
        outcome = decode(code, word)
        round_trip += outcome.status is DecodeStatus.CLEAN and np.array_equal(outcome.message, message)
        if t == 0:
            continue

        bad, support = _corrupt(rng, word, int(rng.integers(1, t + 1)), block_len)
        outcome = decode(code, bad)
        if outcome.status is DecodeStatus.CORRECTED and outcome.error_locations == support:
            err = float(np.max(np.abs(outcome.message - message)) / (1.0 + np.max(np.abs(message))))
            worst = max(worst, err)
            corrected += err <= CORRECTION_TOL

        if t + 1 <= code.length:
            bad, _ = _corrupt(rng, word, t + 1, block_len)
            fired += syndrome_fires(code, bad)
            outcome = decode(code, bad)
            if outcome.status is not DecodeStatus.UNCORRECTABLE:
                silent += not np.allclose(outcome.message, message, rtol=CORRECTION_TOL, atol=CORRECTION_TOL)

    results.append(PropertyResult("round trip clean", f"{round_trip}/{trials}", round_trip == trials))
    if t:
        results.append(PropertyResult(f"<= {t} errors corrected", f"{corrected}/{trials} (max rel err {worst:.2e})",
                                      corrected == trials))
        results.append(PropertyResult(f"{t + 1} errors detected", f"{fired}/{trials}", fired == trials))
        results.append(PropertyResult(f"{t + 1} errors silently miscorrected", f"{silent}/{trials}", silent == 0))
    logger.info(f"Codec suite k={k} t={t}: {sum(r.passed for r in results)}/{len(results)} properties hold")
    return results


def print_table(results, stream):
    width = max(len(r.name) for r in results)
    stream.write(f"{'property'.ljust(width)}  {'result':<6}  value\n")
    for r in results:
        stream.write(f"{r.name.ljust(width)}  {'ok' if r.passed else 'FAIL':<6}  {r.value}\n")
