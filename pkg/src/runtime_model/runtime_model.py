"""Expected-runtime model of checkpointed training and the cost-ratio formulas.

An iteration succeeds without error (p0), hits an error the coded strategy
can correct (p1), or needs a rollback (p2). Replication treats every error
as a rollback. Reaching the next checkpoint I0 iterations ahead is a
Markov chain whose expected duration has a closed geometric form.
"""
import csv
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from src.strategies.strategy_manager import StrategyKind

logger = logging.getLogger(__name__)

PROB_TOL = 1e-12
TIE_TOL = 1e-12
TRADEOFF_HEADER = ["lambda", "i0_rep", "i0_codenet", "et_rep", "et_codenet", "ratio"]


class ModelError(ValueError):
    """Raised for invalid runtime-model parameters."""


@dataclass(frozen=True)
class RuntimeModelParams:
    p0: float
    p1: float
    p2: float
    tau_f: float = 1.0
    tau_b: float = 1000.0
    tau_cpt: float = 1000.0
    i0: int = 1
    iterations: int = 1

    def __post_init__(self):
        for name in ("p0", "p1", "p2"):
            value = getattr(self, name)
            if not -PROB_TOL <= value <= 1 + PROB_TOL:
                raise ModelError(f"{name} must be in [0, 1], got {value}")
        if abs(self.p0 + self.p1 + self.p2 - 1.0) > PROB_TOL:
            raise ModelError(f"p0 + p1 + p2 must be 1, got {self.p0 + self.p1 + self.p2}")
        if not self.tau_b >= self.tau_f > 0:
            raise ModelError("need tau_b >= tau_f > 0")
        if self.tau_cpt < 0:
            raise ModelError("tau_cpt must be >= 0")
        if self.i0 < 1 or self.iterations < 1:
            raise ModelError("I0 and M must be >= 1")

    def with_period(self, i0):
        return RuntimeModelParams(self.p0, self.p1, self.p2, self.tau_f, self.tau_b,
                                  self.tau_cpt, i0, self.iterations)


@dataclass(frozen=True)
class ComplexityParams:
    P: int
    P_hat: int
    t: int
    n_out: int
    n_in: int
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0


def poisson_probabilities(lam):
    """(p0, p1, p2) with p1 the single-error mass of a Poisson(lam) error count."""
    p0 = math.exp(-lam)
    p1 = lam * p0
    return p0, p1, max(0.0, 1.0 - p0 - p1)


def node_failure_probabilities(p, total_nodes, layers):
    """Per-iteration outcome probabilities when each of 3 P_hat L node-ops fails w.p. p.

    p1 counts only single-failure iterations, a lower bound on what the code corrects.
    """
    ops = 3 * total_nodes * layers
    p0 = (1.0 - p) ** ops
    p1 = ops * p * (1.0 - p) ** (ops - 1) if ops else 0.0
    return p0, p1, max(0.0, 1.0 - p0 - p1)


def _advance_probability(params, strategy):
    strategy = StrategyKind(strategy)
    if strategy is StrategyKind.CODENET:
        return params.p0 + params.p1
    if strategy is StrategyKind.REPLICATION:
        return params.p0
    raise ModelError(f"no runtime model for {strategy.value}")


def expected_segment_time(params, strategy):
    """E[T_I0]: expected time to move I0 iterations past the last checkpoint."""
    q = _advance_probability(params, strategy)
    if q <= 0:
        raise ModelError("no iteration can ever make progress (q = 0)")
    step = params.tau_f * params.p0 + params.tau_b * (1.0 - params.p0)
    if abs(q - 1.0) <= PROB_TOL:
        return params.i0 * step
    inv = 1.0 / q
    try:
        growth = inv ** params.i0
    except OverflowError:
        return math.inf
    if math.isinf(growth):
        return math.inf
    return step * (growth - 1.0) / (inv - 1.0)


def expected_time(params, strategy):
    """(M / I0) (tau_cpt + E[T_I0]), with M / I0 taken as a real number."""
    segments = params.iterations / params.i0
    return segments * params.tau_cpt + segments * expected_segment_time(params, strategy)


def optimize_checkpoint_period(params, strategy):
    """Scan I0 = 1..M; the smallest I0 wins ties."""
    best_i0, best = 1, math.inf
    for i0 in range(1, params.iterations + 1):
        value = expected_time(params.with_period(i0), strategy)
        if value < best and not math.isclose(value, best, rel_tol=TIE_TOL, abs_tol=0.0):
            best_i0, best = i0, value
    return best_i0, best


def mc_expected_time(params, strategy, trials, seed=0, restart_state=1):
    """Monte-Carlo estimate of E[T_I0]; returns (mean, standard error).

    Each iteration costs tau_f when clean and tau_b otherwise; clean (and, for
    the coded strategy, corrected) iterations move forward. Iterations before
    `restart_state` always move forward and a rollback returns there. The
    default of 1 is the chain the closed form describes; 0 gives the strict
    reset-to-checkpoint chain, whose mean is the closed form divided by q.
    """
    if trials < 1:
        raise ModelError("trials must be >= 1")
    strategy = StrategyKind(strategy)
    coded = strategy is StrategyKind.CODENET
    rng = np.random.default_rng(seed)
    totals = np.zeros(trials)
    state = np.zeros(trials, dtype=np.int64)
    active = np.arange(trials)
    while active.size:
        u = rng.random(active.size)
        clean = u < params.p0
        corrected = (~clean) & (u < params.p0 + params.p1) if coded else np.zeros_like(clean)
        totals[active] += np.where(clean, params.tau_f, params.tau_b)
        current = state[active]
        forward = clean | corrected | (current < restart_state)
        state[active] = np.where(forward, current + 1, restart_state)
        active = active[state[active] < params.i0]
    mean = float(totals.mean())
    stderr = float(totals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return mean, stderr


def complexity_ratios(cp: ComplexityParams):
    """Communication and computation cost of the coded strategy over replication, per layer."""
    root = math.sqrt(cp.P)
    dims = cp.n_out + cp.n_in
    comm_num = 6 * cp.alpha * math.log2(cp.P_hat) + cp.beta * (6 * cp.t + 3) * dims / root \
        + 2 * cp.beta * cp.P_hat * cp.t
    comm_den = 2 * cp.alpha * math.log2(cp.P) + 2 * cp.beta * dims / root
    comp_num = 6 * cp.n_out * cp.n_in / cp.P + (1 + 4 * cp.t) * dims / root + 2 * cp.P_hat * cp.t
    comp_den = 6 * cp.n_out * cp.n_in / cp.P + dims / root
    return comm_num / comm_den, comp_num / comp_den


def complexity_bounds(cp: ComplexityParams):
    """Absolute numerator and denominator costs: ((comm, comp) coded, (comm, comp) replication)."""
    root = math.sqrt(cp.P)
    dims = cp.n_out + cp.n_in
    coded = (6 * cp.alpha * math.log2(cp.P_hat) + cp.beta * (6 * cp.t + 3) * dims / root
             + 2 * cp.beta * cp.P_hat * cp.t,
             cp.gamma * (6 * cp.n_out * cp.n_in / cp.P + (1 + 4 * cp.t) * dims / root + 2 * cp.P_hat * cp.t))
    replicated = (2 * cp.alpha * math.log2(cp.P) + 2 * cp.beta * dims / root,
                  cp.gamma * (6 * cp.n_out * cp.n_in / cp.P + dims / root))
    return coded, replicated


@dataclass(frozen=True)
class TradeoffRow:
    lam: float
    i0_rep: int
    i0_codenet: int
    et_rep: float
    et_codenet: float

    @property
    def ratio(self):
        return self.et_rep / self.et_codenet


def tradeoff_rows(lambdas: Iterable[float], tau_f=1.0, tau_b=1000.0, tau_cpt=1000.0, iterations=1000,
                  period: Optional[int] = None):
    """One row per lambda; each strategy gets its best I0 unless `period` pins it."""
    rows = []
    for lam in lambdas:
        p0, p1, p2 = poisson_probabilities(lam)
        params = RuntimeModelParams(p0, p1, p2, tau_f, tau_b, tau_cpt, period or 1, iterations)
        if period:
            i0_rep = i0_cdn = period
            et_rep = expected_time(params, StrategyKind.REPLICATION)
            et_cdn = expected_time(params, StrategyKind.CODENET)
        else:
            i0_rep, et_rep = optimize_checkpoint_period(params, StrategyKind.REPLICATION)
            i0_cdn, et_cdn = optimize_checkpoint_period(params, StrategyKind.CODENET)
        rows.append(TradeoffRow(lam, i0_rep, i0_cdn, et_rep, et_cdn))
        logger.debug(f"lambda={lam:.4g}: I0 rep {i0_rep}, codenet {i0_cdn}, ratio {et_rep / et_cdn:.4g}")
    if not rows:
        raise ModelError("lambda grid is empty")
    return rows


def _fmt(value):
    return format(value, ".17g")


def emit_tradeoff_csv(lambdas, stream, tau_f=1.0, tau_b=1000.0, tau_cpt=1000.0, iterations=1000,
                      period=None, rows: Optional[list] = None):
    """Write the ratio-vs-lambda table; returns the rows written."""
    if rows is None:
        rows = tradeoff_rows(lambdas, tau_f, tau_b, tau_cpt, iterations, period)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TRADEOFF_HEADER)
    for r in rows:
        writer.writerow([_fmt(r.lam), r.i0_rep, r.i0_codenet, _fmt(r.et_rep), _fmt(r.et_codenet), _fmt(r.ratio)])
    return rows


def lambda_grid(lam_min, lam_max, points):
    if points < 1 or lam_min <= 0 or lam_max < lam_min:
        raise ModelError("need points >= 1 and 0 < lambda-min <= lambda-max")
    if points == 1:
        return [float(lam_min)]
    return [float(v) for v in np.linspace(lam_min, lam_max, points)]
