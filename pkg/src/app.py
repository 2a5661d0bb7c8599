import logging
import math
import os

from .checkpoints.checkpoint_manager import CheckpointManager
from .cluster.layout import GridLayout, inflate_grid
from .data.mnist import load_mnist, synthetic_dataset
from .dnn.dnn_math import DnnState
from .reporting.metrics import MetricsWriter, resource_footprint, write_run_report
from .runtime_model.cost_plan import codenet_layer_cost, replication_layer_cost
from .runtime_model.runtime_model import (ComplexityParams, ModelError, RuntimeModelParams,
                                          complexity_bounds, expected_time,
                                          node_failure_probabilities)
from .strategies.strategy_manager import StrategyKind, get_strategy
from .strategies.trainer import run_training
from .utils.config import ConfigError

METRICS_FILE = "metrics.csv"
REPORT_FILE = "run_report.json"
CONFIG_ECHO_FILE = "config.json"
# hard stop for runs whose rollbacks never let them finish
MAX_STEPS_PER_ITERATION = 100


def _finite(value):
    return value if value is not None and math.isfinite(value) else None


class ExperimentApp:
    """One training experiment: dataset, strategy, checkpoints and outputs under out_dir."""

    def __init__(self, config_manager, resume=None):
        self.logger = logging.getLogger(__name__)
        self.config_manager = config_manager
        self.resume = resume
        self.out_dir = config_manager.get("outputs.out_dir")

        self.logger.info(f"Initializing experiment in {self.out_dir}")
        self._init_components()

    def _init_components(self):
        os.makedirs(self.out_dir, exist_ok=True)
        self.config_manager.save(os.path.join(self.out_dir, CONFIG_ECHO_FILE))

        self.train_set, self.test_set = self._load_datasets()

        checkpoint_path = os.path.join(self.out_dir, self.config_manager.get("outputs.checkpoint_file"))
        self.strategy_config = self.config_manager.strategy_config(checkpoint_path)
        try:
            self.strategy = get_strategy(self.strategy_config)
        except ValueError as e:
            raise ConfigError(str(e)) from e

        state = DnnState.initialize(self.strategy_config.layers,
                                    seed=self.config_manager.get("experiment.seed"),
                                    learning_rate=self.strategy_config.learning_rate,
                                    init_scale=self.config_manager.get("network.init_scale"))
        self.strategy.setup(state)
        self.checkpoints = CheckpointManager(checkpoint_path)
        self.logger.info(f"{self.strategy.kind.value} strategy on {self.strategy.node_count} nodes")

    def _load_datasets(self):
        get = self.config_manager.get
        dims = get("network.layers")
        seed = get("experiment.seed")
        if get("outputs.images") and get("outputs.labels"):
            train = load_mnist(get("outputs.images"), get("outputs.labels"))
            if get("outputs.test_images") and get("outputs.test_labels"):
                test = load_mnist(get("outputs.test_images"), get("outputs.test_labels"))
            else:
                train, test = train.split(len(train) - get("outputs.test_samples"))
        else:
            train_count = get("outputs.train_samples")
            pool = synthetic_dataset(train_count + get("outputs.test_samples"),
                                     features=dims[0], classes=dims[-1], seed=seed)
            train, test = pool.split(train_count)
            self.logger.info(f"Using {len(train)} synthetic training samples")
        if train.images.shape[1] != dims[0] or train.labels.shape[1] != dims[-1]:
            raise ConfigError(f"dataset is {train.images.shape[1]} -> {train.labels.shape[1]} "
                              f"but the network is {dims[0]} -> {dims[-1]}", key="network.layers")
        if len(train) == 0:
            raise ConfigError("training set is empty", key="outputs.train_samples")
        return train, (test if len(test) else None)

    def run(self):
        get = self.config_manager.get
        iterations = get("experiment.iterations")
        resume_from = self.checkpoints.load(self.resume) if self.resume else None

        with MetricsWriter(os.path.join(self.out_dir, METRICS_FILE)) as metrics:
            self.summary = run_training(
                self.strategy, self.train_set, iterations,
                checkpoints=self.checkpoints,
                eval_set=self.test_set,
                eval_every=get("experiment.eval_every"),
                eval_samples=get("experiment.eval_samples"),
                resume_from=resume_from,
                on_row=metrics.write,
                max_steps=MAX_STEPS_PER_ITERATION * iterations,
            )

        self.report = self.build_report()
        write_run_report(os.path.join(self.out_dir, REPORT_FILE), self.report)
        return self.report

    def node_counts(self):
        m, n, t = (self.config_manager.get(f"experiment.{k}") for k in ("m", "n", "t"))
        codenet = GridLayout.symmetric(m, n, t).node_count
        uncoded = m * n
        if self.config_manager.get("experiment.uncoded_equal_nodes"):
            um, un = inflate_grid(m, n, 2 * m * n)
            uncoded = um * un
        return {
            "used": self.strategy.node_count,
            "codenet": codenet,
            "replication": 2 * m * n,
            "uncoded": uncoded,
            "codenet_fewer_than_replication": codenet < 2 * m * n,
        }

    def layer_cost_ratios(self):
        """Measured dry-run cost ratios for the first layer next to the closed-form bounds."""
        get = self.config_manager.get
        m, n = get("experiment.m"), get("experiment.n")
        t = max(1, get("experiment.t"))
        spec = self.strategy_config.layers[0]
        cost = self.strategy_config.cost
        coded = codenet_layer_cost(m, n, t, spec.out_dim, spec.in_dim, cost.alpha, cost.beta, cost.gamma)
        replicated = replication_layer_cost(m, n, spec.out_dim, spec.in_dim, cost.alpha, cost.beta, cost.gamma)
        cp = ComplexityParams(m * n, GridLayout.symmetric(m, n, t).node_count, t,
                              spec.out_dim, spec.in_dim, cost.alpha, cost.beta, cost.gamma)
        bound_coded, bound_replicated = complexity_bounds(cp)

        def ratio(a, b):
            return _finite(a / b) if b else None

        return {
            "t": t,
            "measured": {"comm": coded[0], "comp": coded[1],
                         "comm_ratio": ratio(coded[0], replicated[0]),
                         "comp_ratio": ratio(coded[1], replicated[1])},
            "bound": {"comm": bound_coded[0], "comp": bound_coded[1],
                      "comm_ratio": ratio(bound_coded[0], bound_replicated[0]),
                      "comp_ratio": ratio(bound_coded[1], bound_replicated[1])},
        }

    def predicted_ratio(self):
        get = self.config_manager.get
        layout = GridLayout.symmetric(get("experiment.m"), get("experiment.n"), get("experiment.t"))
        p0, p1, p2 = node_failure_probabilities(get("faults.p"), layout.node_count,
                                                len(self.strategy_config.layers))
        cost = self.strategy_config.cost
        try:
            params = RuntimeModelParams(p0, p1, p2, cost.tau_f, cost.tau_b, cost.tau_cpt,
                                        get("experiment.checkpoint_period"), get("experiment.iterations"))
            et_rep = expected_time(params, StrategyKind.REPLICATION)
            et_codenet = expected_time(params, StrategyKind.CODENET)
        except ModelError as e:
            self.logger.warning(f"No runtime prediction: {e}")
            return None
        return {"p0": p0, "p1": p1, "p2": p2,
                "et_replication": _finite(et_rep), "et_codenet": _finite(et_codenet),
                "ratio": _finite(et_rep / et_codenet) if et_codenet else None}

    def build_report(self):
        s = self.summary
        return {
            "config": self.config_manager.config,
            "strategy": self.strategy.kind.value,
            "nodes": self.node_counts(),
            "iterations": self.config_manager.get("experiment.iterations"),
            "executed_steps": s.executed,
            "completed": s.completed,
            "outcomes": dict(s.outcomes),
            "rollback_causes": dict(s.rollback_causes),
            "checkpoints": s.checkpoints,
            "coarse_time": s.coarse_time,
            "comm_time": s.comm_time,
            "comp_time": s.comp_time,
            "checkpoint_time": s.checkpoint_time,
            "final_loss": s.final_loss,
            "final_accuracy": s.final_accuracy,
            "layer_cost_ratios": self.layer_cost_ratios(),
            "predicted_runtime": self.predicted_ratio(),
            "resources": resource_footprint(),
        }
