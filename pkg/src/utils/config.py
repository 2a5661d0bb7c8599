import ast
import copy
import json
import logging
import os
import re

from src.cluster.faults import (PRIMARY_STEPS, DenseGaussian, ErrorModel, FaultSpec, Injection,
                                SparseUniform, Step)
from src.cluster.ledger import CostModel
from src.dnn.dnn_math import Activation, layer_chain
from src.strategies.strategy_manager import StrategyConfig, StrategyKind


class ConfigError(ValueError):
    """Raised for unreadable or inconsistent experiment configs; names the key and line."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key:
            where.append(f"key '{key}'")
        if line:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.key = key
        self.line = line


_SECTION = re.compile(r"^\[(\w+)\]$")
_TUPLE = re.compile(r"\(([^()]*)\)")


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


class ConfigManager:
    DEFAULT_CONFIG = {
        "experiment": {
            "strategy": "codenet",
            "m": 1,
            "n": 1,
            "t": 0,
            "eta": 0.1,
            "checkpoint_period": 100,
            "iterations": 100,
            "seed": 0,
            "eval_every": 100,
            "eval_samples": 1000,
            "uncoded_equal_nodes": False,
        },
        "network": {
            "layers": [784, 100, 100, 10],
            "activation": "sigmoid",
            "init_scale": 0.1,
        },
        "faults": {
            "model": "none",
            "p": 0.0,
            "noise": "sparse",
            "density": 0.005,
            "low": -5.0,
            "high": 5.0,
            "sigma": 1.0,
            "steps": ["O1", "O2", "O3"],
            "schedule": [],
            "suppress_on_replay": False,
            "tau_f": 1.0,
            "tau_b": 1000.0,
            "tau_cpt": 1000.0,
            "alpha": 1e-6,
            "beta": 1e-9,
            "gamma": 1e-11,
        },
        "outputs": {
            "out_dir": "runs/default",
            "images": "",
            "labels": "",
            "test_images": "",
            "test_labels": "",
            "checkpoint_file": "checkpoint.cdnt",
            "train_samples": 2000,
            "test_samples": 500,
        },
    }

    def __init__(self, path=None):
        self.logger = logging.getLogger(__name__)
        self.path = path
        self.lines = {}
        self.config = copy.deepcopy(self.DEFAULT_CONFIG)
        if path is not None:
            self._update_nested_dict(self.config, self._load_config(path))
        self.validate()

    def _load_config(self, path):
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "r") as f:
                text = f.read()
        except OSError as e:
            self.logger.error(f"Error loading config: {e}")
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        parsed = self.parse(text)
        self.logger.info(f"Configuration loaded from {path}")
        return parsed

    def parse(self, text):
        parsed = {}
        section = None
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line[0] in "#;":
                continue
            header = _SECTION.match(line)
            if header:
                section = header.group(1)
                if section not in self.DEFAULT_CONFIG:
                    raise ConfigError(f"unknown section [{section}]", line=number)
                parsed.setdefault(section, {})
                continue
            if "=" not in line:
                raise ConfigError("expected 'key = value'", line=number)
            if section is None:
                raise ConfigError("setting outside of a section", line=number)
            key, value = (part.strip() for part in line.split("=", 1))
            dotted = f"{section}.{key}"
            if key not in self.DEFAULT_CONFIG[section]:
                raise ConfigError("unknown key", key=dotted, line=number)
            parsed[section][key] = self._parse_value(dotted, value, number)
            self.lines[dotted] = number
        return parsed

    def _parse_value(self, key, value, line):
        if key == "faults.schedule":
            return self._parse_schedule(key, value, line)
        lowered = value.lower()
        if lowered in ("true", "yes", "on"):
            return True
        if lowered in ("false", "no", "off"):
            return False
        if value.startswith("["):
            inner = value.strip("[]").strip()
            if not inner:
                return []
            return [self._scalar(item.strip()) for item in inner.split(",")]
        return self._scalar(value)

    @staticmethod
    def _scalar(value):
        try:
            return ast.literal_eval(value)
        except (ValueError, SyntaxError):
            return value.strip("\"'")

    def _parse_schedule(self, key, value, line):
        if not (value.startswith("[") and value.endswith("]")):
            raise ConfigError("schedule must be a [...] list", key=key, line=line)
        entries = []
        for match in _TUPLE.finditer(value):
            fields = [f.strip() for f in match.group(1).split(",") if f.strip()]
            if len(fields) not in (5, 6):
                raise ConfigError("schedule entries are (iter, layer, step, row, col[, replica])",
                                  key=key, line=line)
            try:
                numbers = [int(f) for f in fields[:2] + fields[3:]]
            except ValueError:
                raise ConfigError(f"non-integer field in {match.group(0)}", key=key, line=line)
            entries.append([numbers[0], numbers[1], fields[2].upper()] + numbers[2:])
        if not entries and value.strip("[] "):
            raise ConfigError("could not parse schedule", key=key, line=line)
        return entries

    def _update_nested_dict(self, d, u):
        for k, v in u.items():
            if isinstance(v, dict) and k in d and isinstance(d[k], dict):
                self._update_nested_dict(d[k], v)
            else:
                d[k] = v

    def _fail(self, message, key):
        raise ConfigError(message, key=key, line=self.lines.get(key))

    def validate(self):
        exp, net, faults = self.config["experiment"], self.config["network"], self.config["faults"]
        try:
            kind = StrategyKind(str(exp["strategy"]).lower())
        except ValueError:
            self._fail(f"unknown strategy {exp['strategy']!r}", "experiment.strategy")
        for key in ("m", "n", "t", "checkpoint_period", "iterations", "seed", "eval_every", "eval_samples"):
            if not isinstance(exp[key], int) or isinstance(exp[key], bool):
                self._fail("must be an integer", f"experiment.{key}")
        if exp["m"] < 1 or exp["n"] < 1:
            self._fail("grid dims must be >= 1", "experiment.m" if exp["m"] < 1 else "experiment.n")
        if exp["t"] < 0:
            self._fail("t must be >= 0", "experiment.t")
        if exp["t"] > 0 and kind is not StrategyKind.CODENET:
            self._fail("t requires codenet", "experiment.t")
        if exp["checkpoint_period"] < 1:
            self._fail("checkpoint period must be >= 1", "experiment.checkpoint_period")
        if exp["iterations"] < 1:
            self._fail("iterations must be >= 1", "experiment.iterations")
        if not isinstance(exp["eta"], (int, float)) or exp["eta"] <= 0:
            self._fail("eta must be a positive number", "experiment.eta")

        layers = net["layers"]
        if not isinstance(layers, list) or len(layers) < 2 \
                or not all(isinstance(d, int) and d >= 1 for d in layers):
            self._fail("layers must list at least two positive integers", "network.layers")
        try:
            Activation(net["activation"])
        except ValueError:
            self._fail(f"unknown activation {net['activation']!r}", "network.activation")
        scale = net["init_scale"]
        if scale is not None and (not _is_number(scale) or scale <= 0):
            self._fail("init scale must be a positive number", "network.init_scale")

        try:
            ErrorModel(faults["model"])
        except ValueError:
            self._fail(f"unknown fault model {faults['model']!r}", "faults.model")
        if faults["noise"] not in ("sparse", "dense"):
            self._fail("noise must be sparse or dense", "faults.noise")
        for key in ("p", "density"):
            if not isinstance(faults[key], (int, float)) or not 0.0 <= faults[key] <= 1.0:
                self._fail("probabilities must be in [0, 1]", f"faults.{key}")
        for key in ("low", "high", "sigma", "tau_f", "tau_b", "tau_cpt", "alpha", "beta", "gamma"):
            if not _is_number(faults[key]):
                self._fail("must be a number", f"faults.{key}")
        if faults["low"] > faults["high"]:
            self._fail("low must not exceed high", "faults.low")
        if faults["sigma"] < 0:
            self._fail("sigma must be >= 0", "faults.sigma")
        for step in faults["steps"]:
            if step not in {s.value for s in Step}:
                self._fail(f"unknown step {step!r}", "faults.steps")
        for entry in faults["schedule"]:
            if entry[2] not in {s.value for s in PRIMARY_STEPS}:
                self._fail(f"scheduled faults are limited to O1/O2/O3, got {entry[2]}", "faults.schedule")
        try:
            self.cost_model()
        except ValueError as e:
            self._fail(str(e), "faults.tau_b")

    def get(self, key, default=None):
        keys = key.split('.')
        value = self.config

        for k in keys:
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default

        return value

    def set(self, key, value):
        keys = key.split('.')
        config = self.config

        for k in keys[:-1]:
            if k not in config:
                raise ConfigError("unknown section", key=key)
            config = config[k]
        if keys[-1] not in config:
            raise ConfigError("unknown key", key=key)
        config[keys[-1]] = value
        self.lines.pop(key, None)
        self.validate()

    def save(self, path):
        """Echo the resolved config as JSON next to the run outputs."""
        try:
            with open(path, 'w') as f:
                json.dump(self.config, f, indent=4)
            self.logger.info(f"Resolved configuration written to {path}")
            return True
        except OSError as e:
            self.logger.error(f"Error saving config: {e}")
            raise

    def cost_model(self):
        f = self.config["faults"]
        return CostModel(alpha=f["alpha"], beta=f["beta"], gamma=f["gamma"],
                         tau_f=f["tau_f"], tau_b=f["tau_b"], tau_cpt=f["tau_cpt"])

    def fault_spec(self):
        f = self.config["faults"]
        if f["noise"] == "dense":
            noise = DenseGaussian(f["sigma"])
        else:
            noise = SparseUniform(f["density"], f["low"], f["high"])
        schedule = [Injection(e[0], e[1], Step(e[2]), *e[3:]) for e in f["schedule"]]
        return FaultSpec(model=f["model"], p=f["p"], noise=noise, steps=tuple(f["steps"]),
                         schedule=schedule, seed=self.config["experiment"]["seed"],
                         suppress_on_replay=f["suppress_on_replay"])

    def strategy_config(self, checkpoint_path=None):
        exp, net = self.config["experiment"], self.config["network"]
        try:
            return StrategyConfig(
                kind=str(exp["strategy"]).lower(),
                layers=layer_chain(net["layers"], net["activation"]),
                m=exp["m"],
                n=exp["n"],
                t=exp["t"],
                checkpoint_period=exp["checkpoint_period"],
                checkpoint_path=checkpoint_path,
                learning_rate=float(exp["eta"]),
                faults=self.fault_spec(),
                cost=self.cost_model(),
                uncoded_equal_nodes=exp["uncoded_equal_nodes"],
            )
        except ValueError as e:
            raise ConfigError(str(e)) from e
