import json

import pytest

from src.cluster.faults import ErrorModel, Injection, SparseUniform, Step
from src.strategies.strategy_manager import StrategyKind
from src.utils.config import ConfigError, ConfigManager


def _write(tmp_path, text):
    path = tmp_path / "experiment.cfg"
    path.write_text(text)
    return str(path)


def test_defaults_without_a_file():
    config = ConfigManager()
    assert config.get("experiment.strategy") == "codenet"
    assert config.get("network.layers") == [784, 100, 100, 10]
    assert config.get("faults.tau_b") == 1000.0
    assert config.get("missing.key", "fallback") == "fallback"


def test_minimal_file_keeps_other_defaults(tmp_path):
    config = ConfigManager(_write(tmp_path, "[experiment]\nstrategy = replication\nm = 3\n"))
    assert config.get("experiment.strategy") == "replication"
    assert config.get("experiment.m") == 3
    assert config.get("experiment.n") == 1
    assert config.strategy_config().kind is StrategyKind.REPLICATION


def test_parses_values_and_comments(tmp_path):
    text = """
# grid
[experiment]
m = 5
n = 4
t = 1
uncoded_equal_nodes = yes
eta = 0.05

[network]
layers = [784, 100, 100, 10]
activation = identity

[faults]
steps = [O1, O2]
"""
    config = ConfigManager(_write(tmp_path, text))
    assert config.get("experiment.uncoded_equal_nodes") is True
    assert config.get("experiment.eta") == 0.05
    assert config.get("faults.steps") == ["O1", "O2"]
    assert config.strategy_config().grid_layout().node_count == 38


def test_t_requires_codenet(tmp_path):
    path = _write(tmp_path, "[experiment]\nstrategy = replication\nt = 1\n")
    with pytest.raises(ConfigError, match="t requires codenet") as err:
        ConfigManager(path)
    assert err.value.key == "experiment.t"
    assert err.value.line == 3


def test_unknown_key_names_its_line(tmp_path):
    with pytest.raises(ConfigError) as err:
        ConfigManager(_write(tmp_path, "[experiment]\nm = 2\n\nwidth = 3\n"))
    assert err.value.line == 4
    assert "experiment.width" in str(err.value) and "line 4" in str(err.value)


@pytest.mark.parametrize("text", [
    "[mystery]\n",
    "m = 2\n",
    "[experiment]\nm\n",
    "[experiment]\nm = two\n",
    "[experiment]\ncheckpoint_period = 0\n",
    "[faults]\np = 1.5\n",
    "[faults]\nnoise = pink\n",
    "[network]\nactivation = relu\n",
    "[faults]\ntau_f = 5.0\ntau_b = 1.0\n",
])
def test_rejects_bad_files(tmp_path, text):
    with pytest.raises(ConfigError):
        ConfigManager(_write(tmp_path, text))


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        ConfigManager("/nonexistent/experiment.cfg")


def test_schedule_becomes_a_fault_spec(tmp_path):
    text = ("[experiment]\nm = 2\nn = 2\nt = 1\n"
            "[faults]\nmodel = adversarial\nschedule = [(3, 1, o1, 0, 0), (4, 2, O3, 1, 1, 1)]\n"
            "noise = sparse\ndensity = 0.5\n")
    config = ConfigManager(_write(tmp_path, text))
    spec = config.fault_spec()
    assert spec.model is ErrorModel.ADVERSARIAL
    assert spec.schedule == [Injection(3, 1, Step.O1, 0, 0), Injection(4, 2, Step.O3, 1, 1, 1)]
    assert isinstance(spec.noise, SparseUniform)


@pytest.mark.parametrize("schedule", ["(1, 1, O1, 0, 0)", "[(1, 1, O1, 0)]", "[(1, 1, C1, 0, 0)]",
                                      "[(x, 1, O1, 0, 0)]"])
def test_bad_schedules(tmp_path, schedule):
    with pytest.raises(ConfigError, match="schedule"):
        ConfigManager(_write(tmp_path, f"[faults]\nschedule = {schedule}\n"))


def test_set_validates(tmp_path):
    config = ConfigManager()
    config.set("experiment.seed", 17)
    assert config.get("experiment.seed") == 17
    with pytest.raises(ConfigError):
        config.set("experiment.colour", "blue")
    with pytest.raises(ConfigError):
        config.set("experiment.m", 0)


def test_save_echoes_json(tmp_path):
    config = ConfigManager()
    path = tmp_path / "config.json"
    config.save(str(path))
    assert json.loads(path.read_text()) == config.config


@pytest.mark.parametrize("key", ["alpha", "beta", "gamma", "tau_f", "tau_b", "tau_cpt", "low", "high", "sigma"])
def test_cost_and_noise_keys_must_be_numbers(tmp_path, key):
    with pytest.raises(ConfigError, match="must be a number") as err:
        ConfigManager(_write(tmp_path, f"[faults]\n{key} = fast\n"))
    assert err.value.key == f"faults.{key}"
    assert err.value.line == 2


@pytest.mark.parametrize("text", ["[faults]\nlow = 3\nhigh = 1\n", "[faults]\nsigma = -1\n",
                                  "[network]\ninit_scale = 0\n", "[network]\ninit_scale = wide\n"])
def test_rejects_bad_noise_and_init_ranges(tmp_path, text):
    with pytest.raises(ConfigError):
        ConfigManager(_write(tmp_path, text))
