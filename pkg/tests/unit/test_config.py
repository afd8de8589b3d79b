"""Unit tests for configuration module."""

import os
import tempfile

import pytest

from lvrt_pinn.config import load_config, parse_config
from lvrt_pinn.errors import ConfigError


@pytest.fixture
def valid_config_toml():
    """Valid configuration TOML content."""
    return """
seed = 7

[converter]
T_m = 0.1
P_ext = 0.7

[grid]
delta_T_values = [0.1, 0.2]
delta_V_values = [0.3, 0.5]
dt = 0.01
horizon = 0.5

[training]
hidden_widths = [10, 10]
epochs = 50

[loss]
lambda_f = 0.5

[milp]
bounds_source = "interval"
node_limit = 5000

[analysis]
epsilons = [0.0]
record_timing = false

[logging]
level = "debug"
"""


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    """Remove LVRT_* variables of the calling shell."""
    for key in list(os.environ):
        if key.startswith("LVRT_"):
            monkeypatch.delenv(key)


def write_toml(text: str) -> str:
    with tempfile.NamedTemporaryFile(mode="w", suffix=".toml", delete=False) as f:
        f.write(text)
        return f.name


def test_defaults_without_file():
    """Test that no file gives the default configuration."""
    config = load_config()

    assert config.seed == 0
    assert config.converter.V_int == 0.7
    assert config.grid.n_trajectories == 40
    assert config.milp.bounds_source == "lp-tightened"
    assert config.milp.node_limit == 1_000_000
    assert config.logging.level == "INFO"


def test_load_valid_config(valid_config_toml):
    """Test loading a valid configuration file."""
    config_path = write_toml(valid_config_toml)
    try:
        config = load_config(config_path)

        assert config.seed == 7
        assert config.converter.T_m == 0.1
        assert config.converter.P_ext == 0.7
        assert config.grid.n_trajectories == 4
        assert config.training.hidden_widths == (10, 10)
        assert config.training.epochs == 50
        # Loss weights and seed flow into the training section
        assert config.training.weights.lambda_f == 0.5
        assert config.training.seed == 7
        assert config.milp.bounds_source == "interval"
        assert config.milp.node_limit == 5000
        assert config.analysis.epsilons == (0.0,)
        assert config.analysis.record_timing is False
        assert config.logging.level == "DEBUG"
    finally:
        os.unlink(config_path)


def test_missing_config_file():
    """Test error when config file doesn't exist."""
    with pytest.raises(FileNotFoundError):
        load_config("nonexistent_config.toml")


def test_invalid_toml():
    """Test that a syntax error becomes a ConfigError."""
    config_path = write_toml("[milp\nnode_limit = 3\n")
    try:
        with pytest.raises(ConfigError):
            load_config(config_path)
    finally:
        os.unlink(config_path)


@pytest.mark.parametrize(
    "data",
    [
        {"solver": {"name": "x"}},
        {"milp": {"node_limt": 10}},
        {"milp": {"node_limit": "many"}},
        {"milp": {"node_limit": 0}},
        {"converter": {"V_int": 0.1, "V_min": 0.2}},
        {"analysis": {"record_timing": 1}},
        {"training": {"seed": 3}},
        {"milp": 5},
    ],
)
def test_invalid_values_raise_config_error(data):
    """Test unknown sections and fields, wrong types and violated invariants."""
    with pytest.raises(ConfigError):
        parse_config(data)


# ============================================================================
# Environment overrides
# ============================================================================


def test_env_overrides_file_values(monkeypatch, valid_config_toml):
    """Test that LVRT_<SECTION>__<FIELD> wins over the file."""
    monkeypatch.setenv("LVRT_MILP__NODE_LIMIT", "250")
    monkeypatch.setenv("LVRT_ANALYSIS__EPSILONS", "0.0, 0.05")
    monkeypatch.setenv("LVRT_ANALYSIS__RECORD_TIMING", "true")
    config_path = write_toml(valid_config_toml)
    try:
        config = load_config(config_path)
    finally:
        os.unlink(config_path)

    assert config.milp.node_limit == 250
    assert config.analysis.epsilons == (0.0, 0.05)
    assert config.analysis.record_timing is True


def test_env_overrides_mixed_case_fields(monkeypatch):
    """Test that upper-cased variables reach fields like T_m and delta_V_start."""
    monkeypatch.setenv("LVRT_CONVERTER__T_M", "0.05")
    monkeypatch.setenv("LVRT_CONVERTER__V_INT", "0.75")
    monkeypatch.setenv("LVRT_ANALYSIS__DELTA_V_START", "0.25")
    monkeypatch.setenv("LVRT_GRID__DELTA_V_VALUES", "0.3, 0.5")

    config = load_config()

    assert config.converter.T_m == pytest.approx(0.05)
    assert config.converter.V_int == pytest.approx(0.75)
    assert config.analysis.delta_V_start == pytest.approx(0.25)
    assert config.grid.delta_V_values == (0.3, 0.5)


def test_env_unknown_field(monkeypatch):
    """Test that an override naming no field is refused."""
    monkeypatch.setenv("LVRT_CONVERTER__T_X", "0.05")

    with pytest.raises(ConfigError, match="t_x"):
        load_config()


def test_env_log_level_and_seed(monkeypatch):
    """Test the LVRT_LOG_LEVEL and LVRT_SEED shortcuts."""
    monkeypatch.setenv("LVRT_LOG_LEVEL", "warning")
    monkeypatch.setenv("LVRT_SEED", "11")

    config = load_config()

    assert config.logging.level == "WARNING"
    assert config.seed == 11
    assert config.training.seed == 11


def test_env_unknown_section(monkeypatch):
    """Test that an override for an unknown section is refused."""
    monkeypatch.setenv("LVRT_SOLVER__THREADS", "4")

    with pytest.raises(ConfigError):
        load_config()


def test_env_bad_boolean(monkeypatch):
    """Test that an unparseable boolean override is refused."""
    monkeypatch.setenv("LVRT_ANALYSIS__RECORD_TIMING", "maybe")

    with pytest.raises(ConfigError):
        load_config()


# ============================================================================
# Derived values
# ============================================================================


def test_default_delta_V_grid():
    """Test the 0.2:0.01:0.8 sweep grid."""
    grid = load_config().analysis.delta_V_grid()

    assert len(grid) == 61
    assert grid[0] == 0.2
    assert grid[-1] == 0.8
    assert grid[30] == 0.5


def test_snapshot_is_plain_data():
    """Test that the snapshot holds only lists, dicts and scalars."""
    snapshot = load_config().snapshot()

    assert set(snapshot) >= {"converter", "grid", "training", "milp", "analysis", "seed"}
    assert "weights" not in snapshot["training"]
    assert isinstance(snapshot["analysis"]["epsilons"], list)
    assert snapshot["milp"]["bounds_source"] == "lp-tightened"
