"""End-to-end pipeline at desk scale.

Runs every stage through the CLI on a 2 x 2 disturbance grid:
gen-data -> train -> bounds -> boundary / power-boundary -> ground-truth -> compare.
"""

import json

import pytest
from typer.testing import CliRunner

from lvrt_pinn.analysis import read_curve
from lvrt_pinn.cli import app
from lvrt_pinn.dataset import GridSpec, read_set
from lvrt_pinn.milp import read_bounds
from lvrt_pinn.pinn import load_model, model_hash, save_model

pytestmark = pytest.mark.slow

runner = CliRunner()


@pytest.fixture
def workspace(tmp_path):
    """Desk-scale configuration and its directory."""
    config = tmp_path / "config.toml"
    config.write_text(
        f"""
seed = 1

[grid]
delta_T_values = [0.1, 0.2]
delta_V_values = [0.3, 0.5]
dt = 0.01
stride = 10

[collocation]
n_points = 64

[training]
hidden_widths = [6]
epochs = 3
batch_size = 16
collocation_batch_size = 16

[milp]
bounds_source = "lp-tightened"

[analysis]
epsilons = [0.0]
mus = [0.5]
delta_V_start = 0.3
delta_V_stop = 0.5
delta_V_step = 0.1
ground_truth_tol = 1e-3
record_timing = false

[paths]
data_dir = "{tmp_path / 'data'}"
model = "{tmp_path / 'model.json'}"
bounds = "{tmp_path / 'bounds.csv'}"
output_dir = "{tmp_path / 'results'}"

[logging]
level = "WARNING"
"""
    )
    return tmp_path, config


def run(config, *args):
    result = runner.invoke(app, [*args, "--config", str(config)])
    assert result.exit_code == 0, result.output
    return result


def test_full_pipeline(workspace):
    """Test every stage in order and the files each one leaves behind."""
    root, config = workspace

    run(config, "gen-data")
    training_set = read_set(root / "data")
    assert training_set.N == 4 * 11
    assert training_set.N_c == 64

    run(config, "train")
    model = load_model(root / "model.json")
    assert model.widths == (3, 6, 14)
    assert (root / "model_history.csv").exists()

    run(config, "bounds")
    bounds = read_bounds(root / "bounds.csv")
    assert bounds.source == "lp-tightened"
    assert bounds.model_hash == model_hash(model)

    run(config, "boundary")
    lvrt = read_curve(root / "results" / "lvrt_eps_0.csv")
    assert len(lvrt) == 3
    assert lvrt.metadata["model_hash"] == model_hash(model)
    assert all(p.solve_ms == 0.0 for p in lvrt.points)

    run(config, "power-boundary")
    power = read_curve(root / "results" / "power_mu_0.5.csv")
    assert power.kind == "power"
    assert set(power.statuses) <= {"optimal", "never-critical", "infeasible"}

    run(config, "ground-truth")
    truth_path = root / "results" / "ground_truth_lvrt.csv"
    truth = read_curve(truth_path)
    assert truth.statuses == ["never-critical", "optimal", "optimal"]
    assert truth.delta_T[1] == pytest.approx(0.125 * 1.3862943611198906, abs=2e-3)

    result = run(config, "compare", "--predicted", str(truth_path), "--reference", str(truth_path))
    assert "n_common=2 max_abs=0 " in result.output


def test_boundary_files_are_reproducible(workspace, model_factory):
    """Test that two sweeps without timing write byte-identical files."""
    root, config = workspace
    box = GridSpec((0.1, 0.2), (0.3, 0.5), dt=0.01).box()
    save_model(model_factory(hidden_widths=(5, 4), seed=3, box=box), root / "model.json")
    first, second = root / "first.csv", root / "second.csv"

    run(config, "boundary", "--eps", "0.0", "-o", str(first))
    run(config, "boundary", "--eps", "0.0", "-o", str(second))

    assert first.read_bytes() == second.read_bytes()
    assert json.loads(first.with_suffix(".json").read_text()) == json.loads(
        second.with_suffix(".json").read_text()
    )
