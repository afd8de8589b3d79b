"""Pytest configuration and fixtures."""

import gc

import numpy as np
import pytest

from lvrt_pinn.dataset import GridSpec, generate_training_set
from lvrt_pinn.dynamics import OUTPUT_NAMES, ConverterParams
from lvrt_pinn.pinn import AffineScaling, MlpModel


@pytest.fixture(scope="module", autouse=True)
def cleanup_after_module():
    """Ensure proper cleanup after each test module."""
    yield
    # Force garbage collection to release torch tensors between modules
    gc.collect()
    gc.collect()


@pytest.fixture
def params():
    """Default converter parameters."""
    return ConverterParams()


@pytest.fixture
def small_grid():
    """Coarse 2 x 2 disturbance grid with a short horizon."""
    return GridSpec(
        delta_T_values=(0.1, 0.2),
        delta_V_values=(0.3, 0.5),
        dt=0.01,
        horizon=0.5,
        stride=5,
    )


@pytest.fixture
def small_training_set(small_grid, params):
    """Training set simulated on the coarse grid with 64 collocation points."""
    return generate_training_set(small_grid, params, n_collocation=64, seed=3)


def _make_model(hidden_widths=(6, 5), seed=0, box=None) -> MlpModel:
    """Random ReLU network over the default training box with identity output scaling."""
    rng = np.random.default_rng(seed)
    box = box or GridSpec().box()
    widths = (3, *hidden_widths, len(OUTPUT_NAMES))
    weights = [
        rng.normal(size=(n_out, n_in)) / np.sqrt(n_in)
        for n_in, n_out in zip(widths[:-1], widths[1:], strict=True)
    ]
    biases = [rng.normal(scale=0.3, size=n_out) for n_out in widths[1:]]
    return MlpModel(
        weights=weights,
        biases=biases,
        input_scaling=AffineScaling.from_box(box),
        output_scaling=AffineScaling.identity(len(OUTPUT_NAMES)),
    )


@pytest.fixture
def small_model():
    """Random 3-6-5-14 network."""
    return _make_model()


@pytest.fixture
def model_factory():
    """Builder of random networks: ``model_factory(hidden_widths, seed)``."""
    return _make_model
