import numpy as np
import pytest
import torch

from ganad.archspec import ArchitectureConfig, build_models
from ganad.data import make_synthetic
from ganad.training import TrainConfig, train

torch.set_num_threads(2)


@pytest.fixture(scope="session")
def synthetic_arch():
    return ArchitectureConfig.for_dataset("synthetic")


@pytest.fixture(scope="session")
def synthetic_splits():
    return make_synthetic(n_normal=300, n_anomalous=60, seed=0)


@pytest.fixture(scope="session")
def bundle(synthetic_arch):
    return build_models(synthetic_arch, seed=0).eval_mode()


@pytest.fixture(scope="session")
def trained(synthetic_arch, synthetic_splits, tmp_path_factory):
    """A briefly trained synthetic model for oracle and scoring tests."""
    out = tmp_path_factory.mktemp("trained_synthetic")
    cfg = TrainConfig(epochs=3, batch_size=64, seed=11)
    result = train(synthetic_splits, synthetic_arch, cfg, out)
    result.bundle.eval_mode()
    return result


@pytest.fixture()
def rng():
    return np.random.RandomState(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
