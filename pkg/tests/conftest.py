import pytest
import torch

from dualprior.data.dataset import generate_dataset
from dualprior.data.models import ToyDataset
from dualprior.harness.config import RunConfig, tiny_config


@pytest.fixture
def config(tmp_path) -> RunConfig:
    return tiny_config(output_dir=tmp_path / "run")


@pytest.fixture(scope="session")
def tiny_dataset() -> ToyDataset:
    return generate_dataset(tiny_config().dataset)


@pytest.fixture
def generator() -> torch.Generator:
    return torch.Generator().manual_seed(0)
