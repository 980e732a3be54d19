import numpy as np
import pytest
import torch

torch.set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def tiny_dataset():
    """Small planted-subgraph dataset shared across fast tests."""
    from graphib import SyntheticConfig, generate_synthetic

    cfg = SyntheticConfig(n_rois=8, n_per_class=10, planted_edges=4,
                          effect_size=1.5, noise_sd=1.0, seed=5)
    return generate_synthetic(cfg)
