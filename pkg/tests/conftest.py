import numpy as np
import pytest

from crossvid import kernels
from crossvid.databank import FeatureBank, save_bank
from crossvid.synth import SynthConfig, generate_planted_bank


@pytest.fixture(params=sorted(kernels.available_backends()))
def kernel_backend(request):
    """Run a test once per available kernel lane, restoring the default."""
    prev = kernels.use_backend(request.param)
    yield kernels.active
    kernels.active = prev


@pytest.fixture
def tiny_bank():
    cfg = SynthConfig(n=6, d=8, k=2, n_frames=2, n_tag_variants=3,
                      noise_sigma=0.05, seed=11)
    bank, _ = generate_planted_bank(cfg)
    return bank


@pytest.fixture
def tiny_bank_dir(tmp_path, tiny_bank):
    save_bank(tiny_bank, tmp_path / "bank")
    return tmp_path / "bank"


def make_bank(n=4, d=8, k=2, n_frames=2, r=2, seed=0):
    cfg = SynthConfig(n=n, d=d, k=k, n_frames=n_frames, n_tag_variants=r,
                      noise_sigma=0.1, seed=seed)
    bank, _ = generate_planted_bank(cfg)
    return bank
