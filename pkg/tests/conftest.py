import numpy as np
import pytest

from hitomi import kernels, mlp, synth
from hitomi.formats import (
    DEFAULT_BAND_CENTERS_NM,
    DEFAULT_BAND_FWHM_NM,
    LabelTable,
    MultibandFrame,
)

BACKENDS = ["numpy"] + (["numba"] if kernels.numba_available() else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    with kernels.use_backend(request.param):
        yield request.param


def make_frame(rng, width=8, height=6, bands=4, scale=1.0):
    data = (rng.random((bands, height, width)) * scale).astype(np.float32)
    if bands == 4:
        centers, fwhm = DEFAULT_BAND_CENTERS_NM, DEFAULT_BAND_FWHM_NM
    else:
        centers = np.linspace(450.0, 750.0, bands)
        fwhm = np.full(bands, 25.0)
    return MultibandFrame(data, centers, fwhm)


def make_table(rng, out_dim):
    # at least one entry per category, rest random
    flags = [True, False] + [bool(rng.integers(2)) for _ in range(out_dim - 2)]
    rng.shuffle(flags)
    return LabelTable([f"label_{i}" for i in range(out_dim)], flags)


def make_model(rng, out_dim=None):
    out_dim = out_dim or int(rng.integers(2, 11))
    return mlp.new_model(make_table(rng, out_dim), seed=int(rng.integers(0, 2**31)))


class TrainedSetup:
    def __init__(self):
        self.library = synth.builtin_library()
        self.illuminant = synth.flat_illuminant()
        self.dataset = synth.generate_training_set(
            self.library, self.illuminant, 300, seed=3, noise_sigma=0.01
        )
        self.config = mlp.TrainConfig(seed=3)
        self.model, self.log = mlp.train(self.dataset, self.config)


@pytest.fixture(scope="session")
def trained():
    return TrainedSetup()
