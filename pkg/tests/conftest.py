import numpy as np
import pytest

from vlcsim.channel import RoomConfig, resample_cir, simulate_impulse_response


@pytest.fixture(scope="session")
def default_room():
    return RoomConfig()


@pytest.fixture(scope="session")
def traced_cir(default_room):
    # the full-depth trace shared by the experiment-level tests
    return simulate_impulse_response(default_room, 3, patch_size=0.2,
                                     time_resolution=1e-9)


@pytest.fixture(scope="session")
def link_taps(traced_cir):
    gains = resample_cir(traced_cir, 1e-8).gains
    return gains / gains.sum()


def rng_for(*entropy):
    return np.random.default_rng(np.random.SeedSequence(list(entropy)))
