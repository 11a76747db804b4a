import pytest

from paramguide.model import bundled_config_path, load_config, reference_device


@pytest.fixture(scope="session")
def device():
    return reference_device()


@pytest.fixture(scope="session")
def lossless(device):
    return device.lossless()


@pytest.fixture(scope="session")
def qpump_loaded():
    return load_config(bundled_config_path("paper_qpump.json"))
