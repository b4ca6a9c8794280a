import pytest

from triagekit.dkg import default_config


@pytest.fixture(scope="session")
def dkg_config():
    return default_config()
