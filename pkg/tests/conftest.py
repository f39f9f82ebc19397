import pytest

from rismac import build_threshold_table, default_config


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def table(cfg):
    return build_threshold_table(cfg)
