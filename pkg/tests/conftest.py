import logging

import pytest

from uavfleet.scenario import ScenarioConfig, generate_scenario

logging.getLogger("uavfleet.routing").setLevel(logging.ERROR)


@pytest.fixture
def small_config():
    return ScenarioConfig(n_tasks=6, n_uavs=2, n_stations=2)


@pytest.fixture
def small_scenario(small_config):
    return generate_scenario(small_config, seed=7)


@pytest.fixture
def desk_config():
    return ScenarioConfig(n_tasks=30, n_uavs=4, n_stations=2)


@pytest.fixture
def desk_scenario(desk_config):
    return generate_scenario(desk_config, seed=0)
