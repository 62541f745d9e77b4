import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from evplan import data_path
from evplan.demand import load_demand
from evplan.network import load_network


@pytest.fixture(scope="session")
def cigre_network():
    return load_network(data_path("cigre_mv_14bus.json"))


@pytest.fixture(scope="session")
def cigre_demand(cigre_network):
    return load_demand(data_path("demand_24h.csv"), cigre_network)
