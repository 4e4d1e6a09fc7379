import hypothesis
import numpy as np
import pytest

from atn_evm.evm import OFF, ControllerParams, EvmParams
from atn_evm.io import data_path, load_batch
from atn_evm.network import ring
from atn_evm.simulator import DemandMode, DemandSpec, SimConfig

hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile("default")

CALLING = ControllerParams(EvmParams(f_q=1.0, t_total=1.0), OFF)


@pytest.fixture
def two_station():
    """A <-> B, 100 m each way, one vehicle, A sends everything to B."""
    net = ring(2, 100.0, berths=1)
    demand = DemandSpec((0.0, 0.0), [[0.0, 1.0], [0.0, 0.0]], DemandMode.INFINITE)
    cfg = SimConfig(horizon=100.0, warmup=0.0, dwell_time=0.0, max_velocity=10.0, fleet_size=1, evm_epoch=1.0)
    return net, demand, cfg


@pytest.fixture
def ring3():
    return ring(3, 100.0, berths=3)


@pytest.fixture(scope="session")
def reference_scenario():
    return load_batch(data_path("reference_batch.json"))[0]


def uniform_od(n):
    od = np.full((n, n), 1.0 / (n - 1))
    np.fill_diagonal(od, 0.0)
    return od
