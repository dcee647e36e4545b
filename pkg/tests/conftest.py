# tests/conftest.py
import os

import pytest

from services.adversary import Fifo
from services.broadcast import BroadcastMode
from services.monitors import MonitorSettings
from services.sim import SimConfig
from services.validity import AlwaysTrue

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCENARIO_DIR = os.path.join(ROOT, "scenarios")


@pytest.fixture
def scenario_path():
    def _path(name):
        return os.path.join(SCENARIO_DIR, f"{name}.json")
    return _path


@pytest.fixture
def reference_config():
    """n=4, t=1, m=1, inputs {0,0,0,9}, node 3 silent"""
    from services.adversary import Silent
    return SimConfig(
        n=4, t=1, m=1, epsilon=1.0,
        inputs=[(0.0,), (0.0,), (0.0,), (9.0,)],
        seed=7,
        adversaries={3: Silent()},
        scheduler=Fifo(),
        predicate=AlwaysTrue(),
    )


def make_config(n, t, m, inputs, epsilon=1.0, seed=7, adversaries=None, scheduler=None,
                predicate=None, broadcast=BroadcastMode.IDEAL, enforce=True, **kwargs):
    return SimConfig(
        n=n, t=t, m=m, epsilon=epsilon,
        inputs=[tuple(float(c) for c in v) for v in inputs],
        seed=seed,
        broadcast=broadcast,
        adversaries=adversaries or {},
        scheduler=scheduler or Fifo(),
        predicate=predicate or AlwaysTrue(),
        monitors=MonitorSettings(enforce=enforce),
        **kwargs,
    )
