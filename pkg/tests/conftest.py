"""Shared fixtures: keys, preset graphs and a few small reusable traces.

Session scope is used for anything deterministic and immutable so the suite
does not rebuild identical structures hundreds of times.
"""

from __future__ import annotations

import pytest

from mgxsim.replay import derive_keys
from mgxsim.workloads import load_preset


@pytest.fixture(scope="session")
def keys():
    return derive_keys(0)


@pytest.fixture(scope="session")
def enc_key(keys):
    return keys[0]


@pytest.fixture(scope="session")
def mac_key(keys):
    return keys[1]


@pytest.fixture(scope="session")
def micro_graph():
    return load_preset("micro")


@pytest.fixture(scope="session")
def lenet_graph():
    return load_preset("lenet")
