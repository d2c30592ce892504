import pytest

from mpsim.topology import load_topology, preset

# Idealized mesh: unit-free bandwidths, zero latency; closed-form checks
# need exact transfer laws without latency terms.
IDEAL_MESH = """
name ideal
[device]
0 accelerator
1 accelerator
2 accelerator
3 accelerator
[link]
0 1 1e9 0 full 1
0 2 1e9 0 full 1
0 3 1e9 0 full 1
1 2 1e9 0 full 1
1 3 1e9 0 full 1
2 3 1e9 0 full 1
[hostlink]
0 0.5e9 0 half
1 0.5e9 0 half
2 0.5e9 0 half
3 0.5e9 0 half
"""


@pytest.fixture(scope="session")
def ideal():
    return load_topology(IDEAL_MESH)


@pytest.fixture(scope="session")
def beluga():
    return preset("beluga")


@pytest.fixture(scope="session")
def narval():
    return preset("narval")
