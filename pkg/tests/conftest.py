import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sdconsensus import Gains, Topology, build_topology
from sdconsensus.cli import REFERENCE_EDGES, REFERENCE_N


@pytest.fixture(scope="session")
def ref_topology() -> Topology:
    """The bundled 6-agent benchmark graph."""
    return build_topology(REFERENCE_N, REFERENCE_EDGES)


@pytest.fixture(scope="session")
def ref_gains() -> Gains:
    return Gains(k_p=1.0, k_d=2.0)
