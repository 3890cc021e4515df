"""Seeded random streams.

Every run derives independent PCG64 generators from ``numpy.random.SeedSequence(seed)``:
one for scenario setup, one for traffic generation, and one per node for its
waypoint draws.  Per-node streams make mobility independent of the order in
which nodes are advanced.
"""

from __future__ import annotations

import numpy as np

SETUP, TRAFFIC = 0, 1
_FIRST_NODE = 2


class Rng:
    def __init__(self, seed: int, num_nodes: int):
        self.seed = seed
        children = np.random.SeedSequence(seed).spawn(num_nodes + _FIRST_NODE)
        self._streams = [np.random.Generator(np.random.PCG64(s)) for s in children]

    @property
    def setup(self) -> np.random.Generator:
        return self._streams[SETUP]

    @property
    def traffic(self) -> np.random.Generator:
        return self._streams[TRAFFIC]

    def node(self, i: int) -> np.random.Generator:
        return self._streams[_FIRST_NODE + i]
