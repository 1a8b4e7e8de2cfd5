"""Splittable random streams.

Every random draw in the package comes from a ``numpy.random.Generator``
derived from a root ``SeedSequence`` and an integer key tuple, so results do
not depend on execution order or on how work is spread over processes.
"""
from __future__ import annotations

from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]


def root_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def child_sequence(root: SeedLike, *key: int) -> np.random.SeedSequence:
    """Deterministic child of ``root`` addressed by ``key``."""
    root = root_sequence(root)
    return np.random.SeedSequence(root.entropy,
                                  spawn_key=tuple(root.spawn_key) + tuple(int(k) for k in key))


def keyed_generator(root: SeedLike, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(child_sequence(root, *key)))


class KeyedStreams:
    """Counter-based streams addressed by ``(site, index)``.

    Each site gets a Philox key derived from ``root``; the index goes into the
    counter, so the stream for a given address is the same whatever was drawn
    before.  The returned generator is shared and only valid until the next
    call to :meth:`generator`.
    """

    def __init__(self, root: SeedLike, stream_id: int, n_sites: int):
        self._keys = [child_sequence(root, stream_id, i).generate_state(2, np.uint64)
                      for i in range(n_sites)]
        self._bitgen = np.random.Philox(key=0)
        self._gen = np.random.Generator(self._bitgen)
        self._state = self._bitgen.state

    def generator(self, site: int, index: int) -> np.random.Generator:
        st = self._state
        inner = st["state"]
        inner["key"][:] = self._keys[site]
        inner["counter"][:] = (0, 0, int(index), 0)
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._bitgen.state = st
        return self._gen
