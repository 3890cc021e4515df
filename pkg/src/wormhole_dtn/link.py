"""Radio contacts, node buffers and transfer timing.

Radio rule: legit/legit pairs connect within ``min`` of their ranges; any
pair involving one wormhole endpoint connects within the wormhole range, so the
strong attacker radio reaches legit nodes that cannot hear each other.
Wormhole endpoints never form radio contacts with each other: the attacker
moves traffic only through the tunnel of each pair.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .trace import US


class BufferOverflow(ValueError):
    """Message larger than the whole buffer."""


class Buffer:
    """FIFO store: when space runs out the oldest-received message goes first."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.used = 0
        self._msgs: OrderedDict[int, object] = OrderedDict()

    def __contains__(self, msg_id: int) -> bool:
        return msg_id in self._msgs

    def __len__(self) -> int:
        return len(self._msgs)

    def __iter__(self):
        return iter(list(self._msgs.values()))

    def get(self, msg_id: int):
        return self._msgs.get(msg_id)

    def ids(self) -> set[int]:
        return set(self._msgs)

    def free(self) -> int:
        return self.capacity - self.used

    def enqueue(self, msg, pinned: Iterable[int] = ()) -> list:
        """Store ``msg``, evicting oldest first; returns the evicted messages.

        Messages in ``pinned`` are skipped during eviction if anything else can
        go.  Raises :class:`BufferOverflow` if ``msg`` can never fit.
        """
        if msg.size > self.capacity:
            raise BufferOverflow(f"message {msg.id} ({msg.size} B) exceeds capacity {self.capacity}")
        evicted = []
        if self.used + msg.size > self.capacity:
            pinned = set(pinned)
            order = [m for m in self._msgs.values() if m.id not in pinned]
            order += [m for m in self._msgs.values() if m.id in pinned]
            for old in order:
                if self.used + msg.size <= self.capacity:
                    break
                self.remove(old.id)
                evicted.append(old)
        self._msgs[msg.id] = msg
        self.used += msg.size
        return evicted

    def remove(self, msg_id: int):
        msg = self._msgs.pop(msg_id)
        self.used -= msg.size
        return msg

    def replace(self, msg) -> None:
        """Swap in an updated copy of a resident message (same size)."""
        self._msgs[msg.id] = msg


def enqueue(buffer: Buffer, msg) -> Buffer:
    buffer.enqueue(msg)
    return buffer


def transfer_duration_us(size: int, bitrate: float) -> int:
    """Transfer time of ``size`` bytes at ``bitrate`` B/s, rounded up to 1 us."""
    return max(1, math.ceil(size * US / bitrate))


@dataclass
class Transfer:
    msg_id: int
    src: int
    dst: int
    done_at: int
    token: int


@dataclass
class Contact:
    a: int
    b: int
    up_since: int
    bitrate: float
    active: Transfer | None = None
    turn: int = 0  # endpoint offered the next slot: 0 -> a, 1 -> b
    tunnel: bool = False

    def other(self, node: int) -> int:
        return self.b if node == self.a else self.a


def range_matrix(ranges: Mapping[int, float], wormholes: Iterable[int] = (),
                 partners: Iterable[tuple[int, int]] = ()) -> np.ndarray:
    """Pairwise connection radius; negative entries never connect."""
    n = len(ranges)
    r = np.array([ranges[i] for i in range(n)], dtype=float)
    radius = np.minimum.outer(r, r)
    is_w = np.zeros(n, dtype=bool)
    for w in wormholes:
        is_w[w] = True
    mixed = np.logical_xor.outer(is_w, is_w)
    radius[mixed] = np.maximum.outer(r, r)[mixed]
    radius[np.logical_and.outer(is_w, is_w)] = -1.0
    for a, b in partners:
        radius[a, b] = radius[b, a] = -1.0
    np.fill_diagonal(radius, -1.0)
    return radius


def adjacency(pos: np.ndarray, radius: np.ndarray) -> np.ndarray:
    diff = pos[:, None, :] - pos[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    return (d2 <= radius * np.abs(radius)) & (radius >= 0)


def detect_contacts(
    positions: Mapping[int, tuple[float, float]],
    ranges: Mapping[int, float],
    previous: set[tuple[int, int]] = frozenset(),
    wormholes: Iterable[int] = (),
    partners: Iterable[tuple[int, int]] = (),
) -> tuple[set[tuple[int, int]], set[tuple[int, int]]]:
    """Return ``(up, down)`` pair sets relative to ``previous`` (pairs as ``a < b``)."""
    n = len(positions)
    if n == 0:
        return set(), set(previous)
    pos = np.array([positions[i] for i in range(n)], dtype=float)
    adj = adjacency(pos, range_matrix(ranges, wormholes, partners))
    ii, jj = np.nonzero(np.triu(adj, 1))
    now = set(zip(ii.tolist(), jj.tolist()))
    return now - previous, previous - now


class ContactTracker:
    """Incremental version of :func:`detect_contacts` over a fixed population."""

    def __init__(self, radius: np.ndarray):
        self.radius = radius
        self.r2 = radius * np.abs(radius)
        self.valid = np.triu(radius >= 0, 1)
        self.adj = np.zeros_like(self.valid)

    def update(self, pos: np.ndarray) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
        dx = pos[:, 0, None] - pos[None, :, 0]
        dy = pos[:, 1, None] - pos[None, :, 1]
        adj = (dx * dx + dy * dy <= self.r2) & self.valid
        changed = adj ^ self.adj
        if not changed.any():
            return [], []
        ii, jj = np.nonzero(changed)
        up, down = [], []
        for i, j in zip(ii.tolist(), jj.tolist()):
            (up if adj[i, j] else down).append((i, j))
        self.adj = adj
        return up, down
