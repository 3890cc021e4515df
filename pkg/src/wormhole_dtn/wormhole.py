"""Exposed-mode wormhole: two colluding endpoints joined by a covert tunnel.

Whatever an endpoint receives from a legit node is shipped through the tunnel
and replayed at the far end, which then offers it to its own contacts like
any other relay.  The tunnel is a full-duplex FIFO pipe at a fixed bitrate and
never shows up as a radio contact.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .link import transfer_duration_us


@dataclass(frozen=True)
class WormholePair:
    end_a: int
    end_b: int
    tunnel_bitrate: float

    def __post_init__(self):
        if self.end_a == self.end_b:
            raise ValueError("wormhole endpoints must differ")

    def far_end(self, node: int) -> int:
        if node == self.end_a:
            return self.end_b
        if node == self.end_b:
            return self.end_a
        raise ValueError(f"node {node} is not an endpoint of {self}")


@dataclass(frozen=True)
class ScheduledReplay:
    msg_id: int
    src_end: int
    far_end: int
    done_at: int  # microseconds


@dataclass
class Tunnel:
    """One direction of the covert pipe."""

    pair: WormholePair
    src_end: int
    queue: deque = field(default_factory=deque)
    busy_until: int = 0
    in_flight: ScheduledReplay | None = None

    def push(self, msg, now: int) -> ScheduledReplay | None:
        """Queue ``msg``; returns the replay to schedule if the pipe was idle."""
        self.queue.append(msg)
        if self.in_flight is None:
            return self.start_next(now)
        return None

    def start_next(self, now: int) -> ScheduledReplay | None:
        self.in_flight = None
        if not self.queue:
            return None
        msg = self.queue.popleft()
        self.in_flight = on_capture(self.pair, msg, self.src_end, now)
        return self.in_flight


def on_capture(pair: WormholePair, msg, at_end: int, now: int) -> ScheduledReplay:
    """Schedule the replay of ``msg`` (captured at ``at_end``) at the far end."""
    done = now + transfer_duration_us(msg.size, pair.tunnel_bitrate)
    return ScheduledReplay(msg.id, at_end, pair.far_end(at_end), done)
