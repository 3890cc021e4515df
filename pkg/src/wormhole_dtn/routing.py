"""Epidemic, binary Spray-and-Wait, PRoPHET and First Contact forwarding.

The module-level functions are the per-contact decision rules.  The
:class:`Router` subclasses wrap them for the engine: ``candidates`` yields the
messages a sender would hand to a peer, in priority order (messages destined
to the peer first, then oldest first), and ``handover`` decides at transfer
completion how many copies move and how many stay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .config import Protocol


class Message:
    """One node's copy of a bundle.  ``copies`` is the Spray-and-Wait budget."""

    __slots__ = ("id", "src", "dst", "size", "created_at", "copies", "hops")

    def __init__(self, id, src, dst, size, created_at, copies=1, hops=None):
        self.id = id
        self.src = src
        self.dst = dst
        self.size = size
        self.created_at = created_at
        self.copies = copies
        self.hops = (src,) if hops is None else tuple(hops)

    def forwarded(self, to: int, copies: int) -> Message:
        return Message(self.id, self.src, self.dst, self.size, self.created_at, copies, self.hops + (to,))

    def __repr__(self):
        return f"Message(id={self.id}, {self.src}->{self.dst}, copies={self.copies}, hops={self.hops})"


# --- decision rules ---------------------------------------------------------

def on_contact_epidemic(buffer: Iterable[Message], peer_summary: set[int]) -> list[Message]:
    """Anti-entropy: every resident message the peer does not have."""
    return [m for m in buffer if m.id not in peer_summary]


def on_contact_first_contact(buffer: Iterable[Message], peer: int) -> list[Message]:
    """Single copy: hand everything over unless the message already visited ``peer``."""
    return [m for m in buffer if peer not in m.hops]


@dataclass(frozen=True)
class SprayDecision:
    forward: bool
    give: int = 0
    keep: int = 0
    deliver: bool = False


def on_contact_spray_wait(msg: Message, peer: int) -> SprayDecision:
    if peer == msg.dst:
        return SprayDecision(True, give=1, keep=msg.copies, deliver=True)
    if msg.copies > 1:
        give = msg.copies // 2
        return SprayDecision(True, give=give, keep=msg.copies - give)
    return SprayDecision(False, keep=msg.copies)


@dataclass(frozen=True)
class ProphetParams:
    p_init: float = 0.75
    beta: float = 0.25
    gamma: float = 0.98
    aging_unit: float = 30.0


@dataclass(frozen=True)
class ProphetTable:
    P: Mapping[int, float] = field(default_factory=dict)
    last_aged: float = 0.0

    def aged(self, now: float, params: ProphetParams = ProphetParams()) -> ProphetTable:
        if now <= self.last_aged:
            return self
        k = params.gamma ** ((now - self.last_aged) / params.aging_unit)
        return ProphetTable({n: p * k for n, p in self.P.items()}, now)

    def get(self, node: int, now: float | None = None, params: ProphetParams = ProphetParams()) -> float:
        p = self.P.get(node, 0.0)
        if now is not None and now > self.last_aged and p:
            p *= params.gamma ** ((now - self.last_aged) / params.aging_unit)
        return p


def prophet_update(
    self_table: ProphetTable,
    self_id: int,
    peer: int,
    peer_table: ProphetTable,
    now: float,
    params: ProphetParams = ProphetParams(),
) -> ProphetTable:
    """Encounter update: age, reinforce the peer, then transitive entries."""
    table = self_table.aged(now, params)
    P = dict(table.P)
    old = P.get(peer, 0.0)
    P[peer] = old + (1.0 - old) * params.p_init
    p_peer = P[peer]
    for c, pc in peer_table.P.items():
        if c in (self_id, peer):
            continue
        P[c] = max(P.get(c, 0.0), p_peer * pc * params.beta)
    return ProphetTable(P, now)


def forged_table(nodes: Iterable[int], now: float) -> ProphetTable:
    """What a wormhole endpoint advertises: certain delivery to everyone."""
    return ProphetTable({n: 1.0 for n in nodes}, now)


# --- engine-facing routers ---------------------------------------------------

class Router:
    protocol: Protocol
    initial_copies = 1

    def __init__(self, cfg):
        self.cfg = cfg

    def candidates(self, sender, receiver, now: float) -> Iterator[Message]:
        raise NotImplementedError

    def handover(self, msg: Message, receiver: int) -> tuple[int, int] | None:
        """``(copies_to_receiver, copies_kept)`` at completion, or None if stale."""
        return (1, msg.copies)

    def tunnel_handover(self, msg: Message) -> tuple[int, int]:
        return (1, msg.copies)

    def on_contact(self, a, b, now: float) -> None:
        pass


def _lacks(receiver, msg_id: int) -> bool:
    return msg_id not in receiver.buffer and msg_id not in receiver.delivered and msg_id not in receiver.incoming


def _offers(sender, receiver, accept) -> Iterator[Message]:
    """Lazily yield acceptable messages the receiver lacks, deliverable ones first."""
    msgs = list(sender.buffer)
    rid = receiver.id
    for m in msgs:
        if m.dst == rid and _lacks(receiver, m.id) and accept(m):
            yield m
    for m in msgs:
        if m.dst != rid and _lacks(receiver, m.id) and accept(m):
            yield m


def _always(_m) -> bool:
    return True


class EpidemicRouter(Router):
    protocol = Protocol.EPIDEMIC

    def candidates(self, sender, receiver, now):
        return _offers(sender, receiver, _always)


class FirstContactRouter(Router):
    protocol = Protocol.FIRST_CONTACT

    def candidates(self, sender, receiver, now):
        rid = receiver.id
        return _offers(sender, receiver, lambda m: rid not in m.hops)

    def handover(self, msg, receiver):
        return (1, 0)

    def tunnel_handover(self, msg):
        return (1, 0)


class SprayAndWaitRouter(Router):
    protocol = Protocol.SPRAY_AND_WAIT

    def __init__(self, cfg):
        super().__init__(cfg)
        self.initial_copies = cfg.spray_copies

    def candidates(self, sender, receiver, now):
        rid = receiver.id
        return _offers(sender, receiver, lambda m: m.dst == rid or m.copies > 1)

    def handover(self, msg, receiver):
        d = on_contact_spray_wait(msg, receiver)
        if not d.forward:
            return None
        return (d.give, d.keep)

    def tunnel_handover(self, msg):
        # the single last copy crosses whole; larger budgets split as a spray
        if msg.copies <= 1:
            return (msg.copies, 0)
        give = msg.copies // 2
        return (give, msg.copies - give)


class ProphetRouter(Router):
    protocol = Protocol.PROPHET

    def __init__(self, cfg):
        super().__init__(cfg)
        self.params = ProphetParams(cfg.prophet_p_init, cfg.prophet_beta, cfg.prophet_gamma, cfg.prophet_aging_unit)
        self._forged = forged_table(range(cfg.num_nodes), math.inf)

    def advertised(self, node, now):
        return self._forged if node.is_wormhole else node.prophet

    def on_contact(self, a, b, now):
        ta, tb = self.advertised(a, now), self.advertised(b, now)
        a.prophet = prophet_update(a.prophet, a.id, b.id, tb, now, self.params)
        b.prophet = prophet_update(b.prophet, b.id, a.id, ta, now, self.params)

    def _decay(self, table: ProphetTable, now: float) -> float:
        if now <= table.last_aged:
            return 1.0
        return self.params.gamma ** ((now - table.last_aged) / self.params.aging_unit)

    def candidates(self, sender, receiver, now):
        # GRTR: forward when the peer is the better carrier for the destination
        # a wormhole advertises the forged table but decides with its real one
        peer, own = self.advertised(receiver, now), sender.prophet
        kp, ko = self._decay(peer, now), self._decay(own, now)
        pp, po, rid = peer.P, own.P, receiver.id
        return _offers(
            sender, receiver,
            lambda m: m.dst == rid or pp.get(m.dst, 0.0) * kp > po.get(m.dst, 0.0) * ko,
        )


ROUTERS = {
    Protocol.EPIDEMIC: EpidemicRouter,
    Protocol.FIRST_CONTACT: FirstContactRouter,
    Protocol.SPRAY_AND_WAIT: SprayAndWaitRouter,
    Protocol.PROPHET: ProphetRouter,
}


def make_router(cfg) -> Router:
    return ROUTERS[cfg.routing_protocol](cfg)
