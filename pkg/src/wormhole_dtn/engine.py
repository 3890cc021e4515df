"""Discrete-event engine for one scenario run.

Events are ordered by ``(time, kind, insertion sequence)``.  Mobility and
contact sampling happen on ``TICK`` events every ``cfg.tick`` seconds;
transfers complete at their exact (microsecond) time.  Auditor reports and
detector runs are scheduled at the audit cadence and see every record up to
and including their own timestamp.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from enum import IntEnum

from .config import ScenarioConfig, dump_config
from .detector import DetectionReport, make_detector
from .link import Buffer, BufferOverflow, Contact, ContactTracker, Transfer, range_matrix, transfer_duration_us
from .mobility import MobilityField, init_positions
from .rng import Rng
from .routing import Message, ProphetTable, make_router
from .trace import US, EventTrace, to_us
from .wormhole import Tunnel, WormholePair


class EventKind(IntEnum):
    TICK = 0
    MESSAGE_CREATE = 1
    TRANSFER_COMPLETE = 2
    REPORT_TO_TPA = 3
    DETECTOR_RUN = 4


@dataclass(order=True)
class SimEvent:
    time: int
    kind: EventKind
    seq: int
    payload: object = field(default=None, compare=False)


@dataclass
class NodeState:
    id: int
    is_wormhole: bool
    radio_range: float
    buffer: Buffer
    delivered: set = field(default_factory=set)
    incoming: set = field(default_factory=set)
    outgoing: dict = field(default_factory=dict)  # msg id -> active sends
    contacts: dict = field(default_factory=dict)  # peer id -> Contact
    prophet: ProphetTable = field(default_factory=ProphetTable)
    partner: int | None = None


class Simulation:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg.validate()
        self.rng = Rng(cfg.rng_seed, cfg.num_nodes)
        self.router = make_router(cfg)
        self.trace = EventTrace(config_text=dump_config(cfg))
        self.now = 0
        self._queue: list[tuple] = []
        self._seq = itertools.count()
        self._msg_ids = itertools.count()
        self._tokens = itertools.count()
        self.pairs: list[WormholePair] = []
        self.nodes: list[NodeState] = []
        L = cfg.num_legit_nodes
        for i in range(cfg.num_nodes):
            w = i >= L
            self.nodes.append(NodeState(
                i, w,
                cfg.wormhole_radio_range if w else cfg.legit_radio_range,
                Buffer(cfg.wormhole_buffer if w else cfg.legit_buffer),
            ))
        self.tunnels: dict[int, Tunnel] = {}
        for k in range(cfg.num_wormhole_pairs):
            a, b = L + 2 * k, L + 2 * k + 1
            pair = WormholePair(a, b, cfg.wormhole_tunnel_bitrate)
            self.pairs.append(pair)
            self.nodes[a].partner, self.nodes[b].partner = b, a
            self.tunnels[a] = Tunnel(pair, a)
            self.tunnels[b] = Tunnel(pair, b)
        self.trace.wormhole_pairs = [(p.end_a, p.end_b) for p in self.pairs]
        self.mobility = MobilityField(init_positions(cfg, self.rng), self.rng)
        radius = range_matrix(
            {n.id: n.radio_range for n in self.nodes},
            wormholes=[n.id for n in self.nodes if n.is_wormhole],
            partners=[(p.end_a, p.end_b) for p in self.pairs],
        )
        self.contacts = ContactTracker(radius)
        self.detector = make_detector(cfg, cfg.detector_params, self.trace.wormhole_pairs)
        self._fed = 0
        self.end = to_us(cfg.sim_duration)
        self.tick = to_us(cfg.tick)
        self.pos_every = to_us(cfg.position_interval)

    # --- event plumbing -----------------------------------------------------

    def schedule(self, time: int, kind: EventKind, payload=None) -> None:
        heapq.heappush(self._queue, (time, kind, next(self._seq), payload))

    def record(self, *rec) -> None:
        self.trace.records.append((self.now, *rec))

    def run(self) -> tuple[EventTrace, DetectionReport]:
        if self.end <= 0:
            return self.trace, self.detector.report
        self.schedule(0, EventKind.TICK)
        self._schedule_next_message(0)
        run_at = self.detector.next_run
        while run_at <= self.end:
            self.schedule(run_at, EventKind.REPORT_TO_TPA)
            self.schedule(run_at, EventKind.DETECTOR_RUN)
            run_at += self.detector.window_us
        handlers = {
            EventKind.TICK: self._on_tick,
            EventKind.MESSAGE_CREATE: self._on_create,
            EventKind.TRANSFER_COMPLETE: self._on_complete,
            EventKind.REPORT_TO_TPA: self._on_report,
            EventKind.DETECTOR_RUN: self._on_detector_run,
        }
        q = self._queue
        while q and q[0][0] <= self.end:
            time, kind, _seq, payload = heapq.heappop(q)
            self.now = time
            handlers[kind](payload)
        self._on_report(None)
        return self.trace, self.detector.finish(self.end)

    # --- handlers -----------------------------------------------------------

    def _on_tick(self, _payload) -> None:
        if self.now > 0:
            self.mobility.advance(self.cfg.tick)
        if self.pos_every and self.now % self.pos_every == 0:
            for i, (x, y) in enumerate(self.mobility.pos.tolist()):
                self.record("POS", i, round(x, 3), round(y, 3))
        up, down = self.contacts.update(self.mobility.pos)
        for a, b in down:
            self._link_down(a, b)
        for a, b in up:
            self._link_up(a, b)
        nxt = self.now + self.tick
        if nxt <= self.end:
            self.schedule(nxt, EventKind.TICK)

    def _schedule_next_message(self, after: int) -> None:
        lo, hi = self.cfg.message_interval_range
        gap = to_us(self.rng.traffic.uniform(lo, hi))
        self.schedule(after + max(gap, 1), EventKind.MESSAGE_CREATE)

    def _on_create(self, _payload) -> None:
        cfg, gen = self.cfg, self.rng.traffic
        self._schedule_next_message(self.now)
        if cfg.num_legit_nodes < 2:
            return
        src, dst = (int(v) for v in gen.choice(cfg.num_legit_nodes, size=2, replace=False))
        size = int(gen.integers(cfg.message_size_range[0], cfg.message_size_range[1], endpoint=True))
        msg = Message(next(self._msg_ids), src, dst, size, self.now, self.router.initial_copies)
        self.record("MSG_CREATE", msg.id, src, dst, size, msg.copies)
        node = self.nodes[src]
        self._log_drops(node, self._store(node, msg))
        self._kick(node)

    def _on_report(self, _payload) -> None:
        recs = self.trace.records
        feed = self.detector.feed
        for i in range(self._fed, len(recs)):
            feed(recs[i])
        self._fed = len(recs)

    def _on_detector_run(self, _payload) -> None:
        self.detector.run(self.now)

    # --- contacts -----------------------------------------------------------

    def _link_up(self, a: int, b: int) -> None:
        na, nb = self.nodes[a], self.nodes[b]
        c = Contact(a, b, self.now, self.cfg.legit_bitrate)
        na.contacts[b] = c
        nb.contacts[a] = c
        self.record("CONTACT_UP", a, b)
        self.router.on_contact(na, nb, self.now / US)
        self._try_start(c)

    def _link_down(self, a: int, b: int) -> None:
        na, nb = self.nodes[a], self.nodes[b]
        c = na.contacts.pop(b)
        del nb.contacts[a]
        if c.active is not None:
            self._release(c.active)
            self.record("XFER_ABORT", c.active.msg_id, c.active.src, c.active.dst, "linkdown")
            c.active = None
        self.record("CONTACT_DOWN", a, b)

    # --- transfers ----------------------------------------------------------

    def _kick(self, node: NodeState) -> None:
        for peer in sorted(node.contacts):
            c = node.contacts[peer]
            if c.active is None:
                self._try_start(c)

    def _try_start(self, c: Contact) -> None:
        if c.active is not None:
            return
        ends = (c.a, c.b) if c.turn == 0 else (c.b, c.a)
        now = self.now / US
        for k, s in enumerate(ends):
            sender, receiver = self.nodes[s], self.nodes[c.other(s)]
            msg = next(self.router.candidates(sender, receiver, now), None)
            if msg is None:
                continue
            done = self.now + transfer_duration_us(msg.size, c.bitrate)
            c.active = Transfer(msg.id, s, receiver.id, done, next(self._tokens))
            receiver.incoming.add(msg.id)
            sender.outgoing[msg.id] = sender.outgoing.get(msg.id, 0) + 1
            c.turn = 1 - (0 if s == c.a else 1)
            self.schedule(done, EventKind.TRANSFER_COMPLETE, (c, c.active.token))
            return

    def _release(self, t: Transfer) -> None:
        self.nodes[t.dst].incoming.discard(t.msg_id)
        out = self.nodes[t.src].outgoing
        left = out.get(t.msg_id, 0) - 1
        if left > 0:
            out[t.msg_id] = left
        else:
            out.pop(t.msg_id, None)

    def _on_complete(self, payload) -> None:
        if isinstance(payload, Tunnel):
            return self._on_tunnel_done(payload)
        c, token = payload
        t = c.active
        if t is None or t.token != token:
            return  # aborted earlier
        c.active = None
        self._release(t)
        sender, receiver = self.nodes[t.src], self.nodes[t.dst]
        self._deliver(t, sender, receiver)
        self._try_start(c)
        self._kick(receiver)

    def _deliver(self, t: Transfer, sender: NodeState, receiver: NodeState) -> None:
        msg = sender.buffer.get(t.msg_id)
        if msg is None:
            self.record("XFER_ABORT", t.msg_id, sender.id, receiver.id, "gone")
            return
        if msg.id in receiver.buffer or msg.id in receiver.delivered:
            self.record("XFER_ABORT", msg.id, sender.id, receiver.id, "dup")
            return
        split = self.router.handover(msg, receiver.id)
        if split is None:
            self.record("XFER_ABORT", msg.id, sender.id, receiver.id, "stale")
            return
        give, keep = split
        copy = msg.forwarded(receiver.id, give)
        evicted = []
        if receiver.id == msg.dst:
            receiver.delivered.add(msg.id)
        else:
            evicted = self._store(receiver, copy)
            if evicted is None:
                self.record("XFER_ABORT", msg.id, sender.id, receiver.id, "full")
                return
        self.record("XFER_DONE", msg.id, sender.id, receiver.id, give, keep, copy.hops)
        self._log_drops(receiver, evicted)
        self._settle_sender(sender, msg, keep)
        if receiver.is_wormhole and not sender.is_wormhole and receiver.id != msg.dst:
            self._capture(receiver, copy)

    def _settle_sender(self, sender: NodeState, msg: Message, keep: int) -> None:
        if keep <= 0:
            sender.buffer.remove(msg.id)
        elif keep != msg.copies:
            msg.copies = keep

    def _store(self, node: NodeState, msg: Message) -> list[Message] | None:
        """Buffer ``msg`` at ``node``; returns evicted messages, None if it can't fit."""
        try:
            return node.buffer.enqueue(msg, pinned=node.outgoing)
        except BufferOverflow:
            return None

    def _log_drops(self, node: NodeState, evicted) -> None:
        for m in evicted:
            self.record("DROP", m.id, node.id, "evict")

    # --- wormhole tunnel ------------------------------------------------------

    def _capture(self, end: NodeState, msg: Message) -> None:
        tunnel = self.tunnels[end.id]
        replay = tunnel.push(msg, self.now)
        if replay is not None:
            self.schedule(replay.done_at, EventKind.TRANSFER_COMPLETE, tunnel)

    def _on_tunnel_done(self, tunnel: Tunnel) -> None:
        replay = tunnel.in_flight
        src, far = self.nodes[replay.src_end], self.nodes[replay.far_end]
        msg = src.buffer.get(replay.msg_id)
        if msg is not None and msg.id not in far.buffer and msg.id not in far.delivered and msg.id not in far.incoming:
            give, keep = self.router.tunnel_handover(msg)
            copy = msg.forwarded(far.id, give)
            evicted = self._store(far, copy)
            if evicted is not None:
                self.record("TUNNEL_XFER", msg.id, src.id, far.id, give, keep)
                self._log_drops(far, evicted)
                self._settle_sender(src, msg, keep)
                self._kick(far)
        nxt = tunnel.start_next(self.now)
        if nxt is not None:
            self.schedule(nxt.done_at, EventKind.TRANSFER_COMPLETE, tunnel)


def run_simulation(cfg: ScenarioConfig) -> tuple[EventTrace, DetectionReport]:
    """Run one scenario; returns the full trace and the auditor's final report."""
    return Simulation(cfg).run()
