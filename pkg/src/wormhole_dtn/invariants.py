"""Replay a finished trace and report every broken bookkeeping rule.

The checker rebuilds buffer contents from the records alone, so it is an
independent witness of what the engine did:

* records are in time order;
* contacts open and close consistently, never between two wormhole endpoints;
* a node only sends or drops a message it holds (conservation);
* buffers stay within capacity once all records of a timestamp are applied;
* Spray-and-Wait never has more than ``L`` live copies of a message;
* First Contact never has two custodians of one message;
* tunnel transfers only connect the two ends of one pair.
"""

from __future__ import annotations

from collections import defaultdict

from .config import Protocol
from .trace import EventTrace, format_time


class TraceChecker:
    def __init__(self, trace: EventTrace, limit: int = 50):
        cfg = trace.config
        self.cfg = cfg
        self.limit = limit
        self.L = cfg.num_legit_nodes
        self.partner = {}
        for a, b in trace.wormhole_pairs:
            self.partner[a], self.partner[b] = b, a
        self.trace = trace
        self.violations: list[str] = []
        self.held: dict[int, dict[int, int]] = defaultdict(dict)  # node -> msg -> copies
        self.used: dict[int, int] = defaultdict(int)
        self.size: dict[int, int] = {}
        self.dst: dict[int, int] = {}
        self.open: set[tuple[int, int]] = set()
        self.touched: set[int] = set()
        self.max_copies = 0
        self.max_custodians = 0

    def fail(self, t: int, text: str) -> None:
        if len(self.violations) < self.limit:
            self.violations.append(f"{format_time(t)}: {text}")

    def capacity(self, node: int) -> int:
        return self.cfg.wormhole_buffer if node >= self.L else self.cfg.legit_buffer

    def _add(self, t, node, msg, copies):
        if msg in self.held[node]:
            self.fail(t, f"node {node} receives message {msg} it already holds")
            return
        self.held[node][msg] = copies
        self.used[node] += self.size[msg]
        self.touched.add(node)

    def _remove(self, t, node, msg):
        if msg not in self.held[node]:
            self.fail(t, f"node {node} loses message {msg} it does not hold")
            return
        del self.held[node][msg]
        self.used[node] -= self.size[msg]

    def _settle(self, t):
        for node in self.touched:
            if self.used[node] > self.capacity(node):
                self.fail(t, f"node {node} buffer {self.used[node]} B exceeds {self.capacity(node)} B")
        self.touched.clear()

    def _copies(self, t, msg, nodes):
        proto = self.cfg.routing_protocol
        if proto is Protocol.SPRAY_AND_WAIT:
            total = sum(self.held[n].get(msg, 0) for n in nodes)
            self.max_copies = max(self.max_copies, total)
            if total > self.cfg.spray_copies:
                self.fail(t, f"message {msg} has {total} live copies > {self.cfg.spray_copies}")
        elif proto is Protocol.FIRST_CONTACT:
            holders = sum(1 for n in nodes if msg in self.held[n])
            self.max_custodians = max(self.max_custodians, holders)
            if holders > 1:
                self.fail(t, f"message {msg} has {holders} custodians")

    def run(self) -> list[str]:
        last = None
        nodes = range(self.cfg.num_nodes)
        for rec in self.trace.records:
            t, kind = rec[0], rec[1]
            if last is not None and t < last:
                self.fail(t, "records out of time order")
            if last is not None and t != last:
                self._settle(last)
            last = t
            if kind == "MSG_CREATE":
                _, _, msg, src, dst, size, copies = rec
                self.size[msg], self.dst[msg] = size, dst
                self._add(t, src, msg, copies)
            elif kind == "CONTACT_UP":
                a, b = rec[2], rec[3]
                if not a < b:
                    self.fail(t, f"contact ({a}, {b}) not in canonical order")
                if (a, b) in self.open:
                    self.fail(t, f"contact ({a}, {b}) opened twice")
                if a >= self.L and b >= self.L:
                    self.fail(t, f"radio contact between wormhole endpoints {a} and {b}")
                self.open.add((a, b))
            elif kind == "CONTACT_DOWN":
                if (rec[2], rec[3]) not in self.open:
                    self.fail(t, f"contact ({rec[2]}, {rec[3]}) closed while not open")
                self.open.discard((rec[2], rec[3]))
            elif kind in ("XFER_DONE", "TUNNEL_XFER"):
                msg, frm, to, copies, kept = rec[2:7]
                if kind == "XFER_DONE":
                    if (min(frm, to), max(frm, to)) not in self.open:
                        self.fail(t, f"transfer {frm}->{to} without an open contact")
                    hops = rec[7]
                    if tuple(hops[-2:]) != (frm, to):
                        self.fail(t, f"hop path of message {msg} does not end with {frm}->{to}")
                elif self.partner.get(frm) != to:
                    self.fail(t, f"tunnel transfer between non-partners {frm} and {to}")
                if msg not in self.held[frm]:
                    self.fail(t, f"node {frm} sends message {msg} it does not hold")
                    continue
                if to != self.dst[msg]:
                    self._add(t, to, msg, copies)
                if kept <= 0:
                    self._remove(t, frm, msg)
                else:
                    self.held[frm][msg] = kept
                self._copies(t, msg, nodes)
            elif kind == "DROP":
                self._remove(t, rec[3], rec[2])
        if last is not None:
            self._settle(last)
        return self.violations


def check_trace(trace: EventTrace, limit: int = 50) -> list[str]:
    """Return up to ``limit`` human-readable violations (empty when clean)."""
    return TraceChecker(trace, limit).run()
