"""Third-party auditor: Z-score outlier flagging plus neighbor-table comparison.

Pipeline per audit window:

1. build an :class:`AuditLedger` from the records legit nodes can report
   (contacts they took part in, transfers they sent or received together with
   the hop path of each received copy);
2. score every node's relay count with a Z-score variant and flag outliers;
3. bind flagged nodes into pairs by mutual traffic, keeping only pairs whose
   ends are each other's heaviest counterpart;
4. confirm a pair when the well-populated neighbor sets of its two ends
   barely overlap, in enough consecutive runs.

Relay and traffic counts accumulate over the whole run so far, which lets the
steady tunnel traffic dominate early noise; neighbor sets use only the latest
audit window because positions change.

The wormhole tunnel itself is never reported.  It only surfaces as an
``A -> B`` hop inside the paths of copies that the far end later hands to
legit nodes.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .config import DetectorParams, ZVariant
from .trace import US, EventTrace, format_time

MAD_SCALE = 0.6745


class Scores(NamedTuple):
    values: np.ndarray
    degenerate: bool


def zscore(values: Sequence[float]) -> Scores:
    """``(x - mean) / std`` with the population standard deviation."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ValueError("zscore needs at least two values")
    mu = x.mean()
    sigma = x.std()
    if sigma == 0 or not np.isfinite(sigma):
        return Scores(np.zeros_like(x), True)
    # a spread below rounding noise of the mean is a constant list
    if sigma <= 1e-13 * max(abs(mu), np.abs(x).max()):
        return Scores(np.zeros_like(x), True)
    return Scores((x - mu) / sigma, False)


def modified_zscore(values: Sequence[float]) -> Scores:
    """Robust score ``0.6745 (x - median) / MAD``.

    When the MAD is zero the result is flagged degenerate: values equal to the
    median score 0, all others score ``+inf`` or ``-inf``.
    """
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ValueError("modified_zscore needs at least two values")
    med = np.median(x)
    mad = np.median(np.abs(x - med))
    if mad == 0:
        dev = x - med
        return Scores(np.where(dev == 0, 0.0, np.where(dev > 0, np.inf, -np.inf)), True)
    return Scores(MAD_SCALE * (x - med) / mad, False)


def local_zscore(
    values: Mapping[Hashable, float], partition: Mapping[Hashable, Hashable]
) -> tuple[dict, set]:
    """Standard Z-score inside each group; returns ``(scores, degenerate_groups)``.

    Groups with a single member or zero spread score 0 and are reported as
    degenerate.
    """
    groups: dict[Hashable, list] = {}
    for key in values:
        groups.setdefault(partition[key], []).append(key)
    scores: dict = {}
    degenerate = set()
    for g, keys in groups.items():
        if len(keys) < 2:
            degenerate.add(g)
            scores.update({k: 0.0 for k in keys})
            continue
        s = zscore([values[k] for k in keys])
        if s.degenerate:
            degenerate.add(g)
        scores.update(zip(keys, s.values.tolist()))
    return scores, degenerate


def dynamic_zscore(
    stream: Sequence[tuple[float, float]], window: float
) -> tuple[list[tuple[float, float]], list[bool]]:
    """Score each sample against the samples inside ``(t - window, t]``.

    Returns ``(scored, degenerate)``; a sample whose window holds fewer than
    two values, or no spread, scores 0 and is marked degenerate.
    """
    if window <= 0:
        raise ValueError("window must be > 0")
    times = np.array([t for t, _ in stream], dtype=float)
    vals = np.array([v for _, v in stream], dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValueError("stream must be time ordered")
    lo = np.searchsorted(times, times - window, side="right")
    hi = np.searchsorted(times, times, side="right")
    out, flags = [], []
    for i, (t, v) in enumerate(zip(times.tolist(), vals.tolist())):
        win = vals[lo[i]:hi[i]]
        if win.size < 2:
            out.append((t, 0.0))
            flags.append(True)
            continue
        s = zscore(win)
        if s.degenerate:
            out.append((t, 0.0))
            flags.append(True)
        else:
            out.append((t, (v - win.mean()) / win.std()))
            flags.append(False)
    return out, flags


# --- audit ledger ------------------------------------------------------------

def pair_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass
class AuditLedger:
    window: tuple[float, float]
    nodes: list[int] = field(default_factory=list)
    relay_count: Counter = field(default_factory=Counter)
    contact_count: Counter = field(default_factory=Counter)
    observed_neighbors: dict[int, set[int]] = field(default_factory=dict)
    mutual_traffic: Counter = field(default_factory=Counter)

    def neighbors(self, n: int) -> set[int]:
        return self.observed_neighbors.get(n, set())

    def relay_vector(self) -> list[int]:
        return [self.relay_count[n] for n in self.nodes]


class LedgerBuilder:
    """Consumes trace records in time order and cuts ledgers ending at ``end``.

    Only records a legit node witnessed are used; ``reporters`` is the set of
    nodes whose reports reach the auditor.  Neighbor sets always cover the
    window ``(start, end]``.  Relay, contact and traffic counts cover the same
    window when ``count_span_us`` is None, the trailing ``count_span_us`` when
    it is finite, and everything fed so far when it is ``math.inf``.
    """

    def __init__(self, nodes: Iterable[int], reporters: Iterable[int], start_us: int = 0,
                 count_span_us: float | None = None):
        self.nodes = sorted(nodes)
        self.reporters = frozenset(reporters)
        self.span = count_span_us
        self._n = max(self.nodes, default=0) + 1
        self.open: set[tuple[int, int]] = set()
        self._clear_counts()
        self._reset(start_us)

    def _clear_counts(self) -> None:
        self.edges: dict[int, int] = {}  # encoded (msg, u, v) -> first report time
        self.links: dict[int, int] = {}  # encoded (msg, min, max) -> first report time
        self.ups: list[tuple[int, int, int]] = []
        self.relay_total: Counter = Counter()
        self.mutual_total: Counter = Counter()
        self.contact_total: Counter = Counter()

    def _reset(self, start_us: int) -> None:
        self.start_us = start_us
        self.window_contacts: set[tuple[int, int]] = set()
        self._entered = False  # contacts open at window start not yet copied in

    def _enter_window(self) -> None:
        self.window_contacts |= self.open
        self._entered = True

    def restart(self, start_us: int) -> None:
        if self.span is None:
            self._clear_counts()
        self._reset(start_us)

    def feed(self, rec) -> None:
        t, kind = rec[0], rec[1]
        if t > self.start_us and not self._entered:
            self._enter_window()
        rep = self.reporters
        if kind == "CONTACT_UP":
            a, b = rec[2], rec[3]
            if a not in rep and b not in rep:
                return
            self.open.add((a, b))
            if t > self.start_us:
                self.window_contacts.add((a, b))
            if self.span is not None or t > self.start_us:
                self.ups.append((t, a, b))
                self.contact_total[a] += 1
                self.contact_total[b] += 1
        elif kind == "CONTACT_DOWN":
            self.open.discard((rec[2], rec[3]))
        elif kind == "XFER_DONE":
            if rec[3] not in rep and rec[4] not in rep:
                return
            if self.span is None and t <= self.start_us:
                return
            n = self._n
            base = rec[2] * n * n
            hops = rec[7]
            for u, v in zip(hops, hops[1:]):
                code = base + u * n + v
                if code in self.edges:
                    continue
                self.edges[code] = t
                self.relay_total[u] += 1
                lo, hi = (u, v) if u < v else (v, u)
                link = base + lo * n + hi
                if link not in self.links:
                    self.links[link] = t
                    self.mutual_total[(lo, hi)] += 1

    def _counts_since(self, lo_us: float) -> tuple[Counter, Counter, Counter]:
        n = self._n
        relay: Counter = Counter()
        for code, t in self.edges.items():
            if t > lo_us:
                relay[code // n % n] += 1
        mutual: Counter = Counter()
        for code, t in self.links.items():
            if t > lo_us:
                mutual[(code // n % n, code % n)] += 1
        contacts: Counter = Counter()
        for t, a, b in self.ups:
            if t > lo_us:
                contacts[a] += 1
                contacts[b] += 1
        return relay, mutual, contacts

    def _prune(self, lo_us: float) -> None:
        self.edges = {c: t for c, t in self.edges.items() if t > lo_us}
        self.links = {c: t for c, t in self.links.items() if t > lo_us}
        self.ups = [u for u in self.ups if u[0] > lo_us]

    def cut(self, end_us: int) -> AuditLedger:
        if not self._entered:
            self._enter_window()
        ledger = AuditLedger((self.start_us / US, end_us / US), list(self.nodes))
        ledger.relay_count.update({n: 0 for n in self.nodes})
        if self.span is None or self.span == math.inf:
            relay, mutual, contacts = self.relay_total, self.mutual_total, self.contact_total
        else:
            lo = end_us - self.span
            relay, mutual, contacts = self._counts_since(lo)
            self._prune(lo)
        ledger.relay_count.update(relay)
        ledger.mutual_traffic.update(mutual)
        ledger.contact_count.update(contacts)
        nb: dict[int, set[int]] = {}
        for a, b in self.window_contacts:
            nb.setdefault(a, set()).add(b)
            nb.setdefault(b, set()).add(a)
        ledger.observed_neighbors = nb
        return ledger


def trace_population(trace: EventTrace) -> tuple[list[int], list[int]]:
    cfg = trace.config
    return list(range(cfg.num_nodes)), list(range(cfg.num_legit_nodes))


def build_ledger(trace: EventTrace, window: tuple[float, float]) -> AuditLedger:
    start, end = (int(round(w * US)) for w in window)
    nodes, legit = trace_population(trace)
    builder = LedgerBuilder(nodes, legit, start)
    for rec in trace.records:
        if rec[0] > end:
            break
        builder.feed(rec)
    return builder.cut(end)


# --- flagging, pairing, confirmation ----------------------------------------

def flag_suspects(
    ledger: AuditLedger,
    params: DetectorParams,
    partition: Mapping[int, Hashable] | None = None,
    history: Sequence[tuple[float, float]] = (),
) -> set[int]:
    """Nodes whose relay-count score exceeds the threshold.

    ``partition`` groups nodes for the local variant (one group if omitted);
    ``history`` holds earlier ``(time, relay_count)`` samples for the dynamic
    variant, which scores this window's counts against everything inside the
    sliding window.
    """
    nodes = ledger.nodes
    if len(nodes) < 2:
        return set()
    counts = ledger.relay_vector()
    thr = params.threshold
    variant = params.z_variant
    if variant is ZVariant.STANDARD:
        s = zscore(counts)
        scores = None if s.degenerate else s.values
    elif variant is ZVariant.MODIFIED:
        s = modified_zscore(counts)
        scores = None if s.degenerate else s.values
    elif variant is ZVariant.LOCAL:
        part = partition or {n: 0 for n in nodes}
        by_node, _ = local_zscore(dict(zip(nodes, counts)), part)
        scores = np.array([by_node[n] for n in nodes])
    else:
        now = ledger.window[1]
        stream = list(history) + [(now, float(c)) for c in counts]
        scored, flags = dynamic_zscore(stream, params.sliding_window)
        tail = scored[-len(counts):]
        if all(flags[-len(counts):]):
            scores = None
        else:
            scores = np.array([v for _, v in tail])
    if scores is None:
        return set()
    return {n for n, z in zip(nodes, scores) if z > thr}


def top_counterparts(ledger: AuditLedger) -> dict[int, int]:
    """Each node's heaviest mutual-traffic partner (lowest id on ties)."""
    best: dict[int, tuple[int, int]] = {}
    for (a, b), w in ledger.mutual_traffic.items():
        for x, y in ((a, b), (b, a)):
            cur = best.get(x)
            if cur is None or w > cur[0] or (w == cur[0] and y < cur[1]):
                best[x] = (w, y)
    return {x: y for x, (_w, y) in best.items()}


def pair_suspects(suspects: Iterable[int], ledger: AuditLedger, mutual_best: bool = False) -> set[tuple[int, int]]:
    """Greedy matching of suspects by descending mutual traffic (ties by id).

    With ``mutual_best`` a bound pair is kept only when each end is the
    other's top counterpart over the whole population, not just among the
    suspects.
    """
    s = sorted(set(suspects))
    candidates = []
    for i, a in enumerate(s):
        for b in s[i + 1:]:
            w = ledger.mutual_traffic.get((a, b), 0)
            if w > 0:
                candidates.append((-w, a, b))
    candidates.sort()
    bound: set[int] = set()
    pairs = set()
    for _w, a, b in candidates:
        if a in bound or b in bound:
            continue
        pairs.add((a, b))
        bound.update((a, b))
    if mutual_best:
        top = top_counterparts(ledger)
        pairs = {(a, b) for a, b in pairs if top.get(a) == b and top.get(b) == a}
    return pairs


def neighbor_similarity(na: set, nb: set, a, b) -> float:
    """Jaccard overlap of two neighbor sets after removing the ends themselves."""
    x = set(na) - {b}
    y = set(nb) - {a}
    union = x | y
    if not union:
        return 1.0
    return len(x & y) / len(union)


@dataclass
class DetectionReport:
    preset_pairs: int = 0
    attack_start: float = 0.0
    true_pairs: set[tuple[int, int]] = field(default_factory=set)
    suspects: set[int] = field(default_factory=set)
    confirmed: dict[tuple[int, int], float] = field(default_factory=dict)
    timeline: list[tuple[float, int, int]] = field(default_factory=list)

    @property
    def true_detections(self) -> int:
        return sum(1 for p in self.confirmed if p in self.true_pairs)

    @property
    def false_detections(self) -> int:
        return len(self.confirmed) - self.true_detections

    @property
    def detection_success_rate(self) -> float:
        if self.preset_pairs == 0:
            return 0.0
        return 100.0 * self.true_detections / self.preset_pairs

    @property
    def false_alarm_rate(self) -> float:
        # no preset pairs: any false confirmation counts as a full-scale alarm
        if self.preset_pairs == 0:
            return 100.0 if self.false_detections else 0.0
        return min(100.0, 100.0 * self.false_detections / self.preset_pairs)

    @property
    def mean_detection_time(self) -> float | None:
        times = [t - self.attack_start for p, t in self.confirmed.items() if p in self.true_pairs]
        return sum(times) / len(times) if times else None

    def to_text(self) -> str:
        """Flat record file; field order is fixed."""
        mdt = self.mean_detection_time
        lines = [
            f"preset_pairs = {self.preset_pairs}",
            f"true_detections = {self.true_detections}",
            f"false_detections = {self.false_detections}",
            f"detection_success_rate = {self.detection_success_rate:.6f}",
            f"false_alarm_rate = {self.false_alarm_rate:.6f}",
            f"mean_detection_time = {'' if mdt is None else f'{mdt:.6f}'}",
            f"attack_start = {self.attack_start:.6f}",
            "true_pairs = " + ",".join(f"{a}-{b}" for a, b in sorted(self.true_pairs)),
            "suspects = " + ",".join(map(str, sorted(self.suspects))),
            "confirmed = " + ",".join(
                f"{a}-{b}@{format_time(int(round(t * US)))}" for (a, b), t in sorted(self.confirmed.items())
            ),
            "timeline = " + ",".join(
                f"{format_time(int(round(t * US)))}:{nt}:{nf}" for t, nt, nf in self.timeline
            ),
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> DetectionReport:
        kv = {}
        for line in text.splitlines():
            if line.strip():
                k, _, v = line.partition("=")
                kv[k.strip()] = v.strip()

        def pairs(s):
            return [tuple(map(int, p.split("-"))) for p in s.split(",") if p]

        rep = cls(preset_pairs=int(kv["preset_pairs"]), attack_start=float(kv["attack_start"]))
        rep.true_pairs = set(pairs(kv["true_pairs"]))
        rep.suspects = {int(x) for x in kv["suspects"].split(",") if x}
        for item in filter(None, kv["confirmed"].split(",")):
            p, _, t = item.partition("@")
            rep.confirmed[tuple(map(int, p.split("-")))] = float(t)
        for item in filter(None, kv["timeline"].split(",")):
            t, nt, nf = item.split(":")
            rep.timeline.append((float(t), int(nt), int(nf)))
        return rep


def confirm_wormholes(
    pairs: Iterable[tuple[int, int]],
    ledger: AuditLedger,
    params: DetectorParams,
    now: float,
    report: DetectionReport | None = None,
) -> DetectionReport:
    """Confirm low-similarity pairs into ``report`` (a fresh one if omitted).

    A pair keeps the time of the first run that confirmed it.
    """
    report = report if report is not None else DetectionReport()
    for p in dissimilar_pairs(pairs, ledger, params):
        report.confirmed.setdefault(p, now)
    return report


def dissimilar_pairs(pairs: Iterable[tuple[int, int]], ledger: AuditLedger, params: DetectorParams) -> list:
    """Pairs whose neighbor sets barely overlap.

    Each stripped set must hold at least ``min_neighbors`` nodes; two nearly
    empty sets say nothing about geometry.
    """
    out = []
    for a, b in sorted(pairs):
        na, nb = ledger.neighbors(a), ledger.neighbors(b)
        if min(len(na - {b}), len(nb - {a})) < params.min_neighbors:
            continue
        if neighbor_similarity(na, nb, a, b) < params.similarity_threshold:
            out.append(pair_key(a, b))
    return out


class Detector:
    """Runs the pipeline on a fixed schedule as records arrive.

    Runs happen at ``warmup + k * audit_window``.  Neighbor sets come from
    the trailing audit window; relay and traffic counts accumulate from time 0
    (or over ``count_window``).  A pair is declared once it has been bound and
    found dissimilar in ``confirm_runs`` consecutive runs.  Feeding a finished
    trace record by record gives exactly the same report as the live
    simulation.
    """

    def __init__(self, params: DetectorParams, nodes: Iterable[int], reporters: Iterable[int],
                 true_pairs: Iterable[tuple[int, int]] = (), attack_start: float = 0.0,
                 partition: Mapping[int, Hashable] | None = None):
        self.params = params
        self.window_us = int(round(params.audit_window * US))
        self.next_run = int(round(params.warmup * US))
        span = math.inf if params.count_window is None else params.count_window * US
        self.builder = LedgerBuilder(nodes, reporters, self.next_run - self.window_us, span)
        self.partition = partition
        self.history: list[tuple[float, float]] = []
        true = {pair_key(*p) for p in true_pairs}
        self.report = DetectionReport(len(true), attack_start, true)
        self.ledgers: list[AuditLedger] = []
        self.keep_ledgers = False
        self.streak: dict[tuple[int, int], int] = {}

    def feed(self, rec) -> None:
        while rec[0] > self.next_run:
            self.run(self.next_run)
        self.builder.feed(rec)

    def run(self, now_us: int) -> AuditLedger:
        if now_us != self.next_run:
            raise ValueError("detector runs must follow the schedule")
        ledger = self.builder.cut(now_us)
        now = now_us / US
        suspects = flag_suspects(ledger, self.params, self.partition, self.history)
        pairs = pair_suspects(suspects, ledger, self.params.mutual_best)
        self.report.suspects |= suspects
        passing = dissimilar_pairs(pairs, ledger, self.params)
        self.streak = {p: self.streak.get(p, 0) + 1 for p in passing}
        ready = [p for p, k in self.streak.items() if k >= self.params.confirm_runs]
        confirm_wormholes(ready, ledger, self.params, now, self.report)
        rep = self.report
        self.report.timeline.append((now, rep.true_detections, rep.false_detections))
        if self.params.z_variant is ZVariant.DYNAMIC:
            self.history += [(now, float(c)) for c in ledger.relay_vector()]
            horizon = now - self.params.sliding_window
            self.history = [s for s in self.history if s[0] > horizon]
        if self.keep_ledgers:
            self.ledgers.append(ledger)
        self.next_run += self.window_us
        self.builder.restart(self.next_run - self.window_us)
        return ledger

    def finish(self, end_us: int) -> DetectionReport:
        while self.next_run <= end_us:
            self.run(self.next_run)
        return self.report


def audit(trace: EventTrace, params: DetectorParams | None = None, keep_ledgers: bool = False) -> Detector:
    """Drive a :class:`Detector` over a finished trace and return it."""
    cfg = trace.config
    det = make_detector(cfg, params or cfg.detector_params, trace.wormhole_pairs)
    det.keep_ledgers = keep_ledgers
    for rec in trace.records:
        det.feed(rec)
    det.finish(int(round(cfg.sim_duration * US)) if cfg.sim_duration > 0 else -1)
    return det


def detect(trace: EventTrace, params: DetectorParams | None = None) -> DetectionReport:
    """Re-run the auditor over a finished trace (pure function of its input)."""
    return audit(trace, params).report


def make_detector(cfg, params: DetectorParams, wormhole_pairs) -> Detector:
    return Detector(
        params,
        nodes=range(cfg.num_nodes),
        reporters=range(cfg.num_legit_nodes),
        true_pairs=wormhole_pairs,
    )
