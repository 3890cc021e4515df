"""Release gate: the nine acceptance criteria at their pinned tolerances.

The detection, visibility, geometry, invariant and determinism criteria share
two full matrices (4 node totals x 4 protocols x 5 seeds, 12 simulated hours
each), one with five wormhole pairs and one without attackers.  On one core
that is roughly an hour; set ``WDTN_WORKERS`` to run cells in parallel.

Each criterion records one PASS/FAIL line, printed in the terminal summary.
"""

from __future__ import annotations

import hashlib
import statistics
from dataclasses import dataclass, replace

import numpy as np
import pytest

from wormhole_dtn import ScenarioConfig, run_simulation
from wormhole_dtn.detector import audit, modified_zscore, neighbor_similarity, zscore
from wormhole_dtn.harness import ExperimentMatrix, sweep
from wormhole_dtn.invariants import TraceChecker
from wormhole_dtn.routing import ProphetTable, forged_table, prophet_update

from conftest import VERDICTS

# pinned tolerances
ZSCORE_MEAN_TOL = 1e-10
ZSCORE_VAR_TOL = 1e-10
ZSCORE_SUMSQ_TOL = 1e-8
MODZ_REL_TOL = 1e-12
RANDOM_LISTS = 1000
MIN_MEAN_TRUE = 3.0
MAX_MEAN_FALSE = 0.0
VISIBILITY_Z = 2.5
SIMILARITY_THRESHOLD = 0.1
LEGIT_SIMILAR_SHARE = 0.95
FREQUENT_EXCHANGES = 2  # messages inside one audit window
SPRAY_L = 6
PROPHET_SEQUENCES = 10_000


def verdict(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS[k] = line
    print(line)


# --- statistics criteria ----------------------------------------------------------

def random_lists(rng, ties: bool):
    for i in range(RANDOM_LISTS):
        n = 2 + (2 * i) % 499 if ties else int(rng.integers(2, 501))
        while True:
            if ties:
                x = rng.integers(0, max(3, n // 4), size=n).astype(float)
            else:
                x = rng.normal(rng.uniform(-1e3, 1e3), rng.uniform(1e-2, 1e3), size=n)
            if np.ptp(x) > 0:
                yield x
                break


def test_criterion_1_zscore_identities():
    rng = np.random.default_rng(2024)
    worst = [0.0, 0.0, 0.0]
    for x in random_lists(rng, ties=False):
        z = zscore(x).values
        worst[0] = max(worst[0], abs(z.mean()))
        worst[1] = max(worst[1], abs(z.var() - 1))
        worst[2] = max(worst[2], abs((z ** 2).sum() - len(x)))
    ok = worst[0] < ZSCORE_MEAN_TOL and worst[1] < ZSCORE_VAR_TOL and worst[2] < ZSCORE_SUMSQ_TOL
    verdict(1, ok, f"worst |mean| {worst[0]:.1e}, |var-1| {worst[1]:.1e}, |sumsq-n| {worst[2]:.1e}")
    assert ok


def brute_modified(xs):
    def med(v):
        s = sorted(v)
        m = len(s) // 2
        return s[m] if len(s) % 2 else (s[m - 1] + s[m]) / 2

    c = med(xs)
    mad = med([abs(v - c) for v in xs])
    if mad == 0:
        return None, mad
    return [0.6745 * (v - c) / mad for v in xs], mad


def test_criterion_2_modified_zscore_oracle():
    rng = np.random.default_rng(7)
    worst, checked = 0.0, 0
    for ties in (False, True):
        for x in random_lists(rng, ties):
            want, mad = brute_modified(x.tolist())
            if mad == 0:
                continue
            got = modified_zscore(x).values
            for g, w in zip(got, want):
                err = abs(g - w) if w == 0 else abs(g - w) / abs(w)
                worst = max(worst, err)
            checked += 1
    ok = worst <= MODZ_REL_TOL and checked >= RANDOM_LISTS
    verdict(2, ok, f"{checked} lists, worst relative error {worst:.1e}")
    assert ok


# --- matrix probes ---------------------------------------------------------------

@dataclass
class Probe:
    digest: str
    replay_equal: bool
    violations: list
    max_copies: int
    max_custodians: int
    z_final: tuple[float, float]  # (min wormhole, max legit) standard z over whole-run relay counts
    true_sims: list  # per audit run and true pair
    legit_sims: list  # per audit run and frequently-communicating legit pair
    timeline: list


def probe(trace, report) -> Probe:
    cfg = trace.config
    det = audit(trace, cfg.detector_params, keep_ledgers=True)
    L = cfg.num_legit_nodes
    checker = TraceChecker(trace)
    violations = checker.run()
    z_final = (float("nan"), float("nan"))
    true_sims, legit_sims = [], []
    if det.ledgers:
        s = zscore(det.ledgers[-1].relay_vector())
        if cfg.num_wormhole_pairs and not s.degenerate:
            z_final = (float(s.values[L:].min()), float(s.values[:L].max()))
    prev = None
    for led in det.ledgers:
        for a, b in trace.wormhole_pairs:
            true_sims.append(neighbor_similarity(led.neighbors(a), led.neighbors(b), a, b))
        for (a, b), w in led.mutual_traffic.items():
            fresh = w - (prev.mutual_traffic.get((a, b), 0) if prev else 0)
            if b < L and fresh >= FREQUENT_EXCHANGES:
                legit_sims.append(neighbor_similarity(led.neighbors(a), led.neighbors(b), a, b))
        prev = led
    return Probe(
        hashlib.sha256(trace.to_text().encode()).hexdigest(),
        det.report.to_text() == report.to_text(),
        violations, checker.max_copies, checker.max_custodians,
        z_final, true_sims, legit_sims, list(report.timeline),
    )


def _progress(row):
    print(f"  {row.protocol.value:>12} n={row.node_total} seed={row.seed}: "
          f"{row.true_detections}/{row.false_detections} in {row.wall_time:.0f}s", flush=True)


@pytest.fixture(scope="module")
def attack_runs():
    return sweep(ExperimentMatrix(), inspect=probe, progress=_progress)


@pytest.fixture(scope="module")
def clean_runs():
    return sweep(ExperimentMatrix(base_config=ScenarioConfig(num_wormhole_pairs=0)), inspect=probe,
                 progress=_progress)


def test_criterion_3_detection_band(attack_runs):
    cells: dict = {}
    for row, _ in attack_runs:
        cells.setdefault((row.protocol.value, row.node_total), []).append(row)
    bad = []
    lines = []
    for key, rows in sorted(cells.items()):
        mt = statistics.fmean(r.true_detections for r in rows)
        mf = statistics.fmean(r.false_detections for r in rows)
        lines.append(f"{key[0]}/{key[1]} {mt:.1f}/{mf:.1f}")
        if not (mt >= MIN_MEAN_TRUE and mf <= MAX_MEAN_FALSE):
            bad.append(key)
    ok = len(cells) == 16 and not bad
    verdict(3, ok, f"16 cells, true/false means: {', '.join(lines)}" + (f"; failing {bad}" if bad else ""))
    assert ok


def test_criterion_4_attack_visibility(attack_runs):
    failing = [(r.protocol.value, r.node_total, r.seed, round(p.z_final[0], 2), round(p.z_final[1], 2))
               for r, p in attack_runs
               if not (p.z_final[0] > VISIBILITY_Z > p.z_final[1])]
    lowest = min(p.z_final[0] for _, p in attack_runs)
    highest = max(p.z_final[1] for _, p in attack_runs)
    ok = not failing
    verdict(4, ok, f"{len(attack_runs) - len(failing)}/{len(attack_runs)} runs separated at z={VISIBILITY_Z}; "
                   f"lowest wormhole z {lowest:.2f}, highest legit z {highest:.2f}")
    assert ok, failing[:10]


def test_criterion_5_clean_network(clean_runs):
    alarms = [(r.protocol.value, r.node_total, r.seed, r.false_detections) for r, _ in clean_runs
              if r.false_detections or r.true_detections]
    ok = len(clean_runs) == 80 and not alarms
    verdict(5, ok, f"{len(clean_runs)} attacker-free runs, {len(alarms)} with confirmed pairs")
    assert ok, alarms


def test_criterion_6_geometry(attack_runs):
    true_sims = np.array([s for _, p in attack_runs for s in p.true_sims])
    legit_sims = np.array([s for _, p in attack_runs for s in p.legit_sims])
    true_ok = bool(true_sims.size) and bool((true_sims < SIMILARITY_THRESHOLD).all())
    share = float((legit_sims > SIMILARITY_THRESHOLD).mean()) if legit_sims.size else 0.0
    legit_ok = share >= LEGIT_SIMILAR_SHARE
    verdict(6, true_ok and legit_ok,
            f"true pair samples {true_sims.size}, {np.mean(true_sims >= SIMILARITY_THRESHOLD):.1%} at or above "
            f"{SIMILARITY_THRESHOLD} (max {true_sims.max():.3f}); legit pair samples {legit_sims.size}, "
            f"{share:.1%} above {SIMILARITY_THRESHOLD}")
    assert true_ok and legit_ok


def test_criterion_7_monotone_detection(attack_runs):
    broken = []
    for row, p in attack_runs:
        counts = [nt for _, nt, _ in p.timeline]
        times = [t for t, _, _ in p.timeline]
        if counts != sorted(counts) or times != sorted(times) or not counts:
            broken.append((row.protocol.value, row.node_total, row.seed))
    ok = not broken
    verdict(7, ok, f"{len(attack_runs) - len(broken)}/{len(attack_runs)} timelines non-decreasing")
    assert ok, broken


def prophet_sweep(rng) -> tuple[float, float]:
    lo, hi = 1.0, 0.0
    for _ in range(PROPHET_SEQUENCES):
        n = int(rng.integers(2, 7))
        tables = {i: ProphetTable() for i in range(n)}
        forger = int(rng.integers(0, n)) if rng.random() < 0.3 else None
        now = 0.0
        for _ in range(int(rng.integers(1, 30))):
            now += float(rng.exponential(60.0))
            a, b = (int(v) for v in rng.choice(n, size=2, replace=False))
            ta = forged_table(range(n), now) if a == forger else tables[a]
            tb = forged_table(range(n), now) if b == forger else tables[b]
            tables[a] = prophet_update(tables[a], a, b, tb, now)
            tables[b] = prophet_update(tables[b], b, a, ta, now)
        for t in tables.values():
            for v in t.P.values():
                lo, hi = min(lo, v), max(hi, v)
    return lo, hi


def test_criterion_8_protocol_invariants(attack_runs, clean_runs):
    runs = attack_runs + clean_runs
    violations = [(r.protocol.value, r.node_total, r.seed, p.violations[:3]) for r, p in runs if p.violations]
    copies = max(p.max_copies for r, p in runs if r.protocol.value == "sprayandwait")
    custodians = max(p.max_custodians for r, p in runs if r.protocol.value == "firstcontact")
    lo, hi = prophet_sweep(np.random.default_rng(11))
    ok = not violations and copies <= SPRAY_L and custodians <= 1 and 0.0 <= lo and hi <= 1.0
    verdict(8, ok, f"{len(runs)} traces, {len(violations)} with violations; max S&W copies {copies}, "
                   f"max FC custodians {custodians}; PRoPHET range [{lo:.3g}, {hi:.3g}] over "
                   f"{PROPHET_SEQUENCES} sequences")
    assert ok, violations[:5]


def test_criterion_9_determinism(attack_runs):
    mismatched = [(r.protocol.value, r.node_total, r.seed) for r, p in attack_runs if not p.replay_equal]
    reruns = []
    for row, p in attack_runs:
        if row.node_total == 58 and row.seed == 1:
            cfg = replace(ScenarioConfig(), routing_protocol=row.protocol, rng_seed=1).with_total_nodes(58)
            trace, _ = run_simulation(cfg)
            reruns.append(hashlib.sha256(trace.to_text().encode()).hexdigest() == p.digest)
    ok = not mismatched and len(reruns) == 4 and all(reruns)
    verdict(9, ok, f"{sum(reruns)}/{len(reruns)} reruns byte-identical; "
                   f"{len(attack_runs) - len(mismatched)}/{len(attack_runs)} replays equal the live report")
    assert ok
