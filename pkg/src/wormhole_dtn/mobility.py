"""Random-waypoint movement inside a rectangle.

Nodes head for a uniformly drawn target at a speed drawn from their class
range; on arrival they draw a new target and speed (no pause by default).
Legit nodes roam the whole area.  Each wormhole endpoint is confined to its
home quadrant, and the two endpoints of a pair live in opposite quadrants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

Bounds = tuple[float, float, float, float]  # x0, y0, x1, y1


@dataclass(frozen=True)
class WaypointState:
    x: float
    y: float
    tx: float
    ty: float
    speed: float
    speed_range: tuple[float, float]
    bounds: Bounds
    pause_left: float = 0.0

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


def draw_waypoint(gen: np.random.Generator, bounds: Bounds, speed_range: tuple[float, float]):
    u = gen.random(3)
    x0, y0, x1, y1 = bounds
    lo, hi = speed_range
    return x0 + u[0] * (x1 - x0), y0 + u[1] * (y1 - y0), lo + u[2] * (hi - lo)


def step(state: WaypointState, dt: float, rng: np.random.Generator) -> WaypointState:
    """Advance one node by ``dt`` seconds.

    A node that reaches its target stops there for the rest of the step and
    draws the next leg; a node already sitting on its target only redraws.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if state.pause_left > 0:
        return replace(state, pause_left=max(0.0, state.pause_left - dt))
    dx, dy = state.tx - state.x, state.ty - state.y
    dist = math.hypot(dx, dy)
    reach = state.speed * dt
    if dist > reach:
        f = reach / dist
        return replace(state, x=state.x + dx * f, y=state.y + dy * f)
    tx, ty, speed = draw_waypoint(rng, state.bounds, state.speed_range)
    return replace(state, x=state.tx, y=state.ty, tx=tx, ty=ty, speed=speed)


def quadrant(q: int, width: float, height: float) -> Bounds:
    hw, hh = width / 2, height / 2
    col, row = [(0, 0), (1, 0), (1, 1), (0, 1)][q % 4]
    return (col * hw, row * hh, (col + 1) * hw, (row + 1) * hh)


def assign_legit_speed_ranges(cfg, gen: np.random.Generator) -> list[tuple[float, float]]:
    """Split legit nodes evenly across the configured speed classes."""
    n, classes = cfg.num_legit_nodes, cfg.legit_speed_ranges
    labels = [i % len(classes) for i in range(n)]
    order = gen.permutation(n)
    return [classes[labels[k]] for k in np.argsort(order)]


def init_positions(cfg, rng) -> dict[int, WaypointState]:
    """Initial waypoint state for every node (legit ids first, then pairs).

    Pair ``k`` occupies ids ``L + 2k`` and ``L + 2k + 1``; its endpoints start
    in opposite quadrants at least half the area diagonal apart.
    """
    w, h = cfg.area_width, cfg.area_height
    full: Bounds = (0.0, 0.0, w, h)
    setup = rng.setup
    states: dict[int, WaypointState] = {}
    legit_ranges = assign_legit_speed_ranges(cfg, setup)
    for i in range(cfg.num_legit_nodes):
        x, y = setup.uniform(0, w), setup.uniform(0, h)
        tx, ty, v = draw_waypoint(rng.node(i), full, legit_ranges[i])
        states[i] = WaypointState(x, y, tx, ty, v, legit_ranges[i], full)

    min_sep = 0.5 * math.hypot(w, h)
    for k in range(cfg.num_wormhole_pairs):
        qa = k % 2
        ba, bb = quadrant(qa, w, h), quadrant(qa + 2, w, h)
        while True:
            pa = (setup.uniform(ba[0], ba[2]), setup.uniform(ba[1], ba[3]))
            pb = (setup.uniform(bb[0], bb[2]), setup.uniform(bb[1], bb[3]))
            if math.dist(pa, pb) >= min_sep:
                break
        for j, (p, b) in enumerate(((pa, ba), (pb, bb))):
            nid = cfg.num_legit_nodes + 2 * k + j
            tx, ty, v = draw_waypoint(rng.node(nid), b, cfg.wormhole_speed_range)
            states[nid] = WaypointState(p[0], p[1], tx, ty, v, cfg.wormhole_speed_range, b)
    return states


class MobilityField:
    """Array form of :func:`step` for all nodes at once."""

    def __init__(self, states: dict[int, WaypointState], rng):
        ids = sorted(states)
        assert ids == list(range(len(ids)))
        self.rng = rng
        self.pos = np.array([[states[i].x, states[i].y] for i in ids], dtype=float).reshape(-1, 2)
        self.target = np.array([[states[i].tx, states[i].ty] for i in ids], dtype=float).reshape(-1, 2)
        self.speed = np.array([states[i].speed for i in ids], dtype=float)
        self.pause = np.array([states[i].pause_left for i in ids], dtype=float)
        self.bounds = [states[i].bounds for i in ids]
        self.speed_range = [states[i].speed_range for i in ids]

    def __len__(self) -> int:
        return len(self.speed)

    def advance(self, dt: float) -> None:
        if len(self) == 0:
            return
        moving = self.pause <= 0
        self.pause = np.where(moving, self.pause, np.maximum(0.0, self.pause - dt))
        delta = self.target - self.pos
        dist = np.hypot(delta[:, 0], delta[:, 1])
        reach = self.speed * dt
        going = moving & (dist > reach)
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(going, reach / dist, 0.0)
        self.pos += delta * frac[:, None]
        for i in np.flatnonzero(moving & ~going):
            self.pos[i] = self.target[i]
            tx, ty, v = draw_waypoint(self.rng.node(int(i)), self.bounds[i], self.speed_range[i])
            self.target[i] = (tx, ty)
            self.speed[i] = v

    def state(self, i: int) -> WaypointState:
        return WaypointState(
            float(self.pos[i, 0]), float(self.pos[i, 1]),
            float(self.target[i, 0]), float(self.target[i, 1]),
            float(self.speed[i]), self.speed_range[i], self.bounds[i], float(self.pause[i]),
        )
