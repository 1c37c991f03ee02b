"""Exhaustive bi-objective search giving the true MultiZeno Pareto front.

The search walks decision epochs: the plane with the earliest availability
time either carries a passenger forward, flies empty to a neighbour, or waits
for the next event (another plane or passenger becoming available). Any
schedule can be left-shifted so that every action starts at such an event,
so this enumeration reaches every non-dominated (makespan, secondary) value.

Planes and passengers are interchangeable, so states are canonicalised as
sorted multisets. A state is pruned when another state with the same
positions is at least as early everywhere and has no worse labels, or when
an optimistic completion bound is weakly dominated by a plan already found.
Passengers never move backwards: a backwards carry can always be replaced by
an empty flight without delaying anything.
"""

from __future__ import annotations

import sys

from .core import (
    CENTRAL,
    GroundTask,
    InstanceTooLargeError,
    Mode,
    MultiZenoConfig,
    ObjectivePoint,
    ParetoFront,
    ScheduledPlan,
    from_ticks,
    ground_multizeno,
    pareto_filter,
    to_ticks,
)

MAX_BUNCHES = 2


def _neighbours(pos: int) -> list[tuple[int, int]]:
    """(destination, corridor) pairs reachable in one flight."""
    if pos in (0, 4):
        return [(hub, c) for c, hub in enumerate(CENTRAL)]
    c = CENTRAL.index(pos)
    return [(0, c), (4, c)]


class _Search:
    def __init__(self, cfg: MultiZenoConfig):
        self.mode = cfg.mode
        self.n_planes = cfg.planes
        self.dur = [to_ticks(d) for d in cfg.durations]
        self.tax = [to_ticks(c) for c in cfg.costs]
        self.risk = [to_ticks(r) for r in cfg.risks]
        self.land = self.tax if cfg.mode is Mode.COST else self.risk
        self.min_dur = min(self.dur)
        self.min_land = min(self.land)
        # no plane needs more than 2 * passengers + planes flights
        self.max_flights = cfg.planes * (2 * cfg.passengers + cfg.planes)
        self.found: list[tuple[int, int]] = []
        self.seen: dict[tuple, list[tuple]] = {}
        self.path: list[tuple] = []
        self.witness: dict[tuple[int, int], list[tuple]] = {}

    def _combine(self, sec: int, landing: int) -> int:
        return sec + landing if self.mode is Mode.COST else max(sec, landing)

    def _incumbent_covers(self, mk: int, sec: int) -> bool:
        return any(m <= mk and s <= sec for m, s in self.found)

    def _bound(self, planes, passengers, mk: int, sec: int) -> tuple[int, int]:
        t_min = planes[0][0]
        work = 0
        latest = mk
        at_origin = 0
        for pos, ready in passengers:
            if pos == 0:
                legs = 2 * self.min_dur
                at_origin += 1
            else:
                legs = self.dur[CENTRAL.index(pos)]
            work += legs
            latest = max(latest, max(ready, t_min) + legs)
        total = sum(t for t, _ in planes) + work
        share = -(-total // self.n_planes)
        mk_lb = max(latest, share)
        if at_origin:
            sec_lb = (sec + at_origin * self.min_land if self.mode is Mode.COST
                      else max(sec, self.min_land))
        else:
            sec_lb = sec
        return mk_lb, sec_lb

    def _dominated_in_memo(self, planes, passengers, flights, mk, sec) -> bool:
        by_pos_planes = sorted(planes, key=lambda x: (x[1], x[0]))
        key = (tuple(p for _, p in by_pos_planes), tuple(p for p, _ in passengers))
        vec = (tuple(t for t, _ in by_pos_planes) + tuple(r for _, r in passengers)
               + (flights, mk, sec))
        bucket = self.seen.setdefault(key, [])
        for other in bucket:
            if all(a <= b for a, b in zip(other, vec)):
                return True
        bucket[:] = [o for o in bucket if not all(a <= b for a, b in zip(vec, o))]
        bucket.append(vec)
        return False

    def run(self, planes, passengers) -> None:
        self._visit(planes, passengers, 0, 0, 0)

    def _visit(self, planes, passengers, flights, mk, sec) -> None:
        if not passengers:
            if not self._incumbent_covers(mk, sec):
                self.found = [(m, s) for m, s in self.found if not (mk <= m and sec <= s)]
                self.found.append((mk, sec))
                self.witness[(mk, sec)] = list(self.path)
            return
        if flights >= self.max_flights:
            return
        if self._incumbent_covers(*self._bound(planes, passengers, mk, sec)):
            return
        if self._dominated_in_memo(planes, passengers, flights, mk, sec):
            return

        t, pos = planes[0]
        rest = planes[1:]
        moves = []
        # carry one waiting passenger forward
        if any(p == pos and r <= t for p, r in passengers):
            idx = next(i for i, (p, r) in enumerate(passengers) if p == pos and r <= t)
            others = passengers[:idx] + passengers[idx + 1:]
            if pos == 0:
                targets = [(hub, c) for c, hub in enumerate(CENTRAL)]
            elif pos in CENTRAL:
                targets = [(4, CENTRAL.index(pos))]
            else:
                targets = []
            for dst, c in targets:
                end = t + self.dur[c]
                landing = self.land[c] if dst in CENTRAL else 0
                new_pass = others if dst == 4 else tuple(sorted(others + ((dst, end),)))
                moves.append((end, dst, new_pass, landing, True))
        for dst, c in _neighbours(pos):
            end = t + self.dur[c]
            landing = self.land[c] if dst in CENTRAL else 0
            moves.append((end, dst, passengers, landing, False))
        for end, dst, new_pass, landing, loaded in moves:
            new_planes = tuple(sorted(rest + ((end, dst),)))
            self.path.append((t, pos, dst, loaded))
            self._visit(new_planes, new_pass, flights + 1, max(mk, end),
                        self._combine(sec, landing))
            self.path.pop()
        # wait for the next event
        events = [x for x, _ in rest if x > t] + [r for _, r in passengers if r > t]
        if events:
            new_planes = tuple(sorted(rest + ((min(events), pos),)))
            self._visit(new_planes, passengers, flights, mk, sec)


def _solve(cfg: MultiZenoConfig) -> _Search:
    if cfg.k > MAX_BUNCHES:
        raise InstanceTooLargeError(
            f"exhaustive front search supports k <= {MAX_BUNCHES}, got k={cfg.k}")
    if cfg.planes >= cfg.passengers:
        raise ValueError("plane count must be below passenger count")
    search = _Search(cfg)
    planes = tuple((0, 0) for _ in range(cfg.planes))
    passengers = tuple((0, 0) for _ in range(cfg.passengers))
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10_000))
    try:
        search.run(planes, passengers)
    finally:
        sys.setrecursionlimit(limit)
    return search


def exact_front_oracle(cfg: MultiZenoConfig) -> ParetoFront:
    search = _solve(cfg)
    return pareto_filter((from_ticks(m), from_ticks(s)) for m, s in search.found)


def oracle_witnesses(cfg: MultiZenoConfig) -> dict[ObjectivePoint, ScheduledPlan]:
    """One concrete schedule per front point, for independent validation."""
    search = _solve(cfg)
    task = ground_multizeno(cfg)
    out = {}
    for mk, sec in search.found:
        moves = search.witness[(mk, sec)]
        out[ObjectivePoint(from_ticks(mk), from_ticks(sec))] = _replay(task, cfg, moves)
    return out


def _replay(task: GroundTask, cfg: MultiZenoConfig, moves) -> ScheduledPlan:
    planes = [[0, 0, p] for p in range(cfg.planes)]
    passengers = [[0, 0, i] for i in range(cfg.passengers)]
    steps = []
    for t, pos, dst, loaded in moves:
        plane = next(p for p in sorted(planes) if p[0] <= t and p[1] == pos)
        c = CENTRAL.index(dst) if dst in CENTRAL else CENTRAL.index(pos)
        end = t + to_ticks(cfg.durations[c])
        if loaded:
            q = next(q for q in sorted(passengers) if q[0] == pos and q[1] <= t)
            name = f"transport(p{plane[2]},q{q[2]},c{pos},c{dst})"
            q[0], q[1] = dst, end
        else:
            name = f"fly(p{plane[2]},c{pos},c{dst})"
        steps.append((t, task.action(name)))
        plane[0], plane[1] = end, dst
    return ScheduledPlan(tuple(steps))
