"""Ground temporal STRIPS model of the MultiZeno logistics domain.

All rational quantities (durations, taxes, risks, start times) are held as
integer *ticks* of 1/10 unit, so arithmetic and comparisons stay exact.
Public objective values are exposed as :class:`fractions.Fraction`.
"""

from __future__ import annotations

import csv
import enum
import heapq
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

SCALE = 10
CITIES = 5
CENTRAL = (1, 2, 3)
INF = math.inf


class MozenoError(Exception):
    """Base class for domain errors."""


class InapplicableActionError(MozenoError):
    pass


class InvalidPlanError(MozenoError):
    pass


class UnsupportedConfigError(MozenoError):
    pass


class InstanceTooLargeError(MozenoError):
    pass


def to_ticks(value) -> int:
    """Convert a rational-ish value to integer ticks, refusing anything finer than 1/10."""
    frac = Fraction(str(value)) if isinstance(value, float) else Fraction(value)
    scaled = frac * SCALE
    if scaled.denominator != 1:
        raise ValueError(f"{value!r} is not representable in tenths")
    return int(scaled)


def from_ticks(ticks: int) -> Fraction:
    return Fraction(ticks, SCALE)


def fmt_rational(value) -> str:
    """Render a tick-representable rational as a short decimal string."""
    ticks = to_ticks(value)
    sign = "-" if ticks < 0 else ""
    whole, tenth = divmod(abs(ticks), SCALE)
    return f"{sign}{whole}" if tenth == 0 else f"{sign}{whole}.{tenth}"


class Predicate(str, enum.Enum):
    PLANE_AT = "PlaneAt"
    PERSON_AT = "PersonAt"


class Atom(NamedTuple):
    predicate: Predicate
    obj: int
    city: int

    def __str__(self) -> str:
        return f"{self.predicate.value}({self.obj},{self.city})"


class ActionKind(str, enum.Enum):
    FLY = "fly"
    TRANSPORT = "transport"


class Mode(str, enum.Enum):
    COST = "cost"
    RISK = "risk"


@dataclass(frozen=True, slots=True)
class GroundAction:
    """A durative ground action. Durations, costs and risks are in ticks."""

    index: int
    kind: ActionKind
    plane: int
    passenger: int | None
    src: int
    dst: int
    duration: int
    cost: int
    risk: int
    pre: int
    add: int
    delete: int
    objects: int

    @property
    def name(self) -> str:
        if self.kind is ActionKind.FLY:
            return f"fly(p{self.plane},c{self.src},c{self.dst})"
        return f"transport(p{self.plane},q{self.passenger},c{self.src},c{self.dst})"

    def __str__(self) -> str:
        return self.name


class ObjectivePoint(NamedTuple):
    makespan: Fraction
    secondary: Fraction

    def __str__(self) -> str:
        return f"({fmt_rational(self.makespan)},{fmt_rational(self.secondary)})"


def point(makespan, secondary) -> ObjectivePoint:
    return ObjectivePoint(Fraction(makespan), Fraction(secondary))


@dataclass(frozen=True)
class ParetoFront:
    points: tuple[ObjectivePoint, ...]

    def __post_init__(self):
        for a, b in zip(self.points, self.points[1:]):
            if not (a.makespan < b.makespan and a.secondary > b.secondary):
                raise ValueError(f"front is not strictly sorted and non-dominated at {a}, {b}")

    def __iter__(self):
        return iter(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]

    def as_tuples(self) -> list[tuple[Fraction, Fraction]]:
        return [tuple(p) for p in self.points]


@dataclass(frozen=True)
class MultiZenoConfig:
    """One MultiZeno instance: ``k`` bunches of three passengers, a few planes,
    and the duration/tax/risk attached to each of the three central corridors."""

    k: int = 1
    planes: int = 2
    durations: tuple = (2, 4, 6)
    costs: tuple = (3, 2, 1)
    risks: tuple = (3, 2, 1)
    mode: Mode = Mode.COST

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        for name in ("durations", "costs", "risks"):
            values = tuple(Fraction(str(v)) if isinstance(v, float) else Fraction(v)
                           for v in getattr(self, name))
            if len(values) != len(CENTRAL):
                raise ValueError(f"{name} needs {len(CENTRAL)} values, got {len(values)}")
            for v in values:
                to_ticks(v)
            object.__setattr__(self, name, values)
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.planes < 1:
            raise ValueError("planes must be a positive integer")
        if any(d <= 0 for d in self.durations):
            raise ValueError("leg durations must be positive")
        if any(c < 0 for c in self.costs) or any(r < 0 for r in self.risks):
            raise ValueError("costs and risks must be non-negative")

    @property
    def passengers(self) -> int:
        return 3 * self.k

    @property
    def alpha(self) -> Fraction:
        return self.costs[1]

    def with_alpha(self, alpha) -> "MultiZenoConfig":
        return MultiZenoConfig(self.k, self.planes, self.durations,
                               (self.costs[0], alpha, self.costs[2]), self.risks, self.mode)

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "planes": self.planes,
            "durations": [_json_number(v) for v in self.durations],
            "costs": [_json_number(v) for v in self.costs],
            "risks": [_json_number(v) for v in self.risks],
            "mode": self.mode.value,
        }

    @classmethod
    def from_json(cls, data: dict) -> "MultiZenoConfig":
        allowed = {"k", "planes", "durations", "costs", "risks", "mode"}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown instance keys: {sorted(unknown)}")
        if "k" not in data:
            raise ValueError("instance needs 'k'")
        kwargs = {key: data[key] for key in allowed if key in data}
        for key in ("durations", "costs", "risks"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


def _json_number(value: Fraction):
    return int(value) if value.denominator == 1 else float(value)


def load_instance(path) -> MultiZenoConfig:
    with open(path) as fh:
        return MultiZenoConfig.from_json(json.load(fh))


def dump_instance(cfg: MultiZenoConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_json(), indent=2) + "\n")


@dataclass(frozen=True, eq=False)
class GroundTask:
    """Ground planning problem P(I, G). States are int bitmasks over ``atoms``."""

    atoms: tuple[Atom, ...]
    actions: tuple[GroundAction, ...]
    initial: int
    goal: int
    mode: Mode
    config: MultiZenoConfig | None = field(default=None, compare=False)

    @cached_property
    def atom_index(self) -> dict[Atom, int]:
        return {a: i for i, a in enumerate(self.atoms)}

    @cached_property
    def achievers(self) -> tuple[tuple[int, ...], ...]:
        """Action indices adding each atom."""
        out = [[] for _ in self.atoms]
        for act in self.actions:
            for i in bits(act.add):
                out[i].append(act.index)
        return tuple(tuple(a) for a in out)

    @cached_property
    def consumers(self) -> tuple[tuple[int, ...], ...]:
        """Action indices with each atom as precondition."""
        out = [[] for _ in self.atoms]
        for act in self.actions:
            for i in bits(act.pre):
                out[i].append(act.index)
        return tuple(tuple(a) for a in out)

    @cached_property
    def pre_lists(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(bits(a.pre)) for a in self.actions)

    @cached_property
    def add_lists(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(bits(a.add)) for a in self.actions)

    @cached_property
    def object_groups(self) -> tuple[int, ...]:
        """Bitmask of the atoms describing each object (plane or passenger)."""
        groups: dict[tuple[Predicate, int], int] = {}
        for i, a in enumerate(self.atoms):
            key = (a.predicate, a.obj)
            groups[key] = groups.get(key, 0) | (1 << i)
        return tuple(groups.values())

    def mask_of(self, atoms: Iterable[Atom]) -> int:
        idx = self.atom_index
        m = 0
        for a in atoms:
            m |= 1 << idx[a]
        return m

    def atoms_of(self, mask: int) -> frozenset[Atom]:
        return frozenset(self.atoms[i] for i in bits(mask))

    def action(self, name: str) -> GroundAction:
        for act in self.actions:
            if act.name == name:
                return act
        raise KeyError(name)

    def without_actions(self, predicate) -> "GroundTask":
        """Copy of the task keeping only actions for which ``predicate`` is false."""
        kept = [a for a in self.actions if not predicate(a)]
        renum = tuple(
            GroundAction(i, a.kind, a.plane, a.passenger, a.src, a.dst, a.duration, a.cost,
                         a.risk, a.pre, a.add, a.delete, a.objects)
            for i, a in enumerate(kept)
        )
        return GroundTask(self.atoms, renum, self.initial, self.goal, self.mode, self.config)


def bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def plane_at(p: int, c: int) -> Atom:
    return Atom(Predicate.PLANE_AT, p, c)


def person_at(i: int, c: int) -> Atom:
    return Atom(Predicate.PERSON_AT, i, c)


def edges() -> list[tuple[int, int, int]]:
    """Directed edges as (src, dst, corridor) with corridor in 0..2."""
    out = []
    for c, hub in enumerate(CENTRAL):
        out += [(0, hub, c), (hub, 0, c), (hub, 4, c), (4, hub, c)]
    return out


def ground_multizeno(cfg: MultiZenoConfig) -> GroundTask:
    if cfg.planes >= cfg.passengers:
        raise ValueError(
            f"plane count {cfg.planes} must be below passenger count {cfg.passengers}")
    atoms = [plane_at(p, c) for p in range(cfg.planes) for c in range(CITIES)]
    atoms += [person_at(i, c) for i in range(cfg.passengers) for c in range(CITIES)]
    index = {a: i for i, a in enumerate(atoms)}

    def m(*xs: Atom) -> int:
        return sum(1 << index[x] for x in xs)

    dur = [to_ticks(d) for d in cfg.durations]
    tax = [to_ticks(c) for c in cfg.costs]
    risk = [to_ticks(r) for r in cfg.risks]
    actions = []

    def landing(dst: int, corridor: int) -> tuple[int, int]:
        return (tax[corridor], risk[corridor]) if dst in CENTRAL else (0, 0)

    for p in range(cfg.planes):
        for src, dst, c in edges():
            cost, rk = landing(dst, c)
            actions.append(GroundAction(
                len(actions), ActionKind.FLY, p, None, src, dst, dur[c], cost, rk,
                pre=m(plane_at(p, src)), add=m(plane_at(p, dst)),
                delete=m(plane_at(p, src)), objects=1 << p))
    for p in range(cfg.planes):
        for i in range(cfg.passengers):
            for src, dst, c in edges():
                cost, rk = landing(dst, c)
                actions.append(GroundAction(
                    len(actions), ActionKind.TRANSPORT, p, i, src, dst, dur[c], cost, rk,
                    pre=m(plane_at(p, src), person_at(i, src)),
                    add=m(plane_at(p, dst), person_at(i, dst)),
                    delete=m(plane_at(p, src), person_at(i, src)),
                    objects=(1 << p) | (1 << (cfg.planes + i))))
    initial = m(*[plane_at(p, 0) for p in range(cfg.planes)],
                *[person_at(i, 0) for i in range(cfg.passengers)])
    goal = m(*[person_at(i, 4) for i in range(cfg.passengers)])
    return GroundTask(tuple(atoms), tuple(actions), initial, goal, cfg.mode, cfg)


def mutex(a: Atom, b: Atom) -> bool:
    return a.predicate == b.predicate and a.obj == b.obj and a.city != b.city


def step(state: int, action: GroundAction) -> int:
    if action.pre & ~state:
        raise InapplicableActionError(f"{action.name}: preconditions not satisfied")
    return (state & ~action.delete) | action.add


@dataclass(frozen=True)
class ScheduledPlan:
    """Start-time-stamped actions; start times are ticks."""

    steps: tuple[tuple[int, GroundAction], ...] = ()

    @property
    def makespan_ticks(self) -> int:
        return max((s + a.duration for s, a in self.steps), default=0)

    @property
    def makespan(self) -> Fraction:
        return from_ticks(self.makespan_ticks)

    def __len__(self) -> int:
        return len(self.steps)

    def rows(self) -> list[tuple[str, str]]:
        return [(fmt_rational(from_ticks(s)), a.name) for s, a in self.steps]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["start", "action"])
            w.writerows(self.rows())


def secondary_ticks(actions: Iterable[GroundAction], mode: Mode) -> int:
    if mode is Mode.COST:
        return sum(a.cost for a in actions)
    return max((a.risk for a in actions), default=0)


def validate_plan(task: GroundTask, plan: ScheduledPlan) -> ObjectivePoint:
    """Simulate timed execution and return (makespan, secondary).

    Effects take place at action end. At each start, effects of all actions
    finished by then are applied before preconditions are checked.
    """
    order = sorted(range(len(plan.steps)), key=lambda i: (plan.steps[i][0], i))
    state = task.initial
    pending: list[tuple[int, int, GroundAction]] = []
    busy_until: dict[int, int] = {}
    for i in order:
        start, act = plan.steps[i]
        if start < 0:
            raise InvalidPlanError(f"{act.name} starts before time 0")
        while pending and pending[0][0] <= start:
            _, _, done = heapq.heappop(pending)
            state = (state & ~done.delete) | done.add
        if act.pre & ~state:
            missing = ", ".join(str(task.atoms[j]) for j in bits(act.pre & ~state))
            raise InvalidPlanError(
                f"{act.name} at {fmt_rational(from_ticks(start))}: missing {missing}")
        for obj in bits(act.objects):
            if busy_until.get(obj, 0) > start:
                raise InvalidPlanError(
                    f"{act.name} at {fmt_rational(from_ticks(start))} overlaps another "
                    "action on the same plane or passenger")
            busy_until[obj] = start + act.duration
        heapq.heappush(pending, (start + act.duration, i, act))
    while pending:
        _, _, done = heapq.heappop(pending)
        state = (state & ~done.delete) | done.add
    if task.goal & ~state:
        missing = ", ".join(str(task.atoms[j]) for j in bits(task.goal & ~state))
        raise InvalidPlanError(f"goal not reached: missing {missing}")
    return ObjectivePoint(
        from_ticks(plan.makespan_ticks),
        from_ticks(secondary_ticks((a for _, a in plan.steps), task.mode)))


def earliest_start_ticks(task: GroundTask, state: int | None = None) -> list[float]:
    """Delete-relaxed earliest time (ticks) each atom can hold; max over preconditions."""
    state = task.initial if state is None else state
    n = len(task.atoms)
    t = [INF] * n
    heap = []
    for i in bits(state):
        t[i] = 0
        heap.append((0, i))
    heapq.heapify(heap)
    remaining = [len(p) for p in task.pre_lists]
    ready = [0] * len(task.actions)
    done = [False] * n
    for act in task.actions:
        if not act.pre:
            for j in task.add_lists[act.index]:
                if act.duration < t[j]:
                    t[j] = act.duration
                    heapq.heappush(heap, (act.duration, j))
    while heap:
        ti, i = heapq.heappop(heap)
        if done[i] or ti > t[i]:
            continue
        done[i] = True
        for a in task.consumers[i]:
            remaining[a] -= 1
            if ti > ready[a]:
                ready[a] = ti
            if remaining[a] == 0:
                act = task.actions[a]
                cand = ready[a] + act.duration
                for j in task.add_lists[a]:
                    if cand < t[j]:
                        t[j] = cand
                        heapq.heappush(heap, (cand, j))
    return t


def earliest_start_times(task: GroundTask) -> dict[Atom, Fraction | float]:
    ticks = earliest_start_ticks(task)
    return {a: (INF if v == INF else from_ticks(v)) for a, v in zip(task.atoms, ticks)}


def dominates(p: Sequence, q: Sequence) -> bool:
    """Strict Pareto dominance under minimization."""
    return p[0] <= q[0] and p[1] <= q[1] and (p[0] < q[0] or p[1] < q[1])


def pareto_filter(points: Iterable[Sequence]) -> ParetoFront:
    pts = sorted({ObjectivePoint(Fraction(p[0]), Fraction(p[1])) for p in points})
    if not pts:
        raise ValueError("cannot filter an empty point set")
    out: list[ObjectivePoint] = []
    for p in pts:
        if not out or p.secondary < out[-1].secondary:
            out.append(p)
    return ParetoFront(tuple(out))


def exact_front_analytic(cfg: MultiZenoConfig) -> ParetoFront:
    """Closed-form fronts for the documented two-plane settings."""
    if cfg.planes != 2:
        raise UnsupportedConfigError("analytic fronts assume two planes")
    k = cfg.k
    if cfg.mode is Mode.RISK:
        d, r = cfg.durations, cfg.risks
        if not (d[0] < d[1] < d[2] and r[0] > r[1] > r[2]):
            raise UnsupportedConfigError(
                "risk front needs durations increasing and risks decreasing across corridors")
        return ParetoFront(tuple(point((6 * k - 2) * d[i], r[i]) for i in range(3)))
    if cfg.durations != (2, 4, 6) or cfg.costs != (3, 2, 1):
        raise UnsupportedConfigError(
            "analytic cost front only for durations (2,4,6) and costs (3,2,1); use the oracle")
    return ParetoFront(tuple(
        point(12 * k - 4 + 4 * j, 18 * k - 6 - 2 * j) for j in range(6 * k - 1)))


def write_front_csv(front: Iterable[Sequence], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["makespan", "secondary"])
        for p in front:
            w.writerow([fmt_rational(p[0]), fmt_rational(p[1])])


def read_front_csv(path) -> list[ObjectivePoint]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [point(Fraction(row["makespan"]), Fraction(row["secondary"])) for row in reader]
