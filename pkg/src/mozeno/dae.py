"""Divide-and-Evolve genotype: variable-length lists of partial states.

An individual is decoded by asking the embedded planner to go from the
initial state through each partial state in turn and finally to the goal.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from .core import (
    INF,
    GroundTask,
    ObjectivePoint,
    ScheduledPlan,
    bits,
    earliest_start_ticks,
    fmt_rational,
    from_ticks,
    to_ticks,
)
from .planner import DEFAULT_BUDGET, Planner, StrategyObjective, compress, objectives_of


@dataclass(frozen=True)
class PartialState:
    atoms: int
    bucket: int

    def __len__(self) -> int:
        return bin(self.atoms).count("1")


@dataclass(frozen=True)
class EvalResult:
    feasible: bool
    objectives: ObjectivePoint
    solved: int
    subproblems: int
    plan: ScheduledPlan | None = None


@dataclass
class Individual:
    states: tuple[PartialState, ...] = ()
    evaluation: EvalResult | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def key(self) -> tuple:
        return tuple((s.bucket, s.atoms) for s in self.states)

    def to_json(self, task: GroundTask) -> list[dict]:
        return [{"bucket": fmt_rational(from_ticks(s.bucket)),
                 "atoms": [str(task.atoms[i]) for i in bits(s.atoms)]} for s in self.states]

    @classmethod
    def from_json(cls, data: list[dict], task: GroundTask) -> "Individual":
        by_name = {str(a): i for i, a in enumerate(task.atoms)}
        states = []
        for entry in data:
            mask = 0
            for name in entry["atoms"]:
                mask |= 1 << by_name[name]
            states.append(PartialState(mask, to_ticks(Fraction(entry["bucket"]))))
        return cls(tuple(states))

    def dumps(self, task: GroundTask) -> str:
        return json.dumps(self.to_json(task))


@dataclass(frozen=True)
class StrategyWeights:
    makespan: Fraction = Fraction(1)
    secondary: Fraction = Fraction(1)

    def __post_init__(self):
        for name in ("makespan", "secondary"):
            object.__setattr__(self, name, Fraction(str(getattr(self, name))))
        if self.makespan < 0 or self.secondary < 0 or self.makespan + self.secondary <= 0:
            raise ValueError("strategy weights must be non-negative with a positive sum")


class Mutation(enum.Enum):
    ADD_STATE = "addState"
    DEL_STATE = "delState"
    ADD_ATOM = "addAtom"
    DEL_ATOM = "delAtom"


@dataclass(frozen=True)
class DaeParams:
    crossover_probability: float = 0.8
    mutation_probability: float = 0.8
    mutation_weights: tuple[float, float, float, float] = (1, 1, 3, 3)
    budget: int = DEFAULT_BUDGET
    penalty_base: Fraction | None = None

    def __post_init__(self):
        for name in ("crossover_probability", "mutation_probability"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if len(self.mutation_weights) != 4 or any(w < 0 for w in self.mutation_weights):
            raise ValueError("mutation_weights needs four non-negative values")
        if sum(self.mutation_weights) <= 0:
            raise ValueError("mutation_weights must have a positive sum")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.penalty_base is not None and self.penalty_base <= 0:
            raise ValueError("penalty_base must be positive")


class AtomPool:
    """Atoms allowed in partial states, bucketed by earliest start time."""

    def __init__(self, task: GroundTask, est: Sequence[float] | None = None):
        self.task = task
        est = earliest_start_ticks(task) if est is None else est
        self.est = list(est)
        self.times = sorted({t for t in self.est if t != INF})
        self.allowed = {t: [i for i, e in enumerate(self.est) if e <= t] for t in self.times}
        group_of = {}
        for g in task.object_groups:
            for i in bits(g):
                group_of[i] = g
        self.mutex_mask = [group_of.get(i, 1 << i) & ~(1 << i) for i in range(len(task.atoms))]

    def consistent(self, mask: int) -> bool:
        return all(not (mask & self.mutex_mask[i]) for i in bits(mask))

    def random_state(self, bucket: int, rng: random.Random) -> PartialState:
        allowed = self.allowed[bucket]
        target = rng.randint(1, len(allowed))
        mask = 0
        size = 0
        for _ in range(len(allowed)):
            if size >= target:
                break
            i = allowed[rng.randrange(len(allowed))]
            if (mask >> i) & 1 or mask & self.mutex_mask[i]:
                continue
            mask |= 1 << i
            size += 1
        return PartialState(mask, bucket)


def chronological(states: Sequence[PartialState]) -> bool:
    return all(a.bucket <= b.bucket for a, b in zip(states, states[1:]))


def init_individual(pool: AtomPool, rng: random.Random) -> Individual:
    n = rng.randint(1, len(pool.times))
    buckets = sorted(rng.sample(pool.times, n))
    return Individual(tuple(pool.random_state(b, rng) for b in buckets))


def splice(a: Individual, b: Individual, cut_a: int, cut_b: int) -> Individual:
    first = a.states[:cut_a] + b.states[cut_b:]
    if chronological(first):
        return Individual(first)
    mirror = b.states[:cut_b] + a.states[cut_a:]
    if chronological(mirror):
        return Individual(mirror)
    return Individual(a.states)


def crossover(a: Individual, b: Individual, rng: random.Random) -> Individual:
    return splice(a, b, rng.randint(0, len(a)), rng.randint(0, len(b)))


def mutate(ind: Individual, pool: AtomPool, params: DaeParams, rng: random.Random) -> Individual:
    op = rng.choices(list(Mutation), weights=params.mutation_weights)[0]
    return apply_mutation(ind, op, pool, rng)


def apply_mutation(ind: Individual, op: Mutation, pool: AtomPool,
                   rng: random.Random) -> Individual:
    states = list(ind.states)
    n = len(states)
    if op is Mutation.ADD_STATE:
        pos = rng.randint(0, n)
        lo = states[pos - 1].bucket if pos > 0 else pool.times[0]
        hi = states[pos].bucket if pos < n else pool.times[-1]
        bucket = rng.choice([t for t in pool.times if lo <= t <= hi])
        states.insert(pos, pool.random_state(bucket, rng))
    elif n == 0:
        return ind
    elif op is Mutation.DEL_STATE:
        del states[rng.randrange(n)]
    elif op is Mutation.ADD_ATOM:
        idx = rng.randrange(n)
        s = states[idx]
        candidates = [i for i in pool.allowed[s.bucket]
                      if not (s.atoms >> i) & 1 and not s.atoms & pool.mutex_mask[i]]
        if not candidates:
            return ind
        states[idx] = replace(s, atoms=s.atoms | 1 << rng.choice(candidates))
    else:
        idx = rng.randrange(n)
        s = states[idx]
        atoms = bits(s.atoms)
        left = s.atoms & ~(1 << rng.choice(atoms))
        if left:
            states[idx] = replace(s, atoms=left)
        else:
            del states[idx]
    return Individual(tuple(states))


def choose_strategy(w: StrategyWeights, rng: random.Random) -> StrategyObjective:
    total = w.makespan + w.secondary
    if rng.random() * float(total) < float(w.makespan):
        return StrategyObjective.MAKESPAN
    return StrategyObjective.SECONDARY


def default_penalty_base(task: GroundTask) -> Fraction:
    """Ten times the slowest single-corridor makespan of the instance."""
    cfg = task.config
    if cfg is not None and cfg.planes == 2:
        return 10 * (6 * cfg.k - 2) * max(cfg.durations)
    return 10 * from_ticks(sum(a.duration for a in task.actions))


def penalized_objectives(solved: int, total: int, base) -> ObjectivePoint:
    if not 0 <= solved < total:
        raise ValueError("penalty needs 0 <= solved < total")
    v = Fraction(base) * (2 - Fraction(solved, total))
    return ObjectivePoint(v, v)


def evaluate(ind: Individual, task: GroundTask, w: StrategyWeights, params: DaeParams,
             rng: random.Random, planner: Planner | None = None) -> EvalResult:
    """Decode ``ind`` through the planner; unfeasible results carry a penalty."""
    planner = planner or Planner(task, params.budget)
    base = params.penalty_base if params.penalty_base is not None else default_penalty_base(task)
    goals = [s.atoms for s in ind.states] + [task.goal]
    strategies = [choose_strategy(w, rng) for _ in goals]
    state = task.initial
    seq = []
    for u, (goal, strategy) in enumerate(zip(goals, strategies)):
        sub = planner.solve(state, goal, strategy, params.budget)
        if sub is None:
            return EvalResult(False, penalized_objectives(u, len(goals), base), u, len(goals))
        for a in sub:
            state = (state & ~a.delete) | a.add
        seq.extend(sub)
    plan = compress(seq, task)
    return EvalResult(True, objectives_of(plan, task), len(goals), len(goals), plan)
