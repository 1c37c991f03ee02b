"""Satisficing forward-search planner used to solve the DaE sub-problems.

Additive delete-relaxation heuristic, relaxed-plan lookahead and a cap on
expanded nodes. Search is sequential; parallelism is recovered afterwards
by :func:`compress`.
"""

from __future__ import annotations

import enum
import heapq
from fractions import Fraction
from typing import Sequence

from .core import (
    INF,
    GroundAction,
    GroundTask,
    Mode,
    ObjectivePoint,
    ScheduledPlan,
    bits,
    from_ticks,
    step,
    validate_plan,
)

try:
    from . import _kernel
except ImportError:  # pragma: no cover - numba missing
    _kernel = None

DEFAULT_BUDGET = 1000
# weight given to actions that carry no tax/risk, keeps the Secondary search off plateaus
EPSILON_TICKS = 1
_CACHE_LIMIT = 200_000


class StrategyObjective(enum.Enum):
    MAKESPAN = "makespan"
    SECONDARY = "secondary"


_STRATEGY_ORDER = (StrategyObjective.MAKESPAN, StrategyObjective.SECONDARY)


def action_weights(task: GroundTask, strategy: StrategyObjective) -> tuple[int, ...]:
    if strategy is StrategyObjective.MAKESPAN:
        return tuple(a.duration for a in task.actions)
    if task.mode is Mode.COST:
        return tuple(a.cost or EPSILON_TICKS for a in task.actions)
    return tuple(a.risk or EPSILON_TICKS for a in task.actions)


class Planner:
    """Holds per-task lookup tables and a heuristic cache.

    One instance per worker; not safe to share across threads mid-search.
    """

    def __init__(self, task: GroundTask, budget: int = DEFAULT_BUDGET,
                 compiled: bool | None = None):
        if budget < 1:
            raise ValueError("node budget must be >= 1")
        self.task = task
        self.budget = budget
        self.weights = {s: action_weights(task, s) for s in StrategyObjective}
        self._compiled = None
        if compiled is None:
            compiled = _kernel is not None and len(task.atoms) <= _kernel.MAX_ATOMS
        if compiled:
            if _kernel is None:
                raise RuntimeError("numba is not available")
            self._compiled = _kernel.CompiledSearch(
                task, [self.weights[s] for s in _STRATEGY_ORDER], budget)
        self._pre = task.pre_lists
        self._add = task.add_lists
        self._consumers = task.consumers
        self._n_pre = [len(p) for p in self._pre]
        self._actions = task.actions
        self._pre_masks = [a.pre for a in task.actions]
        # actions keyed by their lowest-index precondition, for successor generation
        by_key: dict[int, list[GroundAction]] = {}
        self._no_pre: list[GroundAction] = []
        for a in task.actions:
            if a.pre:
                by_key.setdefault((a.pre & -a.pre).bit_length() - 1, []).append(a)
            else:
                self._no_pre.append(a)
        self._by_key = by_key
        self._h_cache: dict[tuple, tuple] = {}
        self.expanded = 0

    # -- heuristic -------------------------------------------------------

    def heuristic_ticks(self, state: int, goal: int,
                        strategy: StrategyObjective) -> tuple[float, tuple[GroundAction, ...]]:
        key = (state, goal, strategy)
        hit = self._h_cache.get(key)
        if hit is not None:
            return hit
        result = self._h_add(state, goal, self.weights[strategy])
        if len(self._h_cache) >= _CACHE_LIMIT:
            self._h_cache.clear()
        self._h_cache[key] = result
        return result

    def _h_add(self, state: int, goal: int, w: Sequence[int]):
        open_goal = goal & ~state
        if not open_goal:
            return 0, ()
        n = len(self.task.atoms)
        cost = [INF] * n
        level = [0] * n
        support = [-1] * n
        heap = []
        for i in bits(state):
            cost[i] = 0
            heap.append((0, i))
        remaining = list(self._n_pre)
        acc = [0] * len(remaining)
        act_level = [0] * len(remaining)
        for a in self._no_pre:
            for j in self._add[a.index]:
                if w[a.index] < cost[j]:
                    cost[j] = w[a.index]
                    support[j] = a.index
                    level[j] = 1
                    heap.append((cost[j], j))
        heapq.heapify(heap)
        done = 0
        pending = open_goal
        consumers, add = self._consumers, self._add
        while heap and pending:
            c, i = heapq.heappop(heap)
            if c > cost[i] or (done >> i) & 1:
                continue
            done |= 1 << i
            pending &= ~(1 << i)
            li = level[i]
            for a in consumers[i]:
                remaining[a] -= 1
                acc[a] += c
                if li > act_level[a]:
                    act_level[a] = li
                if remaining[a] == 0:
                    ca = acc[a] + w[a]
                    la = act_level[a] + 1
                    for j in add[a]:
                        if ca < cost[j]:
                            cost[j] = ca
                            support[j] = a
                            level[j] = la
                            heapq.heappush(heap, (ca, j))
        if pending:
            return INF, ()
        value = 0
        for j in bits(open_goal):
            value += cost[j]
        # backchain best supporters from the open goals
        chosen: dict[int, int] = {}
        stack = bits(open_goal)
        seen = state
        while stack:
            j = stack.pop()
            if (seen >> j) & 1:
                continue
            seen |= 1 << j
            a = support[j]
            if a in chosen:
                continue
            chosen[a] = level[j]
            stack.extend(self._pre[a])
        relaxed = tuple(self._actions[a] for a in sorted(chosen, key=lambda a: (chosen[a], a)))
        return value, relaxed

    # -- search ----------------------------------------------------------

    def successors(self, state: int):
        for a in self._no_pre:
            yield a
        for i in bits(state):
            for a in self._by_key.get(i, ()):
                if not (a.pre & ~state):
                    yield a

    def solve(self, initial: int, goal: int, strategy: StrategyObjective,
              budget: int | None = None) -> list[GroundAction] | None:
        """Greedy best-first search; ``None`` when the budget runs out.

        Open nodes are ordered by h, then g, then insertion order; g and h both
        use the strategy's action weights. Goal tests happen at generation.
        """
        budget = self.budget if budget is None else budget
        self.expanded = 0
        if not (goal & ~initial):
            return []
        if self._compiled is not None:
            idx, self.expanded = self._compiled.solve(
                initial, goal, _STRATEGY_ORDER.index(strategy), budget, _CACHE_LIMIT)
            return None if idx is None else [self._actions[i] for i in idx]
        w = self.weights[strategy]
        h0, _ = self.heuristic_ticks(initial, goal, strategy)
        if h0 == INF:
            return None
        best_g = {initial: 0}
        parent: dict[int, tuple[int, tuple[GroundAction, ...]]] = {}
        heap = [(h0, 0, 0, initial)]
        counter = 1

        def path_to(state: int) -> list[GroundAction]:
            chunks = []
            while state != initial:
                prev, acts = parent[state]
                chunks.append(acts)
                state = prev
            return [a for chunk in reversed(chunks) for a in chunk]

        while heap:
            _, g, _, s = heapq.heappop(heap)
            if g > best_g.get(s, INF):
                continue
            if self.expanded >= budget:
                return None
            self.expanded += 1
            _, relaxed = self.heuristic_ticks(s, goal, strategy)
            children = []
            if relaxed:
                s_la, prefix = lookahead(s, relaxed)
                if prefix:
                    children.append((s_la, tuple(prefix), sum(w[a.index] for a in prefix)))
            for a in self.successors(s):
                children.append(((s & ~a.delete) | a.add, (a,), w[a.index]))
            for child, acts, cost in children:
                g2 = g + cost
                if g2 >= best_g.get(child, INF):
                    continue
                best_g[child] = g2
                parent[child] = (s, acts)
                if not (goal & ~child):
                    return path_to(child)
                h, _ = self.heuristic_ticks(child, goal, strategy)
                if h == INF:
                    continue
                heapq.heappush(heap, (h, g2, counter, child))
                counter += 1
        return None


def heuristic(state: int, goal: int, strategy: StrategyObjective,
              task: GroundTask) -> tuple[Fraction | float, tuple[GroundAction, ...]]:
    value, relaxed = Planner(task, compiled=False)._h_add(state, goal, action_weights(task, strategy))
    return (INF if value == INF else from_ticks(value)), relaxed


def lookahead(state: int, relaxed: Sequence[GroundAction]) -> tuple[int, list[GroundAction]]:
    """Greedily apply the first not-yet-applied relaxed action that is applicable."""
    pending = list(relaxed)
    applied = []
    progress = True
    while progress and pending:
        progress = False
        for i, a in enumerate(pending):
            if not (a.pre & ~state):
                state = (state & ~a.delete) | a.add
                applied.append(a)
                del pending[i]
                progress = True
                break
    return state, applied


def solve_subproblem(task: GroundTask, initial: int, goal: int, strategy: StrategyObjective,
                     budget: int = DEFAULT_BUDGET) -> list[GroundAction] | None:
    return Planner(task, budget, compiled=False).solve(initial, goal, strategy)


def compress(seq: Sequence[GroundAction], task: GroundTask) -> ScheduledPlan:
    """Left-shift a sequential plan into a parallel schedule (start times in ticks).

    An action waits for: earlier actions on a shared plane or passenger, the
    last earlier achiever of each of its preconditions, and earlier actions
    needing an atom it deletes.
    """
    state = task.initial
    obj_end: dict[int, int] = {}
    adder_end: dict[int, int] = {}
    user_end: dict[int, int] = {}
    steps = []
    for a in seq:
        state = step(state, a)
        start = 0
        for o in bits(a.objects):
            start = max(start, obj_end.get(o, 0))
        for p in task.pre_lists[a.index]:
            start = max(start, adder_end.get(p, 0))
        for d in bits(a.delete):
            start = max(start, user_end.get(d, 0))
        end = start + a.duration
        for o in bits(a.objects):
            obj_end[o] = end
        for p in task.add_lists[a.index]:
            adder_end[p] = end
        for p in task.pre_lists[a.index]:
            user_end[p] = max(user_end.get(p, 0), end)
        steps.append((start, a))
    return ScheduledPlan(tuple(steps))


def objectives_of(plan: ScheduledPlan, task: GroundTask) -> ObjectivePoint:
    return validate_plan(task, plan)


def sequence_makespan(seq: Sequence[GroundAction]) -> int:
    """Makespan (ticks) of the strictly sequential schedule."""
    return sum(a.duration for a in seq)
