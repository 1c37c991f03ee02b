"""Selection schemes (NSGA-II, SPEA2, IBEA), indicators and the hypervolume metric.

Selection functions work on plain ``(makespan, secondary)`` pairs and return
indices into the input; ties are always broken by input position. Unfeasible
individuals carry penalized objectives and are ranked like everyone else.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .core import ObjectivePoint, ParetoFront

Pair = Sequence[float]


@dataclass(frozen=True)
class ScoredPoint:
    objectives: ObjectivePoint
    feasible: bool
    owner: Any = None


class Scheme(enum.Enum):
    NSGA2 = "nsga2"
    SPEA2 = "spea2"
    IBEA = "ibea"


class IndicatorKind(enum.Enum):
    EPS_PLUS = "eps"
    HYP_DIFF = "hyp"


@dataclass(frozen=True)
class MoeaParams:
    scheme: Scheme = Scheme.IBEA
    population_size: int = 100
    archive_size: int | None = None
    indicator: IndicatorKind = IndicatorKind.HYP_DIFF
    kappa: float = 0.05
    reference_point: tuple[float, float] = (1.1, 1.1)

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.archive_size is not None and self.archive_size < 1:
            raise ValueError("archive_size must be >= 1")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @property
    def archive(self) -> int:
        return self.population_size if self.archive_size is None else self.archive_size


SCHEME_NAMES = {
    "nsga2": (Scheme.NSGA2, IndicatorKind.HYP_DIFF),
    "spea2": (Scheme.SPEA2, IndicatorKind.HYP_DIFF),
    "ibea-eps": (Scheme.IBEA, IndicatorKind.EPS_PLUS),
    "ibea-hyp": (Scheme.IBEA, IndicatorKind.HYP_DIFF),
}


def scheme_label(params: MoeaParams) -> str:
    for name, (scheme, ind) in SCHEME_NAMES.items():
        if params.scheme is scheme and (scheme is not Scheme.IBEA or params.indicator is ind):
            return name
    raise ValueError(params)


def _weakly_dominates(p: Pair, q: Pair) -> bool:
    return p[0] <= q[0] and p[1] <= q[1]


def _dominates(p: Pair, q: Pair) -> bool:
    return p[0] <= q[0] and p[1] <= q[1] and (p[0] < q[0] or p[1] < q[1])


def _as_array(points: Sequence[Pair]) -> np.ndarray:
    return np.array([[float(p[0]), float(p[1])] for p in points], dtype=float).reshape(-1, 2)


def _domination_matrix(P: np.ndarray) -> np.ndarray:
    """D[i, j] is true when point i dominates point j."""
    le = (P[:, None, :] <= P[None, :, :]).all(axis=2)
    lt = (P[:, None, :] < P[None, :, :]).any(axis=2)
    return le & lt


# -- NSGA-II ----------------------------------------------------------------

def nondominated_sort(points: Sequence[Pair]) -> list[int]:
    if not len(points):
        raise ValueError("cannot rank an empty population")
    D = _domination_matrix(_as_array(points))
    count = D.sum(axis=0)
    rank = [0] * len(points)
    current = np.flatnonzero(count == 0)
    r = 0
    while current.size:
        for i in current:
            rank[i] = r
        count = count - D[current].sum(axis=0)
        count[current] = -1
        current = np.flatnonzero(count == 0)
        r += 1
    return rank


def crowding_distance(points: Sequence[Pair]) -> list[float]:
    n = len(points)
    dist = [0.0] * n
    if n <= 2:
        return [math.inf] * n
    for m in range(2):
        order = sorted(range(n), key=lambda i: (float(points[i][m]), i))
        lo, hi = float(points[order[0]][m]), float(points[order[-1]][m])
        dist[order[0]] = dist[order[-1]] = math.inf
        if hi == lo:
            continue
        for pos in range(1, n - 1):
            i = order[pos]
            if dist[i] != math.inf:
                dist[i] += (float(points[order[pos + 1]][m]) - float(points[order[pos - 1]][m])) / (hi - lo)
    return dist


def crowded_fitness(points: Sequence[Pair]) -> list[tuple[int, float]]:
    """(rank, -crowding) per point; lower is better."""
    rank = nondominated_sort(points)
    fit: list[tuple[int, float]] = [(0, 0.0)] * len(points)
    for r in set(rank):
        members = [i for i, x in enumerate(rank) if x == r]
        crowd = crowding_distance([points[i] for i in members])
        for i, c in zip(members, crowd):
            fit[i] = (r, -c)
    return fit


def nsga2_survivors(points: Sequence[Pair], mu: int) -> list[int]:
    if len(points) < mu:
        raise ValueError("fewer candidates than survivors")
    rank = nondominated_sort(points)
    chosen: list[int] = []
    for r in range(max(rank) + 1):
        members = [i for i, x in enumerate(rank) if x == r]
        if len(chosen) + len(members) <= mu:
            chosen.extend(members)
            if len(chosen) == mu:
                break
            continue
        crowd = crowding_distance([points[i] for i in members])
        order = sorted(range(len(members)), key=lambda j: (-crowd[j], members[j]))
        chosen.extend(members[j] for j in order[:mu - len(chosen)])
        break
    return sorted(chosen)


# -- SPEA2 ------------------------------------------------------------------

def _normalized(P: np.ndarray) -> np.ndarray:
    lo = P.min(axis=0)
    span = P.max(axis=0) - lo
    span[span == 0] = 1.0
    return (P - lo) / span


def _distances(P: np.ndarray) -> np.ndarray:
    N = _normalized(P)
    return np.sqrt(((N[:, None, :] - N[None, :, :]) ** 2).sum(axis=2))


def spea2_strength(points: Sequence[Pair]) -> tuple[list[int], list[int]]:
    """Strength S(x) and raw fitness R(x) (sum of strengths of x's dominators)."""
    D = _domination_matrix(_as_array(points))
    S = D.sum(axis=1)
    R = (D * S[:, None]).sum(axis=0)
    return [int(s) for s in S], [int(r) for r in R]


def spea2_fitness(points: Sequence[Pair], k: int | None = None) -> list[float]:
    """F = R + 1/(sigma_k + 2), sigma_k the distance to the k-th nearest neighbour."""
    if not len(points):
        raise ValueError("cannot score an empty population")
    _, R = spea2_strength(points)
    n = len(points)
    if n == 1:
        return [R[0] + 0.5]
    k = math.isqrt(n) if k is None else k
    dist = _distances(_as_array(points))
    fit = []
    for i in range(n):
        others = np.sort(np.delete(dist[i], i))
        sigma = others[min(k, n - 1) - 1]
        fit.append(R[i] + 1.0 / (sigma + 2.0))
    return fit


def spea2_truncate(points: Sequence[Pair], fitness: Sequence[float], size: int) -> list[int]:
    """Environmental selection into an archive of exactly ``size`` indices."""
    if len(points) < size:
        raise ValueError("fewer candidates than archive slots")
    front = [i for i, f in enumerate(fitness) if f < 1]
    if len(front) <= size:
        rest = sorted((i for i, f in enumerate(fitness) if f >= 1), key=lambda i: (fitness[i], i))
        return sorted(front + rest[:size - len(front)])
    dist = _distances(_as_array([points[i] for i in front]))
    alive = list(range(len(front)))
    while len(alive) > size:
        sub = dist[np.ix_(alive, alive)]
        np.fill_diagonal(sub, np.inf)
        vectors = np.sort(sub, axis=1)
        worst = 0
        for j in range(1, len(alive)):
            # lexicographic comparison of sorted distance vectors; first index wins ties
            diff = np.flatnonzero(vectors[j] != vectors[worst])
            if diff.size and vectors[j][diff[0]] < vectors[worst][diff[0]]:
                worst = j
        del alive[worst]
    return sorted(front[j] for j in alive)


# -- indicators and IBEA ----------------------------------------------------

def eps_indicator(x: Pair, y: Pair) -> float:
    """Smallest shift of ``x`` that makes it weakly dominate ``y``."""
    return max(x[0] - y[0], x[1] - y[1])


def hypdiff_indicator(x: Pair, y: Pair, ref: Pair = (1.1, 1.1)) -> float:
    """Volume weakly dominated by ``y`` but not by ``x``."""
    hy = (ref[0] - y[0]) * (ref[1] - y[1])
    overlap = (ref[0] - max(x[0], y[0])) * (ref[1] - max(x[1], y[1]))
    return hy - overlap


def indicator_matrix(N: np.ndarray, kind: IndicatorKind, ref: Pair) -> np.ndarray:
    """M[i, j] = I(point i, point j) on already normalized points."""
    if kind is IndicatorKind.EPS_PLUS:
        return (N[:, None, :] - N[None, :, :]).max(axis=2)
    hy = (ref[0] - N[:, 0]) * (ref[1] - N[:, 1])
    mx = np.maximum(N[:, None, :], N[None, :, :])
    overlap = (ref[0] - mx[:, :, 0]) * (ref[1] - mx[:, :, 1])
    return hy[None, :] - overlap


def ibea_fitness(points: Sequence[Pair], params: MoeaParams) -> tuple[np.ndarray, np.ndarray]:
    """Return (F, scaled contribution matrix); higher F is better."""
    P = _as_array(points)
    lo = P.min(axis=0)
    span = P.max(axis=0) - lo
    span[span == 0] = 1.0
    M = indicator_matrix((P - lo) / span, params.indicator, params.reference_point)
    c = np.abs(M).max()
    if c == 0:
        c = 1.0
    E = -np.exp(-M / (c * params.kappa))
    np.fill_diagonal(E, 0.0)
    return E.sum(axis=0), E


def ibea_survivors(points: Sequence[Pair], params: MoeaParams, mu: int | None = None) -> tuple[list[int], list[float]]:
    """Drop the worst-F point and update F until ``mu`` remain. Returns (indices, F)."""
    mu = params.population_size if mu is None else mu
    if len(points) < mu:
        raise ValueError("fewer candidates than survivors")
    F, E = ibea_fitness(points, params)
    alive = np.ones(len(points), dtype=bool)
    for _ in range(len(points) - mu):
        masked = np.where(alive, F, np.inf)
        worst = int(np.argmin(masked))
        alive[worst] = False
        F = F - E[worst]
    idx = [int(i) for i in np.flatnonzero(alive)]
    return idx, [float(F[i]) for i in idx]


def binary_tournament(fitness: Sequence, rng: random.Random) -> int:
    """Index of the better (lower) of two draws with replacement; ties go to the first."""
    n = len(fitness)
    if n == 0:
        raise ValueError("empty population")
    a = rng.randrange(n)
    b = rng.randrange(n)
    return b if fitness[b] < fitness[a] else a


def ibea_step(points: Sequence[Pair], params: MoeaParams,
              rng: random.Random) -> tuple[list[int], list[int]]:
    """(mating pool, survivors), both as indices into ``points``."""
    survivors, F = ibea_survivors(points, params)
    neg = [-f for f in F]
    pool = [survivors[binary_tournament(neg, rng)] for _ in range(len(survivors))]
    return pool, survivors


# -- hypervolume --------------------------------------------------------------

def hypervolume_2d(points: Sequence[Pair], ref: Pair):
    """Area weakly dominated by ``points`` inside the box bounded by ``ref``."""
    inside = sorted((p[0], p[1]) for p in points if p[0] < ref[0] and p[1] < ref[1])
    area = 0
    best_y = ref[1]
    for i, (x, y) in enumerate(inside):
        if y < best_y:
            best_y = y
        nxt = inside[i + 1][0] if i + 1 < len(inside) else ref[0]
        area += (nxt - x) * (ref[1] - best_y)
    return area


def unary_hypervolume(approx: Sequence, exact: ParetoFront | Sequence,
                      ref: tuple = (Fraction(11, 10), Fraction(11, 10))) -> Fraction:
    """Hypervolume deficit of ``approx`` with respect to the true front; 0 means reached."""
    ex = [(Fraction(p[0]), Fraction(p[1])) for p in exact]
    if not ex:
        raise ValueError("exact front must be non-empty")
    lo = [min(p[m] for p in ex) for m in range(2)]
    span = [max(p[m] for p in ex) - lo[m] or Fraction(1) for m in range(2)]
    ref = (Fraction(ref[0]), Fraction(ref[1]))

    def norm(p, clip):
        # clipping to the reference box (not the unit box) keeps a point beyond an
        # extreme from being credited with that extreme
        out = []
        for m in range(2):
            v = (Fraction(p[m]) - lo[m]) / span[m]
            out.append(min(max(v, Fraction(0)), ref[m]) if clip else v)
        return tuple(out)

    hv_exact = hypervolume_2d([norm(p, False) for p in ex], ref)
    hv_approx = hypervolume_2d([norm(p, True) for p in approx], ref)
    return hv_exact - hv_approx


# -- attainment -------------------------------------------------------------

class AttainmentTracker:
    """First clock at which each exact-front point is weakly dominated."""

    def __init__(self, exact: ParetoFront | Sequence):
        self.points = [(p[0], p[1]) for p in exact]
        self.evals: list[int | None] = [None] * len(self.points)
        self.seconds: list[float | None] = [None] * len(self.points)

    def update(self, point: Pair, evals: int, seconds: float) -> None:
        for i, target in enumerate(self.points):
            if self.evals[i] is None and _weakly_dominates(point, target):
                self.evals[i] = evals
                self.seconds[i] = seconds

    @property
    def attained(self) -> list[bool]:
        return [e is not None for e in self.evals]

    def rows(self) -> list[tuple]:
        return [(p[0], p[1], -1 if e is None else e, -1 if s is None else s)
                for p, e, s in zip(self.points, self.evals, self.seconds)]


def attainment_update(tracker: AttainmentTracker, point: Pair, evals: int,
                      seconds: float) -> AttainmentTracker:
    tracker.update(point, evals, seconds)
    return tracker
