"""The nine acceptance criteria, each at its stated tolerance.

Criteria 4, 6 and 7 need multi-seed campaigns; these are computed on first
use (hours on one core for 6 and 7) and cached under ``results/``. Running
``python3 tests/campaigns.py`` ahead of time precomputes them.
"""

import itertools
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from campaigns import RESULTS, TABLE_SCHEMES, campaign
from mozeno import cli
from mozeno.core import (
    Mode,
    MultiZenoConfig,
    exact_front_analytic,
    ground_multizeno,
    read_front_csv,
)
from mozeno.dae import (
    AtomPool,
    DaeParams,
    StrategyWeights,
    chronological,
    crossover,
    evaluate,
    init_individual,
    mutate,
)
from mozeno.harness import attainment_fraction, write_stats
from mozeno.moea import (
    eps_indicator,
    hypervolume_2d,
    nondominated_sort,
    spea2_strength,
    unary_hypervolume,
)
from mozeno.oracle import exact_front_oracle
from mozeno.planner import Planner
from mozeno.stats import BETTER, EQUIVALENT, WORSE, exact_p_value, signed_ranks


def _front_cli(tmp_path, *args):
    out = tmp_path / "front.csv"
    assert cli.main(["front", *args, "--out", str(out)]) == 0
    return [(p.makespan, p.secondary) for p in read_front_csv(out)]


def _second_differences(front):
    sec = [p[1] for p in front]
    return [sec[i + 1] - 2 * sec[i] + sec[i - 1] for i in range(1, len(sec) - 1)]


@pytest.mark.criterion(1, "exact analytic fronts")
def test_criterion_1_analytic_fronts(tmp_path, record_property):
    t0 = time.perf_counter()
    k1 = _front_cli(tmp_path, "--analytic", "--k", "1")
    assert k1 == [(8, 12), (12, 10), (16, 8), (20, 6), (24, 4)]
    counts = [len(_front_cli(tmp_path, "--analytic", "--k", str(k))) for k in (1, 2, 3)]
    assert counts == [5, 11, 17]
    k2 = set(_front_cli(tmp_path, "--analytic", "--k", "2"))
    assert {(20, 30), (24, 28), (28, 26), (48, 16), (56, 12)} <= k2
    elapsed = time.perf_counter() - t0
    record_property("detail", f"counts {counts}, {elapsed:.2f}s")
    assert elapsed < 1.0


@pytest.mark.criterion(2, "oracle agrees with analytic fronts")
def test_criterion_2_oracle_agreement(tmp_path, record_property):
    assert _front_cli(tmp_path, "--oracle", "--k", "1") == _front_cli(tmp_path, "--analytic", "--k", "1")
    t0 = time.perf_counter()
    k2 = _front_cli(tmp_path, "--oracle", "--k", "2")
    elapsed = time.perf_counter() - t0
    assert k2 == _front_cli(tmp_path, "--analytic", "--k", "2")
    risk = _front_cli(tmp_path, "--oracle", "--k", "1", "--mode", "risk")
    assert [m for m, _ in risk] == [8, 16, 24]
    record_property("detail", f"k=2 oracle {elapsed:.1f}s")
    assert elapsed < 300


@pytest.mark.criterion(3, "front shape follows alpha (k=2 oracle)")
def test_criterion_3_front_shape(record_property):
    signs = {}
    for alpha in (Fraction(11, 10), Fraction(2), Fraction(29, 10)):
        front = exact_front_oracle(MultiZenoConfig(k=2).with_alpha(alpha))
        d2 = _second_differences(list(front))
        if all(x == 0 for x in d2):
            signs[alpha] = "0"
        elif all(x >= 0 for x in d2):
            signs[alpha] = "+"
        elif all(x <= 0 for x in d2):
            signs[alpha] = "-"
        else:
            signs[alpha] = "mixed " + ",".join(str(x) for x in d2 if x != 0)
    record_property("detail", ", ".join(f"alpha={a}: {s}" for a, s in signs.items()))
    assert signs[Fraction(11, 10)] == "+"
    assert signs[Fraction(2)] == "0"
    assert signs[Fraction(29, 10)] == "-"


@pytest.mark.criterion(4, "every k=1 front point reached by some run")
def test_criterion_4_optimal_reachability(record_property):
    t0 = time.perf_counter()
    runs = campaign("k1-ibea-hyp")
    elapsed = time.perf_counter() - t0
    exact = list(exact_front_analytic(MultiZenoConfig(k=1)))
    assert len(runs) == 10 and all(r.evaluations == 20_000 for r in runs)
    full = [r.seed for r in runs if all(a[2] != -1 for a in r.attainment)]
    per_point = [sum(1 for r in runs if r.attainment[i][2] != -1) for i in range(len(exact))]
    record_property("detail", f"runs with full front {len(full)}/10, per-point {per_point}, "
                              f"campaign {elapsed:.0f}s")
    assert full
    assert all(n >= 1 for n in per_point)


@pytest.mark.criterion(5, "hypervolume metric")
def test_criterion_5_hypervolume(record_property):
    for k in (1, 2, 3):
        ex = exact_front_analytic(MultiZenoConfig(k=k))
        assert unary_hypervolume(ex, ex) == 0
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 12))
        x = np.sort(rng.random(n))
        y = np.sort(rng.random(n))[::-1]
        pts = list(zip(x.tolist(), y.tolist()))
        exact = hypervolume_2d(pts, (1.1, 1.1))
        samples = rng.random((1_000_000, 2)) * 1.1
        P = np.array(pts)
        covered = np.zeros(len(samples), dtype=bool)
        for p in P:
            covered |= (samples[:, 0] >= p[0]) & (samples[:, 1] >= p[1])
        mc = covered.mean() * 1.1 * 1.1
        worst = max(worst, abs(mc - exact))
    record_property("detail", f"max |sweep - MC| = {worst:.5f}")
    assert worst <= 0.005


@pytest.mark.criterion(6, "IBEA-HypDiff not worse than NSGA-II (k=2, 30x50k)")
def test_criterion_6_scheme_ordering(record_property):
    campaigns = {name.removeprefix("k2-"): campaign(name) for name in TABLE_SCHEMES}
    text = write_stats(campaigns, RESULTS / "scheme_table.csv")
    (RESULTS / "scheme_table.txt").write_text(text)
    rows = {row[0]: row for row in (line.split() for line in text.splitlines()[1:])}
    header = text.splitlines()[0].split()
    cell = rows["ibea-hyp"][1 + header.index("nsga2")]
    record_property("detail", f"ibea-hyp vs nsga2: {cell}")
    print(text)
    assert cell in (BETTER, EQUIVALENT)
    assert cell != WORSE


@pytest.mark.criterion(7, "strategy ablation (k=2)")
def test_criterion_7_strategy_ablation(record_property):
    fixed = campaign("k2-ibea-hyp-makespan")
    mixed = campaign("k2-ibea-hyp")
    low = attainment_fraction(fixed, lambda m, s: m == 20 and s == 30)
    high = attainment_fraction(fixed, lambda m, s: m >= 48)
    both = sum(1 for r in mixed if r.attainment[0][2] != -1 and r.attainment[-1][2] != -1) / len(mixed)
    record_property("detail", f"fixed: (20,30) {low:.0%}, makespan>=48 {high:.0%}; "
                              f"mixed both extremes {both:.0%}")
    assert low >= 0.8
    assert high <= 0.2
    assert both >= 0.5


def _brute_ranks(points):
    ranks = [None] * len(points)
    left = set(range(len(points)))
    r = 0
    while left:
        front = {i for i in left
                 if not any(points[j][0] <= points[i][0] and points[j][1] <= points[i][1]
                            and points[j] != points[i] for j in left)}
        for i in front:
            ranks[i] = r
        left -= front
        r += 1
    return ranks


def _brute_strengths(points):
    def dom(p, q):
        return p[0] <= q[0] and p[1] <= q[1] and p != q
    S = [sum(dom(p, q) for q in points) for p in points]
    R = [sum(S[j] for j, q in enumerate(points) if dom(q, p)) for p in points]
    return S, R


def _brute_wilcoxon_p(ranks):
    n = len(ranks)
    mags = np.array([float(abs(r)) for r in ranks])
    observed = sum(float(r) for r in ranks if r > 0)
    signs = np.array(list(itertools.product((0, 1), repeat=n)), dtype=float)
    w = signs @ mags
    lower = int((w <= observed + 1e-9).sum())
    upper = int((w >= observed - 1e-9).sum())
    return min(Fraction(1), Fraction(2 * min(lower, upper), 2 ** n))


@pytest.mark.criterion(8, "MOEA unit oracles vs brute force")
def test_criterion_8_unit_oracles(record_property):
    rng = random.Random(8)
    for _ in range(1000):
        n = rng.randint(1, 20)
        pts = [(rng.randint(0, 8), rng.randint(0, 8)) for _ in range(n)]
        assert nondominated_sort(pts) == _brute_ranks(pts)
        assert list(spea2_strength(pts)) == list(_brute_strengths(pts))
        x = (Fraction(rng.randint(0, 100), 100), Fraction(rng.randint(0, 100), 100))
        y = (Fraction(rng.randint(0, 100), 100), Fraction(rng.randint(0, 100), 100))
        shift = next(Fraction(j, 100) for j in range(-100, 101)
                     if x[0] - Fraction(j, 100) <= y[0] and x[1] - Fraction(j, 100) <= y[1])
        assert eps_indicator(x, y) == shift
        m = rng.randint(6, 14)
        a = [rng.randint(0, 6) for _ in range(m)]
        b = [rng.randint(0, 6) for _ in range(m)]
        ranks = signed_ranks(a, b)
        if ranks:
            assert exact_p_value(ranks) == _brute_wilcoxon_p(ranks)
    record_property("detail", "1000 trials each")


def _check_individual(ind, pool):
    assert chronological(ind.states)
    for s in ind.states:
        assert s.atoms and pool.consistent(s.atoms)
        assert all(pool.est[i] <= s.bucket for i in range(len(pool.est)) if (s.atoms >> i) & 1)


@pytest.mark.criterion(9, "representation closure and evaluation determinism")
def test_criterion_9_closure(record_property):
    params = DaeParams()
    applied = 0
    for k in (1, 2):
        task = ground_multizeno(MultiZenoConfig(k=k))
        pool = AtomPool(task)
        rng = random.Random(k)
        pop = [init_individual(pool, rng) for _ in range(50)]
        for ind in pop:
            _check_individual(ind, pool)
        for _ in range(50_000):
            op = rng.random()
            if op < 0.2:
                child = init_individual(pool, rng)
            elif op < 0.6:
                child = crossover(rng.choice(pop), rng.choice(pop), rng)
            else:
                child = mutate(rng.choice(pop), pool, params, rng)
            _check_individual(child, pool)
            pop[rng.randrange(len(pop))] = child
            applied += 1
        planner = Planner(task)
        w = StrategyWeights(1, 1)
        for seed in range(20):
            ind = pop[seed]
            r1 = evaluate(ind, task, w, params, random.Random(seed), planner)
            r2 = evaluate(ind, task, w, params, random.Random(seed), Planner(task))
            assert r1 == r2
    record_property("detail", f"{applied} operator applications, 0 violations")
