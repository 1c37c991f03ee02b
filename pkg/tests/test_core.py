import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mozeno.core import (
    Atom,
    InapplicableActionError,
    InstanceTooLargeError,
    InvalidPlanError,
    Mode,
    MultiZenoConfig,
    ParetoFront,
    Predicate,
    ScheduledPlan,
    UnsupportedConfigError,
    bits,
    dominates,
    dump_instance,
    earliest_start_times,
    exact_front_analytic,
    ground_multizeno,
    load_instance,
    mutex,
    pareto_filter,
    person_at,
    plane_at,
    read_front_csv,
    step,
    to_ticks,
    validate_plan,
    write_front_csv,
)
from mozeno.oracle import exact_front_oracle, oracle_witnesses

K1 = ground_multizeno(MultiZenoConfig(k=1))
K1_RISK = ground_multizeno(MultiZenoConfig(k=1, mode=Mode.RISK))


def plan(task, *timed):
    return ScheduledPlan(tuple((to_ticks(t), task.action(name)) for t, name in timed))


def optimal_k1(task):
    """Two planes shuttling through city1: four landings there, makespan 8."""
    return plan(task,
                (0, "transport(p0,q0,c0,c1)"), (0, "transport(p1,q1,c0,c1)"),
                (2, "transport(p0,q0,c1,c4)"), (2, "fly(p1,c1,c0)"),
                (4, "fly(p0,c4,c1)"), (4, "transport(p1,q2,c0,c1)"),
                (6, "transport(p0,q1,c1,c4)"), (6, "transport(p1,q2,c1,c4)"))


class TestGrounding:
    def test_counts(self):
        assert len(K1.atoms) == 25
        kinds = [a.kind.value for a in K1.actions]
        assert len(K1.actions) == 96
        assert kinds.count("fly") == 24 and kinds.count("transport") == 72

    def test_goal_and_initial(self):
        assert K1.atoms_of(K1.goal) == {person_at(i, 4) for i in range(3)}
        init = K1.atoms_of(K1.initial)
        assert init == {plane_at(0, 0), plane_at(1, 0)} | {person_at(i, 0) for i in range(3)}

    def test_no_direct_edge_between_ends(self):
        for a in K1.actions:
            assert {a.src, a.dst} != {0, 4}
            assert a.src in (1, 2, 3) or a.dst in (1, 2, 3)

    def test_costs_only_on_central_landings(self):
        for a in K1.actions:
            assert not (a.add & a.delete)
            assert a.duration > 0
            if a.dst not in (1, 2, 3):
                assert a.cost == 0 and a.risk == 0

    def test_too_many_planes(self):
        with pytest.raises(ValueError):
            ground_multizeno(MultiZenoConfig(k=1, planes=3))

    def test_k2_sizes(self):
        task = ground_multizeno(MultiZenoConfig(k=2))
        assert len(task.atoms) == 2 * 5 + 6 * 5
        assert len(task.actions) == 2 * 12 + 2 * 6 * 12


class TestConfig:
    def test_defaults(self):
        cfg = MultiZenoConfig()
        assert cfg.durations == (2, 4, 6) and cfg.costs == (3, 2, 1) and cfg.risks == (3, 2, 1)
        assert cfg.passengers == 3 and cfg.alpha == 2

    def test_alpha_exact(self):
        assert MultiZenoConfig().with_alpha(1.1).alpha == Fraction(11, 10)

    def test_rejects_finer_than_tenths(self):
        with pytest.raises(ValueError):
            MultiZenoConfig(costs=(3, Fraction(1, 3), 1))

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            MultiZenoConfig(k=0)
        with pytest.raises(ValueError):
            MultiZenoConfig(durations=(0, 4, 6))

    def test_instance_file_roundtrip(self, tmp_path):
        cfg = MultiZenoConfig(k=2, mode=Mode.RISK).with_alpha(Fraction(29, 10))
        dump_instance(cfg, tmp_path / "i.json")
        assert load_instance(tmp_path / "i.json") == cfg
        assert json.loads((tmp_path / "i.json").read_text())["costs"] == [3, 2.9, 1]

    def test_instance_file_unknown_key(self, tmp_path):
        (tmp_path / "i.json").write_text('{"k": 1, "cities": 7}')
        with pytest.raises(ValueError):
            load_instance(tmp_path / "i.json")


class TestMutexAndStep:
    def test_mutex_examples(self):
        assert mutex(Atom(Predicate.PLANE_AT, 0, 0), Atom(Predicate.PLANE_AT, 0, 1))
        assert not mutex(Atom(Predicate.PLANE_AT, 0, 0), Atom(Predicate.PLANE_AT, 1, 0))
        assert not mutex(Atom(Predicate.PERSON_AT, 2, 4), Atom(Predicate.PLANE_AT, 0, 4))

    def test_fly_moves_plane(self):
        s = step(K1.initial, K1.action("fly(p0,c0,c1)"))
        atoms = K1.atoms_of(s)
        assert plane_at(0, 1) in atoms and plane_at(0, 0) not in atoms

    def test_inapplicable(self):
        with pytest.raises(InapplicableActionError):
            step(K1.initial, K1.action("transport(p0,q0,c1,c4)"))

    def test_chained_positions_consistent(self):
        s = step(K1.initial, K1.action("fly(p0,c0,c1)"))
        s = step(s, K1.action("fly(p0,c1,c4)"))
        atoms = K1.atoms_of(s)
        assert [a for a in atoms if a.predicate is Predicate.PLANE_AT and a.obj == 0] == [plane_at(0, 4)]

    def test_random_walks_stay_consistent(self):
        rng = random.Random(0)
        for _ in range(50):
            s = K1.initial
            for _ in range(30):
                options = [a for a in K1.actions if not (a.pre & ~s)]
                s = step(s, rng.choice(options))
                atoms = sorted(K1.atoms_of(s))
                assert not any(mutex(a, b) for a in atoms for b in atoms)
                assert len(atoms) == 5


class TestValidatePlan:
    def test_optimal_cost(self):
        assert validate_plan(K1, optimal_k1(K1)) == (8, 12)

    def test_optimal_risk(self):
        assert validate_plan(K1_RISK, optimal_k1(K1_RISK)) == (8, 3)

    def test_empty_plan_misses_goal(self):
        with pytest.raises(InvalidPlanError, match="goal"):
            validate_plan(K1, ScheduledPlan())

    def test_missing_precondition(self):
        bad = plan(K1, (0, "transport(p0,q0,c0,c1)"), (1, "transport(p0,q0,c1,c4)"))
        with pytest.raises(InvalidPlanError, match="missing"):
            validate_plan(K1, bad)

    def test_object_overlap(self):
        bad = plan(K1, (0, "fly(p0,c0,c1)"), (0, "fly(p0,c0,c2)"))
        with pytest.raises(InvalidPlanError):
            validate_plan(K1, bad)

    def test_listing_order_irrelevant(self):
        p = optimal_k1(K1)
        rng = random.Random(1)
        for _ in range(10):
            steps = list(p.steps)
            rng.shuffle(steps)
            assert validate_plan(K1, ScheduledPlan(tuple(steps))) == (8, 12)


class TestEarliestStart:
    def test_examples(self):
        est = earliest_start_times(K1)
        assert est[plane_at(0, 1)] == 2
        assert est[person_at(0, 4)] == 4
        assert est[plane_at(1, 0)] == 0

    def test_unreachable_is_infinite(self):
        task = K1.without_actions(lambda a: a.dst == 4)
        est = earliest_start_times(task)
        assert est[person_at(0, 4)] == float("inf")

    def test_monotone_in_actions(self):
        rng = random.Random(3)
        full = earliest_start_times(K1)
        for _ in range(20):
            drop = set(rng.sample(range(len(K1.actions)), 20))
            fewer = earliest_start_times(K1.without_actions(lambda a: a.index in drop))
            assert all(full[a] <= fewer[a] for a in K1.atoms)


class TestDominance:
    def test_examples(self):
        assert dominates((8, 12), (8, 13))
        assert not dominates((8, 12), (16, 8))
        assert not dominates((8, 12), (8, 12))

    def test_filter(self):
        assert pareto_filter([(8, 12), (9, 13), (16, 8)]).as_tuples() == [(8, 12), (16, 8)]
        assert pareto_filter([(8, 12), (8, 12)]).as_tuples() == [(8, 12)]
        front = exact_front_analytic(MultiZenoConfig())
        assert pareto_filter(front) == front

    def test_filter_empty(self):
        with pytest.raises(ValueError):
            pareto_filter([])

    def test_front_invariant(self):
        with pytest.raises(ValueError):
            ParetoFront(tuple(pareto_filter([(1, 2)])) + tuple(pareto_filter([(2, 3)])))

    @given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), min_size=1, max_size=40))
    @settings(max_examples=200, deadline=None)
    def test_filter_is_maximal_nondominated(self, pts):
        front = pareto_filter(pts).as_tuples()
        for p in front:
            assert not any(dominates(q, p) for q in pts)
        for q in pts:
            assert tuple(map(Fraction, q)) in front or any(dominates(p, q) or p == q for p in front)


class TestFronts:
    def test_analytic_k1(self):
        assert exact_front_analytic(MultiZenoConfig()).as_tuples() == [
            (8, 12), (12, 10), (16, 8), (20, 6), (24, 4)]

    @pytest.mark.parametrize("k,count", [(1, 5), (2, 11), (3, 17)])
    def test_analytic_counts_and_endpoints(self, k, count):
        f = exact_front_analytic(MultiZenoConfig(k=k))
        assert len(f) == count == 6 * k - 1
        assert f[0] == (12 * k - 4, 18 * k - 6)
        assert f[-1] == (36 * k - 12, 6 * k - 2)

    def test_analytic_risk(self):
        f = exact_front_analytic(MultiZenoConfig(k=2, mode=Mode.RISK))
        assert f.as_tuples() == [(20, 3), (40, 2), (60, 1)]

    def test_analytic_unsupported(self):
        with pytest.raises(UnsupportedConfigError):
            exact_front_analytic(MultiZenoConfig().with_alpha(Fraction(11, 10)))

    def test_oracle_k1(self):
        assert exact_front_oracle(MultiZenoConfig()) == exact_front_analytic(MultiZenoConfig())
        risk = MultiZenoConfig(mode=Mode.RISK)
        assert exact_front_oracle(risk).as_tuples() == [(8, 3), (16, 2), (24, 1)]

    @pytest.mark.parametrize("alpha", [Fraction(11, 10), Fraction(2), Fraction(29, 10)])
    def test_oracle_k1_alpha_grid_reproduces_analytic_points(self, alpha):
        cfg = MultiZenoConfig().with_alpha(alpha)
        front = exact_front_oracle(cfg)
        # the single-corridor extremes do not depend on alpha
        assert front[0] == (8, 12) and front[-1] == (24, 4)
        if alpha == 2:
            assert front == exact_front_analytic(cfg)

    def test_oracle_k1_alpha_low_is_convex(self):
        front = exact_front_oracle(MultiZenoConfig().with_alpha(Fraction(11, 10)))
        sec = [p.secondary for p in front]
        assert all(sec[i + 1] - 2 * sec[i] + sec[i - 1] >= 0 for i in range(1, len(sec) - 1))

    def test_oracle_witnesses_validate(self):
        for cfg in (MultiZenoConfig(), MultiZenoConfig().with_alpha(Fraction(29, 10)),
                    MultiZenoConfig(mode=Mode.RISK)):
            task = ground_multizeno(cfg)
            for pt, p in oracle_witnesses(cfg).items():
                assert validate_plan(task, p) == pt

    def test_oracle_too_large(self):
        with pytest.raises(InstanceTooLargeError):
            exact_front_oracle(MultiZenoConfig(k=3))

    def test_front_csv_roundtrip(self, tmp_path):
        f = exact_front_oracle(MultiZenoConfig().with_alpha(Fraction(11, 10)))
        write_front_csv(f, tmp_path / "f.csv")
        assert (tmp_path / "f.csv").read_text().splitlines()[0] == "makespan,secondary"
        assert read_front_csv(tmp_path / "f.csv") == list(f)


def test_bits():
    assert bits(0b10110) == [1, 2, 4]
