"""Experiment orchestration: configs, the generational loop, campaigns and summaries."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import random
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Sequence

from .core import (
    MozenoError,
    MultiZenoConfig,
    ObjectivePoint,
    ParetoFront,
    ScheduledPlan,
    UnsupportedConfigError,
    exact_front_analytic,
    fmt_rational,
    ground_multizeno,
    load_instance,
    pareto_filter,
    read_front_csv,
    write_front_csv,
)
from .dae import (
    AtomPool,
    DaeParams,
    Individual,
    StrategyWeights,
    crossover,
    evaluate,
    init_individual,
    mutate,
)
from .moea import (
    SCHEME_NAMES,
    AttainmentTracker,
    MoeaParams,
    Scheme,
    binary_tournament,
    crowded_fitness,
    ibea_survivors,
    nsga2_survivors,
    scheme_label,
    spea2_fitness,
    spea2_truncate,
    unary_hypervolume,
)
from .oracle import exact_front_oracle
from .planner import Planner
from .stats import comparison_table, format_table

log = logging.getLogger(__name__)

DEFAULT_MAX_EVALS = 20_000
WORKERS_ENV = "MOZENO_WORKERS"


class ConfigError(MozenoError, ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    instance: MultiZenoConfig = field(default_factory=MultiZenoConfig)
    moea: MoeaParams = field(default_factory=MoeaParams)
    dae: DaeParams = field(default_factory=DaeParams)
    strategy: StrategyWeights = field(default_factory=StrategyWeights)
    runs: int = 30
    max_evals: int | None = DEFAULT_MAX_EVALS
    max_seconds: float | None = None
    base_seed: int = 0
    output: Path | None = None

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.max_evals is None and self.max_seconds is None:
            raise ConfigError("set at least one of max_evals / max_seconds")
        if self.max_evals is not None and self.max_evals < 1:
            raise ConfigError("max_evals must be >= 1")
        if self.max_seconds is not None and not self.max_seconds > 0:
            raise ConfigError("max_seconds must be positive")

    @property
    def timed(self) -> bool:
        """Wall-clock columns are only meaningful (and only written) under a time bound."""
        return self.max_seconds is not None

    def to_json(self) -> dict:
        return {
            "instance": self.instance.to_json(),
            "scheme": scheme_label(self.moea),
            "population_size": self.moea.population_size,
            "archive_size": self.moea.archive_size,
            "kappa": self.moea.kappa,
            "reference_point": list(self.moea.reference_point),
            "crossover_probability": self.dae.crossover_probability,
            "mutation_probability": self.dae.mutation_probability,
            "mutation_weights": list(self.dae.mutation_weights),
            "budget": self.dae.budget,
            "penalty_base": None if self.dae.penalty_base is None else fmt_rational(self.dae.penalty_base),
            "strategy_weights": [fmt_rational(self.strategy.makespan), fmt_rational(self.strategy.secondary)],
            "runs": self.runs,
            "max_evals": self.max_evals,
            "max_seconds": self.max_seconds,
            "base_seed": self.base_seed,
        }

    def fingerprint(self) -> str:
        """Hash of everything that determines a run, except runs/base seed/output."""
        data = self.to_json()
        for key in ("runs", "base_seed"):
            data.pop(key)
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()[:16]


_CONFIG_KEYS = {
    "instance", "scheme", "population_size", "archive_size", "kappa", "reference_point",
    "crossover_probability", "mutation_probability", "mutation_weights", "budget",
    "penalty_base", "strategy_weights", "runs", "max_evals", "max_seconds", "base_seed", "output",
}


def parse_strategy_weights(value) -> StrategyWeights:
    if isinstance(value, str):
        value = value.split(",")
    if len(value) != 2:
        raise ConfigError("strategy weights need two values wM,wS")
    try:
        return StrategyWeights(Fraction(str(value[0]).strip()), Fraction(str(value[1]).strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"strategy_weights: {exc}") from None


def moea_params_for(name: str, **kw) -> MoeaParams:
    if name not in SCHEME_NAMES:
        raise ConfigError(f"unknown scheme {name!r}; choose from {sorted(SCHEME_NAMES)}")
    scheme, indicator = SCHEME_NAMES[name]
    return MoeaParams(scheme=scheme, indicator=indicator, **kw)


def config_from_dict(data: dict, base_dir: Path | None = None) -> ExperimentConfig:
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        inst = data.get("instance", {"k": 1})
        if isinstance(inst, str):
            path = Path(inst)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            instance = load_instance(path)
        else:
            instance = MultiZenoConfig.from_json(inst)
        moea_kw = {}
        for key in ("population_size", "archive_size", "kappa"):
            if data.get(key) is not None:
                moea_kw[key] = data[key]
        if "reference_point" in data:
            moea_kw["reference_point"] = tuple(float(x) for x in data["reference_point"])
        moea = moea_params_for(data.get("scheme", "ibea-hyp"), **moea_kw)
        dae_kw = {}
        for key in ("crossover_probability", "mutation_probability", "budget"):
            if key in data:
                dae_kw[key] = data[key]
        if "mutation_weights" in data:
            dae_kw["mutation_weights"] = tuple(data["mutation_weights"])
        if data.get("penalty_base") is not None:
            dae_kw["penalty_base"] = Fraction(str(data["penalty_base"]))
        dae = DaeParams(**dae_kw)
        strategy = parse_strategy_weights(data.get("strategy_weights", [1, 1]))
        max_evals = data.get("max_evals", DEFAULT_MAX_EVALS if "max_seconds" not in data else None)
        output = data.get("output")
        return ExperimentConfig(
            instance=instance, moea=moea, dae=dae, strategy=strategy,
            runs=data.get("runs", 30), max_evals=max_evals,
            max_seconds=data.get("max_seconds"), base_seed=data.get("base_seed", 0),
            output=None if output is None else Path(output),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError, OSError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError(str(exc)) from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return config_from_dict(data, path.parent)


@lru_cache(maxsize=None)
def exact_front(cfg: MultiZenoConfig) -> ParetoFront:
    """Closed form where it exists, exhaustive search otherwise."""
    try:
        return exact_front_analytic(cfg)
    except UnsupportedConfigError:
        return exact_front_oracle(cfg)


# -- single run -------------------------------------------------------------------

@dataclass
class RunResult:
    seed: int
    evaluations: int
    front: list[ObjectivePoint]
    population: list[tuple[ObjectivePoint, bool]]
    trace: list[tuple[int, float, Fraction]]
    attainment: list[tuple]
    best_plan: ScheduledPlan | None = None
    best_individual: Individual | None = None
    cpu_seconds: float = math.nan
    wall_seconds: float = math.nan
    error: str | None = None

    @property
    def final_hypervolume(self) -> Fraction | None:
        return self.trace[-1][2] if self.trace else None


class _Archive:
    """Non-dominated feasible points seen so far, each with the first individual reaching it."""

    def __init__(self):
        self.entries: dict[ObjectivePoint, Individual] = {}

    def add(self, point: ObjectivePoint, ind: Individual) -> bool:
        for p in self.entries:
            if p[0] <= point[0] and p[1] <= point[1]:
                return False
        for p in [p for p in self.entries if point[0] <= p[0] and point[1] <= p[1]]:
            del self.entries[p]
        self.entries[point] = ind
        return True

    def front(self) -> list[ObjectivePoint]:
        return sorted(self.entries)


class _Run:
    def __init__(self, cfg: ExperimentConfig, seed: int, exact: Sequence):
        self.cfg = cfg
        self.task = ground_multizeno(cfg.instance)
        self.pool = AtomPool(self.task)
        self.planner = Planner(self.task, cfg.dae.budget)
        self.rng = random.Random(seed)
        self.seed = seed
        self.exact = list(exact)
        self.archive = _Archive()
        self.tracker = AttainmentTracker(self.exact)
        self.trace: list[tuple[int, float, Fraction]] = []
        self.evals = 0
        self.cpu0 = time.process_time()
        self.wall0 = time.perf_counter()
        self.mu = cfg.moea.population_size

    def seconds(self) -> float:
        return time.process_time() - self.cpu0

    def stopped(self) -> bool:
        if self.cfg.max_evals is not None and self.evals >= self.cfg.max_evals:
            return True
        return self.cfg.max_seconds is not None and self.seconds() >= self.cfg.max_seconds

    def _clock(self) -> float:
        return round(self.seconds(), 3) if self.cfg.timed else math.nan

    def snapshot(self) -> None:
        hv = unary_hypervolume(self.archive.front(), self.exact)
        if self.trace and self.trace[-1][0] == self.evals:
            return
        self.trace.append((self.evals, self._clock(), hv))

    def evaluate(self, ind: Individual) -> Individual:
        # each evaluation gets its own generator split off the run's stream
        sub = random.Random(self.rng.getrandbits(64))
        res = evaluate(ind, self.task, self.cfg.strategy, self.cfg.dae, sub, self.planner)
        ind = Individual(ind.states, res)
        self.evals += 1
        if res.feasible:
            p = res.objectives
            self.archive.add(p, ind)
            self.tracker.update((p.makespan, p.secondary), self.evals, self._clock())
        if self.evals % self.mu == 0:
            self.snapshot()
        return ind

    def evaluate_all(self, inds: list[Individual], force: bool = False) -> list[Individual]:
        out = []
        for ind in inds:
            if ind.evaluation is not None:
                out.append(ind)
                continue
            if not force and self.stopped():
                break
            out.append(self.evaluate(ind))
        return out

    def vary(self, mating: list[Individual]) -> list[Individual]:
        p = self.cfg.dae
        out = []
        n = len(mating)
        for i in range(n):
            child = mating[i]
            changed = False
            if self.rng.random() < p.crossover_probability:
                child = crossover(child, mating[(i + 1) % n], self.rng)
                changed = True
            if self.rng.random() < p.mutation_probability:
                child = mutate(child, self.pool, p, self.rng)
                changed = True
            if changed and (child.key != mating[i].key or mating[i].evaluation is None):
                child = Individual(child.states)
            else:
                child = mating[i]
            out.append(child)
        return out

    def run(self) -> RunResult:
        mu = self.mu
        pop = self.evaluate_all([init_individual(self.pool, self.rng) for _ in range(mu)], force=True)
        scheme = self.cfg.moea.scheme
        archive: list[Individual] = []
        fitness: list = []
        if scheme is Scheme.IBEA:
            _, fitness = ibea_survivors(_points(pop), self.cfg.moea, mu)
        while not self.stopped():
            if scheme is Scheme.NSGA2:
                fit = crowded_fitness(_points(pop))
                mating = [pop[binary_tournament(fit, self.rng)] for _ in range(mu)]
            elif scheme is Scheme.SPEA2:
                union = pop + archive
                F = spea2_fitness(_points(union))
                keep = spea2_truncate(_points(union), F, min(self.cfg.moea.archive, len(union)))
                archive = [union[i] for i in keep]
                fit = [F[i] for i in keep]
                mating = [archive[binary_tournament(fit, self.rng)] for _ in range(mu)]
            else:
                neg = [-f for f in fitness]
                mating = [pop[binary_tournament(neg, self.rng)] for _ in range(mu)]
            offspring = self.evaluate_all(self.vary(mating))
            if scheme is Scheme.NSGA2:
                union = pop + offspring
                pop = [union[i] for i in nsga2_survivors(_points(union), mu)]
            elif scheme is Scheme.SPEA2:
                pop = offspring if len(offspring) == mu else offspring + pop[len(offspring):]
            else:
                union = pop + offspring
                keep, fitness = ibea_survivors(_points(union), self.cfg.moea, mu)
                pop = [union[i] for i in keep]
        self.snapshot()
        if scheme is Scheme.SPEA2 and archive:
            pop = archive
        return self.result(pop)

    def result(self, pop: list[Individual]) -> RunResult:
        front = self.archive.front()
        best = self.archive.entries[front[0]] if front else None
        return RunResult(
            seed=self.seed,
            evaluations=self.evals,
            front=front,
            population=[(i.evaluation.objectives, i.evaluation.feasible) for i in pop],
            trace=self.trace,
            attainment=self.tracker.rows(),
            best_plan=best.evaluation.plan if best else None,
            best_individual=best,
            cpu_seconds=self.seconds(),
            wall_seconds=time.perf_counter() - self.wall0,
        )


def _points(pop: Sequence[Individual]) -> list[tuple[int, int]]:
    # objectives are multiples of 1/10, so scaling to integers keeps comparisons exact
    return [(int(i.evaluation.objectives[0] * 10), int(i.evaluation.objectives[1] * 10)) for i in pop]


def run_single(cfg: ExperimentConfig, seed: int, exact: Sequence | None = None) -> RunResult:
    exact = exact_front(cfg.instance) if exact is None else exact
    return _Run(cfg, seed, exact).run()


# -- output files -------------------------------------------------------------------

def _num(v) -> str:
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    if isinstance(v, Fraction):
        return fmt_rational(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) for v in row])


def write_run(result: RunResult, directory, cfg: ExperimentConfig) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    task = ground_multizeno(cfg.instance)
    write_front_csv(result.front, d / "front.csv")
    _write_rows(d / "trace.csv", ["clock_evals", "clock_seconds", "hypervolume"],
                ((e, s, float(h)) for e, s, h in result.trace))
    _write_rows(d / "attainment.csv",
                ["point_makespan", "point_secondary", "attained_evals", "attained_seconds"],
                result.attainment)
    _write_rows(d / "population.csv", ["makespan", "secondary", "feasible"],
                ((p.makespan, p.secondary, int(f)) for p, f in result.population))
    if result.best_plan is not None:
        result.best_plan.write_csv(d / "best_plan.csv")
    if result.best_individual is not None:
        (d / "best_individual.json").write_text(result.best_individual.dumps(task) + "\n")
    meta = {
        "seed": result.seed,
        "evaluations": result.evaluations,
        "final_hypervolume": None if result.final_hypervolume is None else float(result.final_hypervolume),
        "config": cfg.to_json(),
        "fingerprint": cfg.fingerprint(),
        "hypervolume_reference": list(cfg.moea.reference_point),
    }
    if cfg.timed:
        meta["cpu_seconds"] = result.cpu_seconds
    (d / "result.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _read_rows(path: Path) -> list[list[str]]:
    with open(path, newline="") as fh:
        return list(csv.reader(fh))[1:]


def load_run(directory) -> RunResult:
    d = Path(directory)
    meta = json.loads((d / "result.json").read_text())
    trace = [(int(e), float(s), Fraction(h)) for e, s, h in _read_rows(d / "trace.csv")]
    att = [(Fraction(m), Fraction(s), int(e), float(t)) for m, s, e, t in _read_rows(d / "attainment.csv")]
    pop = [(ObjectivePoint(Fraction(m), Fraction(s)), f == "1")
           for m, s, f in _read_rows(d / "population.csv")]
    return RunResult(seed=meta["seed"], evaluations=meta["evaluations"],
                     front=read_front_csv(d / "front.csv"), population=pop,
                     trace=trace, attainment=att, cpu_seconds=meta.get("cpu_seconds", math.nan))


# -- campaigns --------------------------------------------------------------------

def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer") from None
    return os.cpu_count() or 1


def _run_dir(out: Path, seed: int) -> Path:
    return out / f"run_{seed:04d}"


def _complete(directory: Path, cfg: ExperimentConfig) -> bool:
    meta = directory / "result.json"
    if not meta.exists():
        return False
    try:
        return json.loads(meta.read_text()).get("fingerprint") == cfg.fingerprint()
    except json.JSONDecodeError:
        return False


def _campaign_job(args) -> tuple[int, str | None]:
    cfg, seed, exact, out = args
    try:
        result = run_single(cfg, seed, exact)
        write_run(result, _run_dir(out, seed), cfg)
        return seed, None
    except Exception as exc:  # recorded per run, the campaign continues
        log.exception("run %d failed", seed)
        return seed, f"{type(exc).__name__}: {exc}"


def run_experiment(cfg: ExperimentConfig, out=None, resume: bool = True,
                   workers: int | None = None) -> list[RunResult]:
    """Run seeds base_seed..base_seed+runs-1, writing one directory per run.

    With ``resume``, runs whose directory already holds a result for the same
    configuration are loaded instead of recomputed (the outputs are a pure
    function of configuration and seed under an evaluation bound).
    """
    out = Path(out if out is not None else cfg.output or "results")
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_json(), indent=2, sort_keys=True) + "\n")
    exact = tuple(exact_front(cfg.instance))
    seeds = list(range(cfg.base_seed, cfg.base_seed + cfg.runs))
    todo = [s for s in seeds if not (resume and not cfg.timed and _complete(_run_dir(out, s), cfg))]
    errors: dict[int, str] = {}
    workers = min(workers or _worker_count(), max(len(todo), 1))
    jobs = [(cfg, s, exact, out) for s in todo]
    if workers == 1:
        outcomes = map(_campaign_job, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        outcomes = pool.map(_campaign_job, jobs)
    for seed, err in outcomes:
        if err is not None:
            errors[seed] = err
        else:
            log.info("run %d done", seed)
    if workers != 1:
        pool.shutdown()
    results = []
    for s in seeds:
        if s in errors:
            results.append(RunResult(s, 0, [], [], [], [], error=errors[s]))
        else:
            results.append(load_run(_run_dir(out, s)))
    write_summary(results, out, cfg)
    return results


def write_summary(results: Sequence[RunResult], out, cfg: ExperimentConfig | None = None) -> None:
    out = Path(out)
    rows = []
    for r in results:
        hv = r.final_hypervolume
        rows.append((r.seed, r.evaluations, math.nan if hv is None else float(hv),
                     sum(1 for a in r.attainment if a[2] != -1), r.error or "ok"))
    _write_rows(out / "summary.csv",
                ["seed", "evaluations", "final_hypervolume", "points_attained", "status"], rows)


def load_campaign(directory) -> list[RunResult]:
    d = Path(directory)
    return [load_run(p) for p in sorted(d.glob("run_*")) if (p / "result.json").exists()]


# -- aggregation ---------------------------------------------------------------------

@dataclass
class Aggregate:
    hypervolume: list[tuple[int, float, float, int]]  # evals, mean, median, runs
    attainment: list[tuple[Fraction, Fraction, int, float]]  # point, evals, percent of runs
    final: list[tuple[int, float]]


def aggregate(results: Sequence[RunResult], out=None) -> Aggregate:
    results = [r for r in results if r.error is None]
    if not results:
        raise ValueError("nothing to aggregate")
    by_clock: dict[int, list[float]] = {}
    for r in results:
        for e, _, hv in r.trace:
            by_clock.setdefault(e, []).append(float(hv))
    hv_rows = [(e, statistics.fmean(v), statistics.median(v), len(v)) for e, v in sorted(by_clock.items())]
    clocks = sorted(by_clock)
    att_rows = []
    points = [(a[0], a[1]) for a in results[0].attainment]
    for i, (m, s) in enumerate(points):
        times = [r.attainment[i][2] for r in results]
        for c in clocks:
            hit = sum(1 for t in times if t != -1 and t <= c)
            att_rows.append((m, s, c, 100.0 * hit / len(results)))
    final = [(r.seed, float(r.final_hypervolume)) for r in results]
    agg = Aggregate(hv_rows, att_rows, final)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        _write_rows(out / "hypervolume.csv", ["clock_evals", "mean_hypervolume", "median_hypervolume", "runs"], hv_rows)
        _write_rows(out / "attainment_summary.csv",
                    ["point_makespan", "point_secondary", "clock_evals", "attained_percent"], att_rows)
        _write_rows(out / "final_hypervolume.csv", ["seed", "final_hypervolume"], final)
    return agg


def attainment_fraction(results: Sequence[RunResult], predicate) -> float:
    """Share of runs that attained at least one exact-front point satisfying ``predicate``."""
    ok = [r for r in results if r.error is None]
    hits = sum(1 for r in ok if any(a[2] != -1 and predicate(a[0], a[1]) for a in r.attainment))
    return hits / len(ok) if ok else 0.0


def final_hypervolumes(results: Sequence[RunResult]) -> dict[int, Fraction]:
    return {r.seed: r.final_hypervolume for r in results if r.error is None}


def stats_table(campaigns: dict[str, Sequence[RunResult]]) -> list[list[str]]:
    """Pairwise Wilcoxon table over final hypervolume deficits, paired by seed."""
    per = {name: final_hypervolumes(rs) for name, rs in campaigns.items()}
    common = sorted(set.intersection(*(set(v) for v in per.values())))
    samples = {name: [v[s] for s in common] for name, v in per.items()}
    return comparison_table(samples)


def write_stats(campaigns: dict[str, Sequence[RunResult]], out) -> str:
    table = stats_table(campaigns)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(table)
    return format_table(table)


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
