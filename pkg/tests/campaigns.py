"""Campaign definitions shared by the acceptance tests.

Run ``python3 tests/campaigns.py [name ...]`` to precompute them; the tests
then load finished runs from ``results/`` instead of recomputing (outputs are
a pure function of configuration and seed under an evaluation bound).
"""

from __future__ import annotations

import logging
import os
import sys
import time
from pathlib import Path

from mozeno.core import MultiZenoConfig
from mozeno.harness import ExperimentConfig, moea_params_for, parse_strategy_weights, run_experiment

RESULTS = Path(os.environ.get("MOZENO_RESULTS", Path(__file__).resolve().parent.parent / "results"))

K2 = MultiZenoConfig(k=2)


def _cfg(instance, scheme, runs, evals, weights="1,1"):
    return ExperimentConfig(instance=instance, moea=moea_params_for(scheme),
                            strategy=parse_strategy_weights(weights), runs=runs, max_evals=evals)


CAMPAIGNS = {
    # small instance, optimal-plan reachability
    "k1-ibea-hyp": _cfg(MultiZenoConfig(k=1), "ibea-hyp", 10, 20_000),
    # scheme comparison on the 6-passenger instance
    "k2-ibea-hyp": _cfg(K2, "ibea-hyp", 30, 50_000),
    "k2-nsga2": _cfg(K2, "nsga2", 30, 50_000),
    "k2-ibea-eps": _cfg(K2, "ibea-eps", 30, 50_000),
    "k2-spea2": _cfg(K2, "spea2", 30, 50_000),
    # strategy ablation: planner always minimizes makespan
    "k2-ibea-hyp-makespan": _cfg(K2, "ibea-hyp", 30, 50_000, "1,0"),
}

TABLE_SCHEMES = ["k2-nsga2", "k2-spea2", "k2-ibea-eps", "k2-ibea-hyp"]


def campaign(name: str):
    return run_experiment(CAMPAIGNS[name], RESULTS / name, resume=True)


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    for name in sys.argv[1:] or list(CAMPAIGNS):
        t = time.time()
        runs = campaign(name)
        print(f"{name}: {len(runs)} runs in {time.time() - t:.0f}s", flush=True)
