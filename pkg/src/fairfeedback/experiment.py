"""
Simulation grid: for every (attribute, N, M) cell, repeatedly sample M tuples
and a population of N simulated participants, run the learner, and average the
regret traces across iterations.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import DataTuple, write_trace
from .errors import DomainError, FairFeedbackError
from .fairness import ATTRIBUTES, GroupSpec, fairness_scores, is_scoreable
from .feedback import generate_population, normalize_scores, parse_scenario, scores_from_phibar
from .saff import LearnerConfig, RegretTrace, saff_learn_phibar

log = logging.getLogger(__name__)

DEFAULT_POOL_SIZE = 624
SUMMARY_HEADER = (
    "attribute", "N", "M", "iterations", "initial_regret", "final_regret",
    "beta_independence", "beta_separation", "beta_sufficiency",
)


@dataclass(frozen=True)
class ExperimentGrid:
    participant_counts: tuple = (25, 50, 75, 100)
    tuple_counts: tuple = (5, 10, 15)
    iterations: int = 100
    attributes: tuple = ATTRIBUTES
    scenario: str = "uniform_random"
    seed: int = 0

    def __post_init__(self):
        if not self.participant_counts or min(self.participant_counts) < 1:
            raise DomainError("participant counts must be >= 1")
        if not self.tuple_counts or min(self.tuple_counts) < 1:
            raise DomainError("tuple counts must be >= 1")
        if self.iterations < 1:
            raise DomainError("iterations must be >= 1")
        for a in self.attributes:
            if a not in ATTRIBUTES:
                raise DomainError(f"unknown attribute {a!r}")
        parse_scenario(self.scenario)


def trace_filename(attribute: str, N: int, M: int) -> str:
    return f"trace_{attribute}_N{N}_M{M}.csv"


def pool_phibar(pool: Sequence[DataTuple], attribute: str) -> np.ndarray:
    """Normalised scores of every tuple that can be scored for ``attribute``."""
    spec = GroupSpec.for_attribute(attribute)
    rows = []
    for i, t in enumerate(pool):
        if not is_scoreable(t, spec):
            continue
        try:
            rows.append(fairness_scores(t, spec).as_array())
        except (FairFeedbackError, ArithmeticError) as e:
            log.warning("%s: dropping tuple %d from the pool: %s", attribute, i, e)
    if not rows:
        raise DomainError(f"no tuple in the pool can be scored for {attribute!r}")
    return normalize_scores(np.array(rows))


def iteration_seeds(seed: int, attr_index: int, N: int, M: int, iteration: int) -> np.ndarray:
    """Three independent integer seeds (sampling, population, learner) for one run."""
    return np.random.SeedSequence([seed, attr_index, N, M, iteration]).generate_state(3)


def run_iteration(phibar_pool: np.ndarray, N: int, M: int, scenario: str,
                  config: LearnerConfig, seeds) -> RegretTrace:
    s_sample, s_pop, s_learn = (int(s) for s in seeds)
    rng = np.random.default_rng(s_sample)
    # within one draw tuples are distinct; across draws the pool is reused
    replace = len(phibar_pool) < M
    idx = rng.choice(len(phibar_pool), size=M, replace=replace)
    phibar = phibar_pool[idx]
    population = generate_population(N, scenario, seed=s_pop)
    scores = scores_from_phibar(population, phibar, config.feedback, seed=s_pop)
    learner = LearnerConfig(config.learning_rate, config.epochs, config.feedback, seed=s_learn)
    _, trace = saff_learn_phibar(scores, phibar, learner)
    return trace


def _run_packed(args):
    return run_iteration(*args)


def average_traces(traces: Sequence[RegretTrace]) -> RegretTrace:
    hard = np.mean([t.hard_regret for t in traces], axis=0)
    soft = np.mean([t.soft_regret for t in traces], axis=0)
    betas = np.mean([np.array(t.betas) for t in traces], axis=0)
    return RegretTrace(list(hard), list(soft), list(betas))


def run_cell(phibar_pool, attr_index: int, N: int, M: int, grid: ExperimentGrid,
             config: LearnerConfig, executor=None) -> RegretTrace:
    jobs = [
        (phibar_pool, N, M, grid.scenario, config, iteration_seeds(grid.seed, attr_index, N, M, it))
        for it in range(grid.iterations)
    ]
    if executor is None:
        traces = [_run_packed(j) for j in jobs]
    else:
        traces = list(executor.map(_run_packed, jobs))   # map keeps submission order
    return average_traces(traces)


def _summary_row(attribute, N, M, iterations, avg: RegretTrace) -> list:
    beta = avg.betas[-1]
    return [attribute, N, M, iterations,
            repr(float(avg.hard_regret[0])), repr(float(avg.hard_regret[-1]))] + \
        [repr(float(x)) for x in beta]


def run_experiment(pool: Sequence[DataTuple], grid: ExperimentGrid, config: LearnerConfig,
                   out_dir, jobs: int = 1) -> Path:
    """Run every cell, writing one averaged trace per cell and ``summary.csv``.

    Summary rows are flushed as each cell finishes. Results do not depend on
    ``jobs``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_path = out_dir / "summary.csv"
    executor = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        with summary_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SUMMARY_HEADER)
            fh.flush()
            for attribute in grid.attributes:
                a_idx = ATTRIBUTES.index(attribute)
                phibar_pool = pool_phibar(pool, attribute)
                log.info("%s: %d scoreable tuples in the pool", attribute, len(phibar_pool))
                for N in grid.participant_counts:
                    for M in grid.tuple_counts:
                        avg = run_cell(phibar_pool, a_idx, N, M, grid, config, executor)
                        write_trace(avg, out_dir / trace_filename(attribute, N, M))
                        w.writerow(_summary_row(attribute, N, M, grid.iterations, avg))
                        fh.flush()
                        log.info("%s N=%d M=%d: regret %.4f -> %.4f", attribute, N, M,
                                 avg.hard_regret[0], avg.hard_regret[-1])
    finally:
        if executor is not None:
            executor.shutdown()
    return summary_path
