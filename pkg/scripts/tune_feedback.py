"""Grid search over the feedback precision c and temperature lambda.

For each pair, reports how many of 20 atomic-population runs put >= 0.85 on
the atomic notion, how many distinct argmaxes the 33/33/34 split produces,
and on how many of 100 uniform-random runs the final hard regret is no worse
than the initial one.

    python scripts/tune_feedback.py --pool-seed 3 --pool-size 300
"""

import argparse
import itertools

import numpy as np

from fairfeedback.data import SynthSpec, synthesize_dataset
from fairfeedback.experiment import pool_phibar
from fairfeedback.feedback import FeedbackParams, generate_population, scores_from_phibar
from fairfeedback.saff import LearnerConfig, saff_learn_phibar

GRID_NM = [(N, M) for N in (25, 50, 75, 100) for M in (5, 10, 15)]


def learn(pool, params, scenario, seed, N, M):
    idx = np.random.default_rng([seed, 0]).choice(len(pool), M, replace=False)
    cfg = LearnerConfig(feedback=params, seed=seed)
    scores = scores_from_phibar(generate_population(N, scenario, seed=[seed, 2]), pool[idx], params)
    return saff_learn_phibar(scores, pool[idx], cfg)


def evaluate(pool, params, runs):
    recovered = sum(learn(pool, params, "fixed_atomic:independence", s, 75, 10)[0][0] >= 0.85
                    for s in range(20))
    winners = {int(np.argmax(learn(pool, params, "identical_split", s, 75, 10)[0])) for s in range(20)}
    improved = 0
    for run in range(runs):
        N, M = GRID_NM[run % len(GRID_NM)]
        _, trace = learn(pool, params, "uniform_random", run, N, M)
        improved += trace.hard_regret[-1] <= trace.hard_regret[0]
    return recovered, len(winners), improved


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--pool-seed", type=int, default=3)
    ap.add_argument("--pool-size", type=int, default=300)
    ap.add_argument("--attribute", default="age")
    ap.add_argument("--precision", type=float, nargs="+", default=[1, 2, 3, 5, 10])
    ap.add_argument("--temperature", type=float, nargs="+", default=[1, 3, 10])
    ap.add_argument("--runs", type=int, default=100, help="uniform-random runs per pair")
    args = ap.parse_args()

    pool = pool_phibar(synthesize_dataset(SynthSpec(num_tuples=args.pool_size, seed=args.pool_seed)),
                       args.attribute)
    print(f"{'c':>6} {'lambda':>6}  init2(>=.85)  init3(argmaxes)  init1(no worse)")
    for c, lam in itertools.product(args.precision, args.temperature):
        rec, win, imp = evaluate(pool, FeedbackParams(precision=c, temperature=lam), args.runs)
        print(f"{c:6g} {lam:6g}  {rec:>8d}/20  {win:>12d}  {imp:>10d}/{args.runs}")


if __name__ == "__main__":
    main()
