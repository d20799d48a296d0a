"""Everyone holds the same atomic notion: how often does the learner recover it?

    python scripts/init2_recovery.py --notion separation --seeds 20
"""

import argparse

import numpy as np

from fairfeedback.data import SynthSpec, synthesize_dataset
from fairfeedback.experiment import DEFAULT_POOL_SIZE, pool_phibar
from fairfeedback.fairness import NOTIONS
from fairfeedback.feedback import generate_population, scores_from_phibar
from fairfeedback.saff import LearnerConfig, saff_learn_phibar


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--notion", choices=NOTIONS, default="independence")
    ap.add_argument("--attribute", default="age")
    ap.add_argument("--participants", type=int, default=75)
    ap.add_argument("--tuples", type=int, default=10)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--threshold", type=float, default=0.85)
    args = ap.parse_args()

    pool = pool_phibar(synthesize_dataset(SynthSpec(num_tuples=DEFAULT_POOL_SIZE)), args.attribute)
    target = NOTIONS.index(args.notion)
    pop = generate_population(args.participants, f"fixed_atomic:{args.notion}")
    hits = 0
    for seed in range(args.seeds):
        idx = np.random.default_rng([seed, 0]).choice(len(pool), args.tuples, replace=False)
        cfg = LearnerConfig(seed=seed)
        scores = scores_from_phibar(pop, pool[idx], cfg.feedback)
        beta, trace = saff_learn_phibar(scores, pool[idx], cfg)
        hits += beta[target] >= args.threshold
        print(f"seed {seed:3d}  beta* = {np.round(beta, 3)}  regret {trace.hard_regret[0]:.3f} -> "
              f"{trace.hard_regret[-1]:.3f}")
    print(f"{hits}/{args.seeds} runs put >= {args.threshold} on {args.notion}")


if __name__ == "__main__":
    main()
