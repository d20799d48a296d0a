"""33/33/34 split over the atomic notions: which notion wins, run by run?

    python scripts/init3_instability.py --seeds 20
"""

import argparse
from collections import Counter

import numpy as np

from fairfeedback.data import SynthSpec, synthesize_dataset
from fairfeedback.experiment import DEFAULT_POOL_SIZE, pool_phibar
from fairfeedback.fairness import NOTIONS
from fairfeedback.feedback import generate_population, scores_from_phibar
from fairfeedback.saff import LearnerConfig, saff_learn_phibar


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--attribute", default="age")
    ap.add_argument("--participants", type=int, default=75)
    ap.add_argument("--tuples", type=int, default=10)
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()

    pool = pool_phibar(synthesize_dataset(SynthSpec(num_tuples=DEFAULT_POOL_SIZE)), args.attribute)
    pop = generate_population(args.participants, "identical_split")
    wins = Counter()
    for seed in range(args.seeds):
        idx = np.random.default_rng([seed, 0]).choice(len(pool), args.tuples, replace=False)
        cfg = LearnerConfig(seed=seed)
        beta, _ = saff_learn_phibar(scores_from_phibar(pop, pool[idx], cfg.feedback), pool[idx], cfg)
        wins[NOTIONS[int(np.argmax(beta))]] += 1
        print(f"seed {seed:3d}  beta* = {np.round(beta, 3)}")
    print("argmax counts:", dict(wins))


if __name__ == "__main__":
    main()
