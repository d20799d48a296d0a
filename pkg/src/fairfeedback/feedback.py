"""
Participant feedback model.

A participant min-max normalises the three fairness scores of a tuple, takes a
preference-weighted average psi in [0, 1], perceives it through a Beta
distribution with mean psi and precision c, and picks a 7-point Likert score
through a logit over the Beta mass in each of seven equal regions.  Score 7
(completely fair) owns the region nearest psi = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .errors import DomainError
from .fairness import NOTIONS, FairnessScores, GroupSpec, fairness_scores

NUM_SCORES = 7
SCENARIOS = ("uniform_random", "fixed_atomic", "identical_split")


@dataclass(frozen=True)
class FeedbackParams:
    # c=3, lambda=1 rather than 10/10: at the fixed step 0.5 the sharper
    # surrogate overshoots and stalls on plateaus (see scripts/tune_feedback.py)
    precision: float = 3.0       # c
    temperature: float = 1.0     # lambda
    psi_clamp: float = 1e-6      # epsilon
    score_mode: str = "argmax"   # or "sampled"

    def __post_init__(self):
        if not self.precision > 0:
            raise DomainError("precision must be > 0")
        if not self.temperature > 0:
            raise DomainError("temperature must be > 0")
        if not (0.0 < self.psi_clamp < 0.5):
            raise DomainError("psi_clamp must lie in (0, 0.5)")
        if self.score_mode not in ("argmax", "sampled"):
            raise DomainError(f"unknown score_mode {self.score_mode!r}")


def check_preference(beta, tol: float = 1e-9) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 1 or np.any(beta < -tol) or abs(beta.sum() - 1.0) > tol:
        raise DomainError(f"not a preference vector: {beta}")
    return beta


def normalize_scores(phi) -> np.ndarray:
    """Min-max scale across notions: least divergent notion -> 0, most -> 1.

    Accepts a FairnessScores or an array whose last axis holds the notions.
    Rows with no spread map to all zeros.
    """
    if isinstance(phi, FairnessScores):
        phi = phi.as_array()
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise DomainError("fairness scores must be finite")
    lo = phi.min(axis=-1, keepdims=True)
    span = phi.max(axis=-1, keepdims=True) - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (phi - lo) / safe, 0.0)


def aggregate(beta, phibar) -> float:
    return float(np.dot(np.asarray(beta, dtype=float), np.asarray(phibar, dtype=float)))


def likert_regions() -> np.ndarray:
    """Boundaries r_0..r_7 with r_i = i/7."""
    return np.arange(NUM_SCORES + 1) / NUM_SCORES


def region(score: int) -> tuple[float, float]:
    """Interval of psi mapped to Likert ``score`` (7 = fair end near 0)."""
    if not 1 <= score <= NUM_SCORES:
        raise DomainError(f"Likert score must lie in 1..7, got {score}")
    r = likert_regions()
    return float(r[NUM_SCORES - score]), float(r[NUM_SCORES - score + 1])


def beta_shapes(psi, params: FeedbackParams) -> tuple[np.ndarray, np.ndarray]:
    eps = params.psi_clamp
    psi = np.clip(np.asarray(psi, dtype=float), eps, 1.0 - eps)
    return psi * params.precision, (1.0 - psi) * params.precision


def utilities(psi, params: FeedbackParams) -> np.ndarray:
    """Beta mass of each Likert region; last axis is scores 1..7.

    u_i = F(r_{8-i}) - F(r_{7-i}) for Beta(psi*c, (1-psi)*c), psi clamped to
    [eps, 1-eps].  Vectorised over ``psi``.
    """
    a, b = beta_shapes(psi, params)
    r = likert_regions()
    cdf = special.betainc(a[..., None], b[..., None], r)
    # cdf[..., j] = F(r_j); score i covers [r_{7-i}, r_{8-i}], so reverse the region masses
    return np.diff(cdf, axis=-1)[..., ::-1]


def choice_probabilities(u, temperature: float) -> np.ndarray:
    """Logit choice over the seven scores, stabilised by max subtraction."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DomainError("utilities must be finite")
    return special.softmax(temperature * u, axis=-1)


def feedback_score(P, mode: str = "argmax", rng: np.random.Generator | None = None) -> int:
    """Likert score from choice probabilities; argmax ties go to the smaller score."""
    P = np.asarray(P, dtype=float)
    if mode == "argmax":
        return int(np.argmax(P)) + 1
    if mode == "sampled":
        if rng is None:
            raise DomainError("sampled mode needs a random stream")
        return int(rng.choice(NUM_SCORES, p=P / P.sum())) + 1
    raise DomainError(f"unknown score mode {mode!r}")


def parse_scenario(scenario: str) -> tuple[str, str | None]:
    """'fixed_atomic:separation' -> ('fixed_atomic', 'separation')."""
    name, _, notion = scenario.partition(":")
    if name not in SCENARIOS:
        raise DomainError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    if name == "fixed_atomic":
        notion = notion or "independence"
        if notion not in NOTIONS:
            raise DomainError(f"unknown notion {notion!r}")
        return name, notion
    if notion:
        raise DomainError(f"scenario {name!r} takes no notion")
    return name, None


def generate_population(N: int, scenario: str = "uniform_random", seed=0) -> np.ndarray:
    """True preference vectors of N simulated participants, shape (N, 3).

    Scenarios mirror the three experimental initialisations: flat-Dirichlet
    draws, everyone on one notion (``fixed_atomic:<notion>``), and a
    33/33/34 split over the three atomic notions.
    """
    if N < 1:
        raise DomainError("need at least one participant")
    name, notion = parse_scenario(scenario)
    L = len(NOTIONS)
    if name == "uniform_random":
        rng = np.random.default_rng(seed)
        return rng.dirichlet(np.ones(L), size=N)
    if name == "fixed_atomic":
        pop = np.zeros((N, L))
        pop[:, NOTIONS.index(notion)] = 1.0
        return pop
    n_ind = (33 * N) // 100
    n_sep = (33 * N) // 100
    counts = [n_ind, n_sep, N - n_ind - n_sep]
    return np.repeat(np.eye(L), counts, axis=0)


def scores_from_phibar(population, phibar, params: FeedbackParams, seed=0) -> np.ndarray:
    """N x M Likert matrix from preferences (N, L) and normalised scores (M, L)."""
    population = np.asarray(population, dtype=float)
    phibar = np.asarray(phibar, dtype=float)
    psi = population @ phibar.T
    P = choice_probabilities(utilities(psi, params), params.temperature)
    if params.score_mode == "argmax":
        return np.argmax(P, axis=-1).astype(int) + 1
    out = np.empty(psi.shape, dtype=int)
    for n in range(psi.shape[0]):
        rng = np.random.default_rng([int(seed), n])
        for m in range(psi.shape[1]):
            out[n, m] = feedback_score(P[n, m], "sampled", rng)
    return out


def tuple_phibar(tuples: Sequence, spec: GroupSpec) -> np.ndarray:
    return normalize_scores(np.array([fairness_scores(t, spec).as_array() for t in tuples]))


def simulate_feedback(population, tuples, spec: GroupSpec, params: FeedbackParams, seed=0) -> np.ndarray:
    """Score every tuple with every simulated participant (N x M matrix)."""
    return scores_from_phibar(population, tuple_phibar(tuples, spec), params, seed)
