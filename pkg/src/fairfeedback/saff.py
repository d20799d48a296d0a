"""
Social Aggregation of Fairness Feedback: projected gradient descent for the
social preference vector over the three fairness notions.

The reported regret uses the hard (argmax) social score.  The gradient is the
exact gradient of a soft surrogate in which the social score is the expected
Likert value under the logit choice probabilities; the argmax itself has zero
gradient almost everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NonFinite
from .feedback import (
    NUM_SCORES,
    FeedbackParams,
    choice_probabilities,
    tuple_phibar,
    utilities,
)
from .numkit import DEFAULT_QUADRATURE, QuadratureConfig, beta_cdf_grad_psi, project_to_simplex

LIKERT_VALUES = np.arange(1, NUM_SCORES + 1, dtype=float)


@dataclass(frozen=True)
class LearnerConfig:
    learning_rate: float = 0.5   # delta
    epochs: int = 100
    feedback: FeedbackParams = field(default_factory=FeedbackParams)
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise DomainError("learning_rate must be > 0")
        if self.epochs < 0:
            raise DomainError("epochs must be >= 0")


@dataclass
class RegretTrace:
    hard_regret: list = field(default_factory=list)
    soft_regret: list = field(default_factory=list)
    betas: list = field(default_factory=list)

    def __len__(self):
        return len(self.hard_regret)

    def append(self, hard: float, soft: float, beta) -> None:
        self.hard_regret.append(float(hard))
        self.soft_regret.append(float(soft))
        self.betas.append(np.array(beta, dtype=float))


def feedback_regret(scores, social_scores) -> float:
    """Mean over tuples and participants of (s_nm - s_m)^2."""
    scores = np.asarray(scores, dtype=float)
    social = np.asarray(social_scores, dtype=float)
    if scores.ndim != 2 or social.shape != (scores.shape[1],):
        raise ValueError(
            f"scores {scores.shape} and social scores {social.shape} do not line up"
        )
    return float(np.mean((scores - social[None, :]) ** 2))


def soft_social_score(P) -> float:
    P = np.asarray(P, dtype=float)
    return P @ LIKERT_VALUES


def _social_probabilities(beta, phibar, params: FeedbackParams) -> np.ndarray:
    psi = np.asarray(phibar, dtype=float) @ np.asarray(beta, dtype=float)
    return choice_probabilities(utilities(psi, params), params.temperature)


def social_scores(beta, phibar, params: FeedbackParams) -> np.ndarray:
    """Hard social Likert score per tuple."""
    return np.argmax(_social_probabilities(beta, phibar, params), axis=-1) + 1


def soft_social_scores(beta, phibar, params: FeedbackParams) -> np.ndarray:
    return soft_social_score(_social_probabilities(beta, phibar, params))


def hard_regret(beta, scores, phibar, params: FeedbackParams) -> float:
    return feedback_regret(scores, social_scores(beta, phibar, params))


def soft_regret(beta, scores, phibar, params: FeedbackParams) -> float:
    return feedback_regret(scores, soft_social_scores(beta, phibar, params))


def _utility_grad_psi(psi: float, params: FeedbackParams, cfg: QuadratureConfig) -> np.ndarray:
    """d u_i / d psi for scores 1..7 at an unclamped psi."""
    r = np.arange(NUM_SCORES + 1) / NUM_SCORES
    g = np.array([beta_cdf_grad_psi(rj, psi, params.precision, cfg) for rj in r])
    return np.diff(g)[::-1]


def srg_gradient(scores, phibar, beta, params: FeedbackParams,
                 cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> np.ndarray:
    """Gradient of the soft feedback regret with respect to the social preferences.

    Chain: regret <- soft score <- utilities <- psi <- beta.  ``beta`` need not
    lie on the simplex; psi is clamped as in the forward pass, and the clamp
    contributes a zero derivative outside [eps, 1 - eps].
    """
    scores = np.asarray(scores, dtype=float)
    phibar = np.asarray(phibar, dtype=float)
    beta = np.asarray(beta, dtype=float)
    N, M = scores.shape
    if phibar.shape[0] != M:
        raise ValueError(f"{M} score columns but {phibar.shape[0]} tuples")
    lam, eps = params.temperature, params.psi_clamp

    grad = np.zeros_like(beta)
    for m in range(M):
        psi = float(phibar[m] @ beta)
        if not (eps < psi < 1.0 - eps):
            continue
        u = utilities(psi, params)
        P = choice_probabilities(u, lam)
        s_soft = P @ LIKERT_VALUES
        d_regret_d_s = -2.0 / (M * N) * np.sum(scores[:, m] - s_soft)
        # logit Jacobian dP_i/du_j = lam * P_i * (delta_ij - P_j)
        jac = lam * (np.diag(P) - np.outer(P, P))
        d_s_d_u = LIKERT_VALUES @ jac
        d_u_d_psi = _utility_grad_psi(psi, params, cfg)
        grad += d_regret_d_s * (d_s_d_u @ d_u_d_psi) * phibar[m]
    return grad


def initial_preference(seed, L: int = 3) -> np.ndarray:
    return np.random.default_rng(seed).dirichlet(np.ones(L))


def saff_learn_phibar(scores, phibar, config: LearnerConfig,
                      cfg: QuadratureConfig = DEFAULT_QUADRATURE):
    """Run the learner on precomputed normalised fairness scores (M, L)."""
    scores = np.asarray(scores)
    phibar = np.asarray(phibar, dtype=float)
    params = config.feedback
    beta = initial_preference(config.seed, phibar.shape[1])
    trace = RegretTrace()
    trace.append(hard_regret(beta, scores, phibar, params),
                 soft_regret(beta, scores, phibar, params), beta)
    for epoch in range(config.epochs):
        grad = srg_gradient(scores, phibar, beta, params, cfg)
        if not np.all(np.isfinite(grad)):
            raise NonFinite(f"epoch {epoch}: non-finite gradient {grad} at beta={beta}")
        beta = project_to_simplex(beta - config.learning_rate * grad)
        trace.append(hard_regret(beta, scores, phibar, params),
                     soft_regret(beta, scores, phibar, params), beta)
    return beta, trace


def saff_learn(scores, tuples, spec, config: LearnerConfig,
               cfg: QuadratureConfig = DEFAULT_QUADRATURE):
    """Learn the social preference vector from an N x M score matrix and M tuples.

    Fairness scores do not depend on the preferences, so they are computed once
    rather than on every epoch.
    """
    return saff_learn_phibar(scores, tuple_phibar(tuples, spec), config, cfg)
