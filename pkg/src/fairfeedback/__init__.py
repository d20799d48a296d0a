"""Fairness scoring of kidney-offer predictions and social aggregation of fairness feedback."""

from .fairness import FairnessScores, GroupSpec, fairness_scores
from .feedback import FeedbackParams, generate_population, simulate_feedback
from .saff import LearnerConfig, RegretTrace, saff_learn

__all__ = [
    "FairnessScores",
    "FeedbackParams",
    "GroupSpec",
    "LearnerConfig",
    "RegretTrace",
    "fairness_scores",
    "generate_population",
    "saff_learn",
    "simulate_feedback",
]
