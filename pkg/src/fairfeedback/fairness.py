"""
Divergence-based group fairness scores for one data tuple:

    independence  KL between the groups' prediction distributions
    separation    the same, conditioned on the surgeon decision z
    sufficiency   KL between the groups' decision posteriors P(z | y_hat)

Predictions y_T (months to next offer) and y_D (mortality) are modelled as
independent Weibull variables, so every prediction-space KL splits into a
TTNO term plus a mortality term.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import special

from .data import DataTuple, RecipientRecord
from .errors import Degenerate, DegeneratePosterior, DomainError, EmptyGroup
from .numkit import WeibullParams, weibull_kl, weibull_logpdf, weibull_mle_fit

log = logging.getLogger(__name__)

ADVANTAGED = "advantaged"
DISADVANTAGED = "disadvantaged"
GROUPS = (ADVANTAGED, DISADVANTAGED)
ATTRIBUTES = ("gender", "race", "age")
NOTIONS = ("independence", "separation", "sufficiency")

POSTERIOR_CLAMP = 1e-9
DEFAULT_MIN_SAMPLES = 2

# fallback ladder, best first
EXACT, GROUP_POOLED, ALL_POOLED, ZERO = "exact", "group_pooled", "all_pooled", "zero"


@dataclass(frozen=True)
class GroupSpec:
    attribute: str
    advantaged: Callable[[RecipientRecord], bool]
    disadvantaged: Callable[[RecipientRecord], bool]

    @classmethod
    def for_attribute(cls, attribute: str) -> "GroupSpec":
        """Default splits: {Other races, Male, <=50} vs {Black, Female, >50}."""
        if attribute == "gender":
            return cls("gender", lambda r: r.gender == "Male", lambda r: r.gender == "Female")
        if attribute == "race":
            return cls("race", lambda r: r.race != "Black", lambda r: r.race == "Black")
        if attribute == "age":
            return cls("age", lambda r: r.age <= 50, lambda r: r.age > 50)
        raise DomainError(f"unknown attribute {attribute!r}; expected one of {ATTRIBUTES}")

    def split(self, recipients) -> tuple[list, list]:
        adv, dis = [], []
        for r in recipients:
            a, d = self.advantaged(r), self.disadvantaged(r)
            if a and d:
                raise DomainError(f"recipient {r} falls in both {self.attribute} groups")
            if a:
                adv.append(r)
            elif d:
                dis.append(r)
        return adv, dis


@dataclass(frozen=True)
class ConditionalFit:
    """Fitted prediction distributions for one (group, z) cell; z is None when unconditioned."""
    group: str
    z: Optional[int]
    ttno: Optional[WeibullParams]
    mortality: Optional[WeibullParams]
    decision_prior: float
    sample_count: int
    fallback_level: str

    @property
    def usable(self) -> bool:
        return self.fallback_level != ZERO


@dataclass(frozen=True)
class FairnessScores:
    independence: float
    separation: float
    sufficiency: float

    def as_array(self) -> np.ndarray:
        return np.array([self.independence, self.separation, self.sufficiency])


def _fit_pair(records, min_samples):
    """Fit (ttno, mortality) to ``records``; None if either fit is degenerate."""
    try:
        t = weibull_mle_fit([r.ttno for r in records], min_samples)
        d = weibull_mle_fit([r.mortality for r in records], min_samples)
    except Degenerate:
        return None
    return t, d


def fit_group_distributions(tup: DataTuple, spec: GroupSpec, conditioned_on_z: bool = False,
                            min_samples: int = DEFAULT_MIN_SAMPLES) -> dict:
    """Fit Weibull TTNO/mortality distributions per group (and per decision).

    Returns a dict keyed by ``(group, z)``; ``z`` is None for the unconditioned
    group fits, which are always present. Cells too small to fit fall back to
    the group's unconditioned fit, then to a fit over both groups, and finally
    to ``fallback_level == "zero"``.
    """
    adv, dis = spec.split(tup.recipients)
    for name, members in ((ADVANTAGED, adv), (DISADVANTAGED, dis)):
        if not members:
            raise EmptyGroup(f"{spec.attribute}: {name} group has no recipients")

    pooled = _fit_pair(adv + dis, min_samples)
    table = {}
    for group, members in ((ADVANTAGED, adv), (DISADVANTAGED, dis)):
        n = len(members)
        accepted = sum(r.decision for r in members)
        prior = (accepted + 1.0) / (n + 2.0)

        own = _fit_pair(members, min_samples)
        if own is not None:
            params, level = own, EXACT
        elif pooled is not None:
            params, level = pooled, ALL_POOLED
        else:
            params, level = (None, None), ZERO
        table[(group, None)] = ConditionalFit(group, None, params[0], params[1], prior, n, level)

        if not conditioned_on_z:
            continue
        for z in (0, 1):
            cell = [r for r in members if r.decision == z]
            fit = _fit_pair(cell, min_samples)
            if fit is not None:
                cparams, clevel = fit, EXACT
            elif own is not None:
                cparams, clevel = own, GROUP_POOLED
            elif pooled is not None:
                cparams, clevel = pooled, ALL_POOLED
            else:
                cparams, clevel = (None, None), ZERO
            table[(group, z)] = ConditionalFit(group, z, cparams[0], cparams[1], prior, len(cell), clevel)
    return table


def _prediction_kl(p: ConditionalFit, q: ConditionalFit) -> float:
    if not (p.usable and q.usable):
        return 0.0
    return weibull_kl(p.ttno, q.ttno) + weibull_kl(p.mortality, q.mortality)


def independence_score(tup: DataTuple, spec: GroupSpec, min_samples: int = DEFAULT_MIN_SAMPLES) -> float:
    table = fit_group_distributions(tup, spec, False, min_samples)
    return _prediction_kl(table[(ADVANTAGED, None)], table[(DISADVANTAGED, None)])


def decision_frequencies(tup: DataTuple) -> np.ndarray:
    """Raw empirical p(Z=0), p(Z=1) over every recipient of the tuple."""
    z = np.array([r.decision for r in tup.recipients], dtype=float)
    p1 = z.mean()
    return np.array([1.0 - p1, p1])


def separation_score(tup: DataTuple, spec: GroupSpec, min_samples: int = DEFAULT_MIN_SAMPLES) -> float:
    table = fit_group_distributions(tup, spec, True, min_samples)
    pz = decision_frequencies(tup)
    total = 0.0
    for z in (0, 1):
        if pz[z] == 0.0:
            continue
        total += pz[z] * _prediction_kl(table[(ADVANTAGED, z)], table[(DISADVANTAGED, z)])
    return total


def bernoulli_kl(p, q):
    """Two-term KL between Bernoulli(p) and Bernoulli(q), posteriors clamped first."""
    p = np.clip(p, POSTERIOR_CLAMP, 1.0 - POSTERIOR_CLAMP)
    q = np.clip(q, POSTERIOR_CLAMP, 1.0 - POSTERIOR_CLAMP)
    return p * np.log(p / q) + (1.0 - p) * np.log((1.0 - p) / (1.0 - q))


def _posterior_accept(table: dict, group: str, ttno: np.ndarray, mortality: np.ndarray) -> np.ndarray:
    """P(z=1 | y_hat, group) by Bayes with z-conditioned Weibull likelihoods.

    Returns NaN where both class likelihoods vanish.
    """
    c0, c1 = table[(group, 0)], table[(group, 1)]
    prior = c0.decision_prior
    if not (c0.usable and c1.usable):
        # no likelihood information for this group: posterior equals prior
        return np.full(ttno.shape, prior)
    ll0 = np.asarray(weibull_logpdf(ttno, c0.ttno) + weibull_logpdf(mortality, c0.mortality), dtype=float)
    ll1 = np.asarray(weibull_logpdf(ttno, c1.ttno) + weibull_logpdf(mortality, c1.mortality), dtype=float)
    # difference first: log-likelihoods near -1e300 would swallow the prior term
    with np.errstate(invalid="ignore"):
        log_odds = (math.log(prior) - math.log1p(-prior)) + (ll1 - ll0)
    post = special.expit(log_odds)
    return np.where(np.isneginf(ll0) & np.isneginf(ll1), np.nan, post)


def sufficiency_score(tup: DataTuple, spec: GroupSpec, min_samples: int = DEFAULT_MIN_SAMPLES,
                      diagnostics: Optional[list] = None) -> float:
    """Mean over the tuple's recipients of KL(P_adv(z | y_hat) || P_dis(z | y_hat)).

    Recipients where a posterior cannot be formed are skipped and noted in
    ``diagnostics`` when a list is supplied.
    """
    table = fit_group_distributions(tup, spec, True, min_samples)
    ttno = np.array([r.ttno for r in tup.recipients])
    mort = np.array([r.mortality for r in tup.recipients])
    p = _posterior_accept(table, ADVANTAGED, ttno, mort)
    q = _posterior_accept(table, DISADVANTAGED, ttno, mort)
    ok = np.isfinite(p) & np.isfinite(q)
    skipped = int((~ok).sum())
    if skipped:
        msg = f"{spec.attribute}: skipped {skipped} recipient(s) with degenerate posteriors"
        log.debug(msg)
        if diagnostics is not None:
            diagnostics.append(msg)
    if not ok.any():
        raise DegeneratePosterior(f"{spec.attribute}: no recipient admits a posterior")
    # z=1 and z=0 terms of the discrete KL, summed by bernoulli_kl
    kls = bernoulli_kl(p[ok], q[ok])
    return math.fsum(kls) / kls.size   # exact sum: recipient order cannot matter


def fairness_scores(tup: DataTuple, spec: GroupSpec, min_samples: int = DEFAULT_MIN_SAMPLES) -> FairnessScores:
    return FairnessScores(
        independence=independence_score(tup, spec, min_samples),
        separation=separation_score(tup, spec, min_samples),
        sufficiency=sufficiency_score(tup, spec, min_samples),
    )


def is_scoreable(tup: DataTuple, spec: GroupSpec) -> bool:
    adv, dis = spec.split(tup.recipients)
    return bool(adv) and bool(dis)
