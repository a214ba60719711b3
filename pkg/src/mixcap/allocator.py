"""Optimal bounded-capacity allocation and phase-transition thresholds.

Given a mixture of a knowledge domain (ratio r) and a web domain, the
optimal learner with capacity M splits it as m1 + m2 = M to minimize

    r * F1(m1) + (1 - r) * F2(M - m1),

where F1 is the knowledge frontier and F2 the web loss curve. Because both
curves are convex the optimum is characterized by marginal values: a fact
with exposure frequency p is worth learning exactly when r*p/(1-r) beats the
web marginal -F2'. That comparison produces sharp phase transitions in model
size, mixing ratio, and per-fact corpus frequency, all computed here.

The allocator optimizes this idealized objective directly; it does not
simulate any training procedure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

from .universe import (
    FactSpec,
    KnowledgeUniverse,
    MixtureUniverse,
    PowerLawCurve,
    WebLossCurve,
    _FrontierCurve,
    eval_web_loss,
    m0_minus,
    m0_plus,
    web_marginal,
)

__all__ = [
    "Allocation",
    "ThresholdReport",
    "optimal_allocation",
    "domain_losses",
    "threshold_model_size",
    "threshold_mixing_ratio",
    "threshold_frequency",
    "full_threshold_report",
    "apply_subsampling",
    "apply_ckm",
]

# Absolute tolerance on m1 for the golden-section search.
SEARCH_TOL = 1e-9
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Allocation:
    """An optimal capacity split and the losses it achieves.

    knowledge_capacity (m1) and web_capacity (m2) are in bits and sum to the
    total capacity; learned holds the per-fact learned fraction in original
    fact order.
    """

    knowledge_capacity: float
    web_capacity: float
    knowledge_loss: float
    web_loss: float
    mixture_loss: float
    learned: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "m1": self.knowledge_capacity,
            "m2": self.web_capacity,
            "loss1": self.knowledge_loss,
            "loss2": self.web_loss,
            "loss": self.mixture_loss,
            "learned": list(self.learned),
        }


@dataclass(frozen=True)
class ThresholdReport:
    """Phase-transition thresholds for a mixture configuration.

    model_size_lower is the capacity at or below which nothing from the
    knowledge domain is learned; model_size_upper the capacity at or above
    which everything is. The mixing-ratio and single-fact-frequency fields
    are the analogous bounds at a fixed capacity and are None when no
    capacity was supplied. Asymptotic fields carry the single-value power-law
    forms of the same thresholds (unspecified proportionality constants in
    the underlying scaling relations mean the exact bound pairs are the
    authoritative numbers; consumers choose).
    """

    model_size_lower: float
    model_size_upper: float
    mixing_ratio_lower: float | None = None
    mixing_ratio_upper: float | None = None
    single_fact_frequency_lower: float | None = None
    single_fact_frequency_upper: float | None = None
    single_fact_frequency_asymptotic: float | None = None
    mixing_ratio_asymptotic: float | None = None
    model_size_asymptotic: float | None = None
    exponent: float | None = None

    def __post_init__(self):
        if self.model_size_lower > self.model_size_upper:
            raise ValueError("model_size_lower must be <= model_size_upper")
        if (
            self.mixing_ratio_lower is not None
            and self.mixing_ratio_upper is not None
            and self.mixing_ratio_lower > self.mixing_ratio_upper
        ):
            raise ValueError("mixing_ratio_lower must be <= mixing_ratio_upper")

    def to_dict(self) -> dict:
        return {
            "m_lower": self.model_size_lower,
            "m_upper": self.model_size_upper,
            "r_lower": self.mixing_ratio_lower,
            "r_upper": self.mixing_ratio_upper,
            "f_lower": self.single_fact_frequency_lower,
            "f_upper": self.single_fact_frequency_upper,
            "f_asymptotic": self.single_fact_frequency_asymptotic,
            "r_asymptotic": self.mixing_ratio_asymptotic,
            "m_asymptotic": self.model_size_asymptotic,
            "exponent": self.exponent,
        }


def _marginal_ratio(mixture: MixtureUniverse, p: float) -> float:
    """Threshold t = r*p/(1-r) that the web marginal is compared against."""
    r = mixture.mixing_ratio
    return r * p / (1.0 - r)


def _golden_section(f: Callable[[float], float], a: float, b: float, tol: float) -> float:
    """Minimize a convex f on [a, b] to absolute tolerance tol on x."""
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def optimal_allocation(mixture: MixtureUniverse, total_capacity: float) -> Allocation:
    """Split total_capacity between the knowledge and web domains optimally.

    With uniform fact frequencies the optimum is closed-form: the web keeps
    m0_minus(r*p/(1-r)) bits (the last capacity where its marginal still
    beats a fact's) and the knowledge domain gets the rest, clamped to
    [0, min(M, H_tot)]. Choosing the m0_minus end of any flat-marginal band
    breaks ties toward the knowledge domain. Heterogeneous frequencies fall
    back to a golden-section search over the convex objective with both
    interval endpoints checked explicitly; exact ties also go to the larger
    knowledge share.
    """
    if total_capacity < 0.0:
        raise ValueError(f"total_capacity must be >= 0, got {total_capacity}")
    knowledge, web, r = mixture.knowledge, mixture.web, mixture.mixing_ratio
    frontier = _FrontierCurve(knowledge)
    h_tot = frontier.h_tot
    upper = min(total_capacity, h_tot)

    p = knowledge.uniform_frequency()
    if upper <= 0.0:
        m1 = 0.0
    elif p is not None:
        m0 = m0_minus(web, _marginal_ratio(mixture, p))
        m1 = min(max(total_capacity - m0, 0.0), upper)
    else:
        def objective(x: float) -> float:
            return r * frontier.loss_at(x) + (1.0 - r) * eval_web_loss(
                web, total_capacity - x
            )

        m1 = _golden_section(objective, 0.0, upper, SEARCH_TOL)
        best = objective(m1)
        for cand in (upper, 0.0):  # prefer the larger m1 on exact ties
            val = objective(cand)
            if val < best or (val == best and cand > m1):
                best, m1 = val, cand

    m2 = total_capacity - m1
    loss1 = frontier.loss_at(m1)
    loss2 = eval_web_loss(web, m2)
    return Allocation(
        knowledge_capacity=m1,
        web_capacity=m2,
        knowledge_loss=loss1,
        web_loss=loss2,
        mixture_loss=r * loss1 + (1.0 - r) * loss2,
        learned=tuple(frontier.fractions_at(m1).tolist()),
    )


def domain_losses(
    mixture: MixtureUniverse, total_capacity: float
) -> tuple[float, float]:
    """(knowledge_loss, web_loss) under the optimal allocation."""
    alloc = optimal_allocation(mixture, total_capacity)
    return alloc.knowledge_loss, alloc.web_loss


def _require_uniform(knowledge: KnowledgeUniverse) -> float:
    p = knowledge.uniform_frequency()
    if p is None:
        raise ValueError(
            "threshold formulas need a uniform exposure_frequency; "
            "got heterogeneous facts"
        )
    return p


def threshold_model_size(mixture: MixtureUniverse) -> ThresholdReport:
    """Model-size band outside which the knowledge domain is all-or-nothing.

    At or below the lower bound m0_minus(r*p/(1-r)) the optimal learner
    stores no facts; at or above m0_plus(r*p/(1-r)) + H_tot it stores all of
    them. For a power-law web curve the two m0 values coincide and the report
    carries (A*alpha*(1-r)/(r*p)) ** (1/(alpha+1)) as the nominal single
    threshold along with the scaling exponent alpha + 1.
    """
    p = _require_uniform(mixture.knowledge)
    t = _marginal_ratio(mixture, p)
    h_tot = mixture.knowledge.h_tot
    lower = m0_minus(mixture.web, t)
    upper = m0_plus(mixture.web, t) + h_tot
    exponent = None
    asymptotic = None
    if isinstance(mixture.web, PowerLawCurve):
        exponent = mixture.web.exponent + 1.0
        asymptotic = (
            mixture.web.amplitude * mixture.web.exponent / t
        ) ** (1.0 / exponent)
    return ThresholdReport(
        model_size_lower=lower,
        model_size_upper=upper,
        model_size_asymptotic=asymptotic,
        exponent=exponent,
    )


def threshold_mixing_ratio(
    knowledge: KnowledgeUniverse, web: WebLossCurve, total_capacity: float
) -> tuple[float, float]:
    """Mixing-ratio band (r_lower, r_upper) at a fixed capacity.

    Below r_lower = g / (p + g), with g the left web marginal at M, nothing
    is learned; above r_upper, computed from the right marginal at
    M - H_tot, everything is. When M <= H_tot full learning may require
    r -> 1, so the upper bound is reported as 1.
    """
    if total_capacity <= 0.0:
        raise ValueError(f"total_capacity must be > 0, got {total_capacity}")
    p = _require_uniform(knowledge)
    g = web_marginal(web, total_capacity, "left")
    r_lower = g / (p + g)
    h_tot = knowledge.h_tot
    if total_capacity - h_tot <= 0.0:
        r_upper = 1.0
    else:
        g_up = web_marginal(web, total_capacity - h_tot, "right")
        r_upper = 1.0 if math.isinf(g_up) else g_up / (p + g_up)
    return min(max(r_lower, 0.0), 1.0), min(max(r_upper, 0.0), 1.0)


def threshold_frequency(
    web: WebLossCurve, total_capacity: float, within_domain_p: float, h_tot: float
) -> tuple[float, float, float]:
    """Per-fact corpus frequency band (f_lower, f_upper, asymptotic) at capacity M.

    A fact whose overall corpus frequency r*p exceeds the band is learned.
    The exact bounds evaluate r*p at the mixing-ratio thresholds; the
    asymptotic value is the small-r limit f ~ -F2'(M), which for a power law
    is A * alpha * M**(-alpha-1).
    """
    if total_capacity <= 0.0:
        raise ValueError(f"total_capacity must be > 0, got {total_capacity}")
    if not 0.0 < within_domain_p <= 1.0:
        raise ValueError(
            f"within_domain_p must be in (0, 1], got {within_domain_p}"
        )
    if h_tot < 0.0:
        raise ValueError(f"h_tot must be >= 0, got {h_tot}")
    # A surrogate single-fact universe carrying the given p and H_tot.
    knowledge = KnowledgeUniverse(
        facts=(FactSpec(exposure_frequency=within_domain_p, target_entropy=h_tot),)
    )
    r_lower, r_upper = threshold_mixing_ratio(knowledge, web, total_capacity)
    asymptotic = web_marginal(web, total_capacity, "left")
    return r_lower * within_domain_p, r_upper * within_domain_p, asymptotic


def full_threshold_report(
    mixture: MixtureUniverse, total_capacity: float | None = None
) -> ThresholdReport:
    """All thresholds for one configuration in a single report.

    The model-size band depends only on the mixture; the mixing-ratio and
    frequency bands additionally need a capacity and stay None without one.
    The asymptotic mixing ratio is g/p with g the left web marginal at M,
    the small-r form under which halving the fact count halves the ratio.
    """
    base = threshold_model_size(mixture)
    if total_capacity is None:
        return base
    knowledge, web = mixture.knowledge, mixture.web
    p = _require_uniform(knowledge)
    r_lower, r_upper = threshold_mixing_ratio(knowledge, web, total_capacity)
    f_lower, f_upper, f_asym = threshold_frequency(
        web, total_capacity, p, knowledge.h_tot
    )
    return replace(
        base,
        mixing_ratio_lower=r_lower,
        mixing_ratio_upper=r_upper,
        single_fact_frequency_lower=f_lower,
        single_fact_frequency_upper=f_upper,
        single_fact_frequency_asymptotic=f_asym,
        mixing_ratio_asymptotic=f_asym / p,
    )


def apply_subsampling(mixture: MixtureUniverse, keep_ratio: float) -> MixtureUniverse:
    """Keep a prefix of ceil(keep_ratio * K) facts at proportionally raised frequency.

    The knowledge domain's token share is fixed, so spreading it over fewer
    facts divides each retained fact's exposure frequency by keep_ratio and
    shrinks H_tot accordingly. The prefix is deterministic; callers wanting a
    random subsample shuffle the facts first.
    """
    if not 0.0 < keep_ratio <= 1.0:
        raise ValueError(f"keep_ratio must be in (0, 1], got {keep_ratio}")
    if keep_ratio == 1.0:
        return mixture
    facts = mixture.knowledge.facts
    kept = facts[: math.ceil(keep_ratio * len(facts))]
    scaled = tuple(
        FactSpec(
            exposure_frequency=f.exposure_frequency / keep_ratio,
            target_entropy=f.target_entropy,
        )
        for f in kept
    )
    knowledge = KnowledgeUniverse(
        facts=scaled, irreducible_loss=mixture.knowledge.irreducible_loss
    )
    return replace(mixture, knowledge=knowledge)


def apply_ckm(
    mixture: MixtureUniverse,
    ckm_ratio: float,
    original_tokens_per_fact: float,
    compact_tokens_per_fact: float,
) -> MixtureUniverse:
    """Raise per-fact frequency by mixing in compact rephrasings of each fact.

    With the knowledge token budget held fixed, compact copies occupy the
    fraction tau/(1+tau) of it and state each fact at 1/compact_tokens cost,
    so every exposure frequency is multiplied by

        (1 + tau * original_tokens / compact_tokens) / (1 + tau).

    Entropies are unchanged. This token-share accounting makes the
    proportionality between frequency and inverse token cost explicit; the
    token counts are parameters precisely because only their ratio matters.
    """
    if ckm_ratio < 0.0:
        raise ValueError(f"ckm_ratio must be >= 0, got {ckm_ratio}")
    if original_tokens_per_fact <= 0.0 or compact_tokens_per_fact <= 0.0:
        raise ValueError("token counts must be > 0")
    if ckm_ratio == 0.0:
        return mixture
    multiplier = (
        1.0 + ckm_ratio * original_tokens_per_fact / compact_tokens_per_fact
    ) / (1.0 + ckm_ratio)
    scaled = tuple(
        FactSpec(
            exposure_frequency=f.exposure_frequency * multiplier,
            target_entropy=f.target_entropy,
        )
        for f in mixture.knowledge.facts
    )
    knowledge = KnowledgeUniverse(
        facts=scaled, irreducible_loss=mixture.knowledge.irreducible_loss
    )
    return replace(mixture, knowledge=knowledge)
