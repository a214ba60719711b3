"""Data universes and their best-achievable loss curves.

A knowledge universe is a finite collection of random facts, each with an
exposure frequency and a target-token entropy. A web-domain loss curve gives
the best achievable loss F(M) as a function of capacity M (in bits), either
as a power law C + A * M**(-alpha) or as a tabulated convex piecewise-linear
curve. All entropies and losses are in bits; callers converting from nats do
so before construction.

Everything here is immutable after construction and all operations are pure,
so values can be shared freely across threads or worker processes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np

__all__ = [
    "FactSpec",
    "KnowledgeUniverse",
    "PowerLawCurve",
    "TabulatedCurve",
    "WebLossCurve",
    "MixtureUniverse",
    "eval_web_loss",
    "web_marginal",
    "m0_minus",
    "m0_plus",
    "warmup_loss",
    "knowledge_frontier",
    "mixture_to_dict",
    "mixture_from_dict",
    "mixture_to_json",
    "mixture_from_json",
    "web_curve_to_dict",
    "web_curve_from_dict",
]

# Relative tolerance below which exposure frequencies count as equal.
EQUAL_FREQUENCY_RTOL = 1e-12

Side = Literal["left", "right"]


@dataclass(frozen=True)
class FactSpec:
    """One random fact: how often its contexts occur and how much there is to learn.

    exposure_frequency is the probability that any context of this fact
    appears in the knowledge domain's distribution; target_entropy is the
    entropy (bits) of the fact's target token.
    """

    exposure_frequency: float
    target_entropy: float

    def __post_init__(self):
        if not 0.0 < self.exposure_frequency <= 1.0:
            raise ValueError(
                f"exposure_frequency must be in (0, 1], got {self.exposure_frequency}"
            )
        if not (math.isfinite(self.target_entropy) and self.target_entropy >= 0.0):
            raise ValueError(
                f"target_entropy must be finite and >= 0, got {self.target_entropy}"
            )


@dataclass(frozen=True)
class KnowledgeUniverse:
    """A knowledge-dense domain of disjoint facts plus its irreducible loss.

    irreducible_loss is the loss that remains with unbounded capacity (the
    floor of the domain's loss curve).
    """

    facts: tuple[FactSpec, ...]
    irreducible_loss: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "facts", tuple(self.facts))
        if self.irreducible_loss < 0.0:
            raise ValueError(
                f"irreducible_loss must be >= 0, got {self.irreducible_loss}"
            )
        total_p = math.fsum(f.exposure_frequency for f in self.facts)
        if total_p > 1.0 + 1e-12:
            raise ValueError(
                f"fact exposure_frequency values must sum to <= 1 "
                f"(contexts are disjoint), got {total_p}"
            )

    @property
    def fact_count(self) -> int:
        return len(self.facts)

    @property
    def h_tot(self) -> float:
        """Total target entropy (bits): the cost of learning every fact."""
        return math.fsum(f.target_entropy for f in self.facts)

    def frequencies(self) -> np.ndarray:
        return np.array([f.exposure_frequency for f in self.facts], dtype=float)

    def entropies(self) -> np.ndarray:
        return np.array([f.target_entropy for f in self.facts], dtype=float)

    def uniform_frequency(self) -> float | None:
        """The shared exposure frequency, or None if facts differ.

        Frequencies within relative 1e-12 of each other count as equal.
        """
        if not self.facts:
            return None
        p = self.frequencies()
        p_max = float(p.max())
        if p_max - float(p.min()) <= EQUAL_FREQUENCY_RTOL * p_max:
            return float(p[0])
        return None


@dataclass(frozen=True)
class PowerLawCurve:
    """Best-achievable web loss F(M) = floor + amplitude * M**(-exponent).

    The exponent must lie in (0, 1). The curve diverges at M = 0; evaluation
    there returns +inf as a documented sentinel so that allocation code can
    treat a zero web budget uniformly (the allocator never selects it).
    """

    floor: float
    amplitude: float
    exponent: float

    def __post_init__(self):
        if not 0.0 < self.exponent < 1.0:
            raise ValueError(f"exponent must be in (0, 1), got {self.exponent}")
        if not (math.isfinite(self.amplitude) and self.amplitude > 0.0):
            raise ValueError(f"amplitude must be finite and > 0, got {self.amplitude}")
        if not (math.isfinite(self.floor) and self.floor >= 0.0):
            raise ValueError(f"floor must be finite and >= 0, got {self.floor}")


@dataclass(frozen=True)
class TabulatedCurve:
    """Piecewise-linear convex loss curve given as (capacity, loss) points.

    Points must be sorted by capacity, start at capacity 0, have
    non-increasing losses, and have non-decreasing slopes (convexity).
    Non-convex point lists are rejected rather than convexified so that data
    errors surface instead of being silently smoothed away. Beyond the last
    point the curve is flat at the final loss.
    """

    points: tuple[tuple[float, float], ...]
    _capacities: np.ndarray = field(init=False, repr=False, compare=False)
    _losses: np.ndarray = field(init=False, repr=False, compare=False)
    _slopes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pts = tuple((float(m), float(f)) for m, f in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 2:
            raise ValueError("tabulated curve needs at least 2 points")
        caps = np.array([m for m, _ in pts], dtype=float)
        losses = np.array([f for _, f in pts], dtype=float)
        if not (np.all(np.isfinite(caps)) and np.all(np.isfinite(losses))):
            raise ValueError("points must be finite")
        if caps[0] != 0.0:
            raise ValueError(f"first capacity must be 0, got {caps[0]}")
        if np.any(np.diff(caps) <= 0.0):
            raise ValueError("capacities must be strictly increasing")
        if np.any(losses < 0.0):
            raise ValueError("losses must be >= 0")
        if np.any(np.diff(losses) > 0.0):
            raise ValueError("losses must be non-increasing in capacity")
        slopes = np.diff(losses) / np.diff(caps)
        if np.any(np.diff(slopes) < 0.0):
            raise ValueError("points are not convex (slopes must be non-decreasing)")
        object.__setattr__(self, "_capacities", caps)
        object.__setattr__(self, "_losses", losses)
        object.__setattr__(self, "_slopes", slopes)


WebLossCurve = Union[PowerLawCurve, TabulatedCurve]


@dataclass(frozen=True)
class MixtureUniverse:
    """A knowledge domain mixed with a web domain at ratio r.

    The mixture draws a fraction ``mixing_ratio`` of the data distribution
    from the knowledge domain and the rest from the web domain; the two
    domains carry non-overlapping information, so their losses add.
    """

    knowledge: KnowledgeUniverse
    web: WebLossCurve
    mixing_ratio: float

    def __post_init__(self):
        if not 0.0 < self.mixing_ratio < 1.0:
            raise ValueError(
                f"mixing_ratio must be in (0, 1), got {self.mixing_ratio}"
            )


def eval_web_loss(curve: WebLossCurve, capacity: float) -> float:
    """Best achievable web loss at the given capacity (bits)."""
    if capacity < 0.0:
        raise ValueError(f"capacity must be >= 0, got {capacity}")
    if isinstance(curve, PowerLawCurve):
        if capacity == 0.0:
            return math.inf
        return curve.floor + curve.amplitude * capacity ** (-curve.exponent)
    caps, losses = curve._capacities, curve._losses
    if capacity >= caps[-1]:
        return float(losses[-1])
    return float(np.interp(capacity, caps, losses))


def web_marginal(curve: WebLossCurve, capacity: float, side: Side) -> float:
    """Nonnegative marginal value of web capacity: the negated one-sided derivative.

    For a power law both sides agree. For a tabulated curve the left side is
    the negated slope of the segment ending at ``capacity`` and the right
    side the negated slope of the segment starting there; at a breakpoint
    left >= right. Beyond the last point the curve is flat, so both sides
    are 0 there.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if capacity < 0.0:
        raise ValueError(f"capacity must be >= 0, got {capacity}")
    if capacity == 0.0 and side == "left":
        raise ValueError("left derivative is undefined at capacity 0")
    if isinstance(curve, PowerLawCurve):
        if capacity == 0.0:
            return math.inf
        return (
            curve.amplitude * curve.exponent * capacity ** (-curve.exponent - 1.0)
        )
    caps, slopes = curve._capacities, curve._slopes
    if side == "left":
        # Segment whose open interval (caps[i], caps[i+1]] contains capacity.
        i = int(np.searchsorted(caps, capacity, side="left")) - 1
    else:
        i = int(np.searchsorted(caps, capacity, side="right")) - 1
    if i >= len(slopes):
        return 0.0
    return float(-slopes[i])


def _tabulated_marginals_desc(curve: TabulatedCurve) -> np.ndarray:
    """Per-segment marginals -slope, non-increasing by convexity."""
    return -curve._slopes


def m0_minus(curve: WebLossCurve, t: float) -> float:
    """Last capacity at which the web marginal still exceeds t.

    sup{M >= 0 : -F'(M) > t}; returns 0 when no capacity qualifies.
    """
    return _m0(curve, t, plus=False)


def m0_plus(curve: WebLossCurve, t: float) -> float:
    """First capacity at which the web marginal falls below t.

    inf{M >= 0 : -F'(M) < t}; returns 0 when the marginal at 0+ is already
    below t. Always m0_minus(t) <= m0_plus(t), with equality for a strictly
    decreasing marginal (any power law).
    """
    return _m0(curve, t, plus=True)


def _m0(curve: WebLossCurve, t: float, plus: bool) -> float:
    if t <= 0.0:
        raise ValueError(f"marginal threshold t must be > 0, got {t}")
    if isinstance(curve, PowerLawCurve):
        return (curve.amplitude * curve.exponent / t) ** (1.0 / (curve.exponent + 1.0))
    marg = _tabulated_marginals_desc(curve)  # non-increasing
    # Binary search on the descending marginals; negate to search ascending.
    side = "right" if plus else "left"
    k = int(np.searchsorted(-marg, -t, side=side))
    # k = number of segments with marginal > t (minus) or >= t (plus); the
    # answer is the breakpoint that ends that run of segments.
    k = min(k, len(curve._capacities) - 1)
    return float(curve._capacities[k])


def warmup_loss(knowledge: KnowledgeUniverse, capacity: float) -> float:
    """Best loss when every fact shares one exposure frequency p.

    F(M) = irreducible_loss + p * max(H_tot - M, 0): loss falls linearly
    with capacity until the whole domain is stored, then stays flat.
    """
    if capacity < 0.0:
        raise ValueError(f"capacity must be >= 0, got {capacity}")
    if not knowledge.facts:
        return knowledge.irreducible_loss
    p = knowledge.uniform_frequency()
    if p is None:
        raise ValueError(
            "facts have heterogeneous exposure frequencies; "
            "use knowledge_frontier instead"
        )
    return knowledge.irreducible_loss + p * max(knowledge.h_tot - capacity, 0.0)


class _FrontierCurve:
    """Prepared greedy frontier of a knowledge universe.

    Facts are ordered by exposure frequency descending (ties by original
    index ascending) and capacity is spent in that order; the boundary fact
    is learned fractionally. Prefix sums make repeated loss evaluations
    O(log K), which the allocator's line search relies on.
    """

    def __init__(self, knowledge: KnowledgeUniverse):
        self.knowledge = knowledge
        k = knowledge.fact_count
        p = knowledge.frequencies()
        h = knowledge.entropies()
        # lexsort's last key is primary: -p descending, then index ascending.
        order = np.lexsort((np.arange(k), -p))
        self.order = order
        self.p_sorted = p[order]
        self.h_sorted = h[order]
        self.cum_h = np.cumsum(self.h_sorted)
        weighted = self.p_sorted * self.h_sorted
        self.cum_ph = np.cumsum(weighted)
        self.total_ph = float(self.cum_ph[-1]) if k else 0.0
        self.h_tot = knowledge.h_tot

    def loss_at(self, capacity: float) -> float:
        c1 = self.knowledge.irreducible_loss
        if self.knowledge.fact_count == 0:
            return c1
        if capacity >= self.h_tot:
            return c1
        if capacity <= 0.0:
            return c1 + self.total_ph
        k = int(np.searchsorted(self.cum_h, capacity, side="right"))
        learned = float(self.cum_ph[k - 1]) if k > 0 else 0.0
        if k < len(self.h_sorted):
            prev = float(self.cum_h[k - 1]) if k > 0 else 0.0
            learned += float(self.p_sorted[k]) * (capacity - prev)
        return c1 + (self.total_ph - learned)

    def fractions_at(self, capacity: float) -> np.ndarray:
        n = self.knowledge.fact_count
        frac_sorted = np.zeros(n)
        if n == 0:
            return frac_sorted
        if capacity >= self.h_tot:
            frac_sorted[:] = 1.0
        elif capacity > 0.0:
            k = int(np.searchsorted(self.cum_h, capacity, side="right"))
            frac_sorted[:k] = 1.0
            if k < n:
                prev = float(self.cum_h[k - 1]) if k > 0 else 0.0
                if self.h_sorted[k] > 0.0:
                    frac_sorted[k] = (capacity - prev) / self.h_sorted[k]
            # Zero-entropy facts cost nothing, so any positive budget learns them.
            frac_sorted[self.h_sorted == 0.0] = 1.0
        fractions = np.empty(n)
        fractions[self.order] = frac_sorted
        return fractions


def knowledge_frontier(
    knowledge: KnowledgeUniverse, capacity: float
) -> tuple[float, list[float]]:
    """Best loss over the knowledge domain alone, plus per-fact learned fractions.

    Capacity is spent greedily on the most frequently exposed facts first
    (ties broken by original fact index, for determinism); the fact at the
    boundary is learned fractionally. With uniform frequencies this matches
    warmup_loss exactly.
    """
    if capacity < 0.0:
        raise ValueError(f"capacity must be >= 0, got {capacity}")
    frontier = _FrontierCurve(knowledge)
    return frontier.loss_at(capacity), frontier.fractions_at(capacity).tolist()


# ---------------------------------------------------------------------------
# JSON document form. Field names are part of the contract:
# {"knowledge": {"facts": [{"p":..,"h":..}], "c1":..},
#  "web": {"power_law": {"c":..,"a":..,"alpha":..}} | {"tabulated": [[M,F],..]},
#  "r": ..}
# ---------------------------------------------------------------------------


def web_curve_to_dict(curve: WebLossCurve) -> dict:
    if isinstance(curve, PowerLawCurve):
        return {
            "power_law": {"c": curve.floor, "a": curve.amplitude, "alpha": curve.exponent}
        }
    return {"tabulated": [[m, f] for m, f in curve.points]}


def web_curve_from_dict(doc: dict) -> WebLossCurve:
    if "power_law" in doc:
        pl = doc["power_law"]
        return PowerLawCurve(floor=pl["c"], amplitude=pl["a"], exponent=pl["alpha"])
    if "tabulated" in doc:
        return TabulatedCurve(points=tuple((m, f) for m, f in doc["tabulated"]))
    raise ValueError("web curve document needs a 'power_law' or 'tabulated' entry")


def mixture_to_dict(mixture: MixtureUniverse) -> dict:
    return {
        "knowledge": {
            "facts": [
                {"p": f.exposure_frequency, "h": f.target_entropy}
                for f in mixture.knowledge.facts
            ],
            "c1": mixture.knowledge.irreducible_loss,
        },
        "web": web_curve_to_dict(mixture.web),
        "r": mixture.mixing_ratio,
    }


def mixture_from_dict(doc: dict) -> MixtureUniverse:
    try:
        kdoc = doc["knowledge"]
        facts = tuple(
            FactSpec(exposure_frequency=f["p"], target_entropy=f["h"])
            for f in kdoc["facts"]
        )
        knowledge = KnowledgeUniverse(
            facts=facts, irreducible_loss=kdoc.get("c1", 0.0)
        )
        web = web_curve_from_dict(doc["web"])
        return MixtureUniverse(knowledge=knowledge, web=web, mixing_ratio=doc["r"])
    except KeyError as exc:
        raise ValueError(f"mixture document is missing field {exc}") from exc


def mixture_to_json(mixture: MixtureUniverse) -> str:
    return json.dumps(mixture_to_dict(mixture), indent=2, sort_keys=True)


def mixture_from_json(text: str) -> MixtureUniverse:
    return mixture_from_dict(json.loads(text))
