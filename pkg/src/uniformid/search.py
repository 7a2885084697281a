"""Fault-tolerant candidate-school ranking.

A school variant is scored by the log-likelihood of its colors under the
predicted per-item distributions, with an epsilon floor so one
confidently-wrong item penalizes but can never produce -inf.  A hard
mismatch cap and region pre-filtering are offered as additional filters.
Scoring is a linear scan: six log-lookups per variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError, StaleResultError
from .schema import (
    ITEMS,
    AttributeDistribution,
    AttributeLabel,
    ClothingItem,
    SchoolRegistry,
    distribution_argmax,
)

DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class SearchQuery:
    distribution: AttributeDistribution
    region_filter: Optional[frozenset[str]] = None
    max_mismatches: Optional[int] = None
    top_n: int = 10
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.top_n < 1:
            raise ConfigError("top_n must be >= 1")
        if self.max_mismatches is not None and self.max_mismatches < 0:
            raise ConfigError("max_mismatches must be >= 0")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must lie in (0, 1)")


@dataclass(frozen=True)
class RankedSchool:
    school_id: str
    variant_index: int
    score: float  # log-probability, <= 0
    mismatch_count: int


@dataclass(frozen=True)
class SearchResult:
    ranking: tuple[RankedSchool, ...]
    query: SearchQuery
    registry_digest: str


def score_profile(
    distribution: AttributeDistribution, variant: AttributeLabel, epsilon: float = DEFAULT_EPSILON
) -> tuple[float, int]:
    """(sum of floored per-item log-probabilities, argmax mismatch count)."""
    hard = distribution_argmax(distribution)
    score = 0.0
    mismatches = 0
    for it in ITEMS:
        p = float(distribution.vector(it)[variant.color(it).value])
        score += math.log(max(p, epsilon))
        if hard.color(it) is not variant.color(it):
            mismatches += 1
    return score, mismatches


def search(registry: SchoolRegistry, query: SearchQuery) -> SearchResult:
    """Rank schools by their best-scoring variant.

    Region filtering happens first; schools exceeding the mismatch cap
    (when set) are dropped; ties break by ascending school_id then
    variant index, so rankings are stable across runs and registry
    orderings.
    """
    candidates = []
    for prof in registry.profiles:
        if query.region_filter is not None and prof.region_code not in query.region_filter:
            continue
        best: Optional[RankedSchool] = None
        for vi, variant in enumerate(prof.variants):
            score, mism = score_profile(query.distribution, variant, query.epsilon)
            entry = RankedSchool(
                school_id=prof.school_id, variant_index=vi, score=score, mismatch_count=mism
            )
            # Strict > keeps the lowest variant index on score ties.
            if best is None or entry.score > best.score:
                best = entry
        assert best is not None
        if query.max_mismatches is not None and best.mismatch_count > query.max_mismatches:
            continue
        candidates.append(best)

    candidates.sort(key=lambda e: (-e.score, e.school_id, e.variant_index))
    return SearchResult(
        ranking=tuple(candidates[: query.top_n]),
        query=query,
        registry_digest=registry.digest,
    )


@dataclass(frozen=True)
class ExplainRow:
    item: ClothingItem
    variant_color: str
    probability: float
    log_contribution: float
    match: bool


def explain(
    entry: RankedSchool,
    distribution: AttributeDistribution,
    registry: SchoolRegistry,
    registry_digest: str,
    epsilon: float = DEFAULT_EPSILON,
) -> tuple[ExplainRow, ...]:
    """Per-item contribution table for one ranked entry.

    Contributions sum to the entry's score; the digest guards against
    explaining a result with a different registry than produced it.
    """
    if registry_digest != registry.digest:
        raise StaleResultError(
            "search result was produced against a different registry revision"
        )
    variant = registry.by_id(entry.school_id).variants[entry.variant_index]
    hard = distribution_argmax(distribution)
    rows = []
    for it in ITEMS:
        color = variant.color(it)
        p = float(distribution.vector(it)[color.value])
        rows.append(
            ExplainRow(
                item=it,
                variant_color=color.name,
                probability=p,
                log_contribution=math.log(max(p, epsilon)),
                match=hard.color(it) is color,
            )
        )
    return tuple(rows)
