"""JSON interchange bodies for the HTTP API and case journal.

Field names mirror the canonical text serialization (enum names, schema
version tag); floats use Python's shortest round-trip repr via json.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from ..errors import SchemaViolation
from ..schema import ITEMS, NUM_COLORS, SCHEMA_VERSION, AttributeDistribution, SchoolProfile
from ..search import RankedSchool, SearchQuery, SearchResult


def dist_to_json(dist: AttributeDistribution) -> dict[str, Any]:
    return {it.name: [float(v) for v in dist.vector(it)] for it in ITEMS}


def dist_from_json(obj: Any) -> AttributeDistribution:
    if not isinstance(obj, dict):
        raise SchemaViolation("distribution must be an object of item -> 7 probabilities")
    rows = {}
    for it in ITEMS:
        if it.name not in obj:
            raise SchemaViolation(f"distribution missing item {it.name}")
        row = obj[it.name]
        if not isinstance(row, list) or len(row) != NUM_COLORS:
            raise SchemaViolation(f"{it.name}: expected {NUM_COLORS} probabilities")
        rows[it] = np.asarray(row, dtype=np.float64)
    return AttributeDistribution.from_mapping(rows)


def search_result_to_json(result: SearchResult) -> dict[str, Any]:
    return {
        "schema": SCHEMA_VERSION,
        "registry_digest": result.registry_digest,
        "query": {
            "distribution": dist_to_json(result.query.distribution),
            "region_filter": sorted(result.query.region_filter)
            if result.query.region_filter is not None
            else None,
            "max_mismatches": result.query.max_mismatches,
            "top_n": result.query.top_n,
            "epsilon": result.query.epsilon,
        },
        "ranking": [
            {
                "school_id": e.school_id,
                "variant_index": e.variant_index,
                "score": e.score,
                "mismatch_count": e.mismatch_count,
            }
            for e in result.ranking
        ],
    }


def search_result_from_json(obj: dict[str, Any]) -> SearchResult:
    q = obj["query"]
    query = SearchQuery(
        distribution=dist_from_json(q["distribution"]),
        region_filter=frozenset(q["region_filter"]) if q.get("region_filter") is not None else None,
        max_mismatches=q.get("max_mismatches"),
        top_n=q["top_n"],
        epsilon=q["epsilon"],
    )
    ranking = tuple(
        RankedSchool(
            school_id=e["school_id"],
            variant_index=e["variant_index"],
            score=e["score"],
            mismatch_count=e["mismatch_count"],
        )
        for e in obj["ranking"]
    )
    return SearchResult(ranking=ranking, query=query, registry_digest=obj["registry_digest"])


def school_to_json(profile: SchoolProfile) -> dict[str, Any]:
    return {
        "school_id": profile.school_id,
        "display_name": profile.display_name,
        "region_code": profile.region_code,
        "variants": [
            {it.name: v.color(it).name for it in ITEMS} for v in profile.variants
        ],
    }
