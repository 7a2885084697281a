"""Train/test splitting: stratified holdout and leave-one-school-out.

LOSO folds follow the two-scenario protocol: per fold, a "seen" test of
uniform images from the training schools and an "unseen" test of uniform
images from the held-out school, each mixed with the same number of
non-uniform images so the uniform:non-uniform ratio is identical in both
groups by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from ..errors import ConfigError, DataError
from ..nn.net import derive_rng
from ..schema import ImageRecord, SchoolRegistry


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[str, ...]
    test: tuple[str, ...]
    fold_id: str
    held_out_school: Optional[str] = None

    def __post_init__(self):
        overlap = set(self.train) & set(self.test)
        if overlap:
            raise DataError(
                f"split {self.fold_id}: {len(overlap)} ids appear in both train and test"
            )


def _largest_remainder_quotas(sizes: list[int], total_take: int, fraction: float) -> list[int]:
    exact = [fraction * n for n in sizes]
    quotas = [int(f) for f in exact]
    remainders = [f - q for f, q in zip(exact, quotas)]
    short = total_take - sum(quotas)
    # Hand out the shortfall to the largest fractional remainders; ties go
    # to the earlier stratum for determinism.
    order = sorted(range(len(sizes)), key=lambda i: (-remainders[i], i))
    for i in order[:short]:
        quotas[i] += 1
    for q, n in zip(quotas, sizes):
        if q < 0 or q > n:
            raise DataError("stratum quota out of range")
    return quotas


def holdout_split(
    records: Sequence[ImageRecord], train_fraction: float, seed: int
) -> DatasetSplit:
    """Seeded stratified holdout; |train| = round(train_fraction * N)."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = len(records)
    if n < 2:
        raise DataError("need at least 2 records to split")

    strata: dict[object, list[str]] = {}
    for rec in records:
        key = rec.ground_truth.uniform_flag if rec.ground_truth else None
        strata.setdefault(key, []).append(rec.image_id)

    keys = sorted(strata.keys(), key=lambda k: (k is None, repr(k)))
    total_train = int(train_fraction * n + 0.5)
    quotas = _largest_remainder_quotas([len(strata[k]) for k in keys], total_train, train_fraction)

    train: list[str] = []
    test: list[str] = []
    for key, quota in zip(keys, quotas):
        ids = sorted(strata[key])
        rng = derive_rng(seed, "holdout", repr(key))
        rng.shuffle(ids)
        train.extend(ids[:quota])
        test.extend(ids[quota:])
    return DatasetSplit(
        train=tuple(sorted(train)), test=tuple(sorted(test)), fold_id="holdout"
    )


def loso_splits(
    records: Sequence[ImageRecord], registry: SchoolRegistry, seed: int = 0
) -> list[DatasetSplit]:
    """2K test configurations over K folds (seen + unseen per school).

    Both test groups of a fold share one training set and have identical
    uniform and non-uniform counts, so their class ratio is equal exactly.
    """
    school_ids = list(registry.school_ids)
    if len(school_ids) < 2:
        raise DataError("leave-one-school-out needs at least 2 schools")

    uniform_by_school: dict[str, list[str]] = {sid: [] for sid in school_ids}
    nonuniform: list[str] = []
    for rec in records:
        if rec.ground_truth is None:
            raise DataError(f"record {rec.image_id} lacks ground truth")
        if rec.ground_truth.uniform_flag:
            if rec.school_id not in uniform_by_school:
                raise DataError(
                    f"uniform image {rec.image_id} has school {rec.school_id!r} "
                    "not present in the registry"
                )
            uniform_by_school[rec.school_id].append(rec.image_id)
        else:
            nonuniform.append(rec.image_id)

    for sid in school_ids:
        if not uniform_by_school[sid]:
            raise DataError(f"school {sid} has zero images; cannot build its fold")
    if not nonuniform:
        raise DataError("no non-uniform images; cannot build test groups")

    nonuniform = sorted(nonuniform)
    splits: list[DatasetSplit] = []
    for sid in school_ids:
        held_ids = sorted(uniform_by_school[sid])
        seen_pool: list[str] = []
        seen_schools = [s for s in school_ids if s != sid]

        # Equal test sizes: n uniform images in each group, n non-uniform
        # in each group, bounded by availability.
        n_test = min(
            len(held_ids),
            sum(len(uniform_by_school[s]) for s in seen_schools) // 2,
            len(nonuniform) // 2,
        )
        if n_test < 1:
            raise DataError(f"not enough images to build test groups for fold {sid}")

        rng = derive_rng(seed, "loso", sid)
        unseen_uniform = list(held_ids)
        rng.shuffle(unseen_uniform)
        unseen_uniform = sorted(unseen_uniform[:n_test])

        quotas = _largest_remainder_quotas(
            [len(uniform_by_school[s]) for s in seen_schools],
            n_test,
            n_test / sum(len(uniform_by_school[s]) for s in seen_schools),
        )
        for s, quota in zip(seen_schools, quotas):
            ids = sorted(uniform_by_school[s])
            rng_s = derive_rng(seed, "loso", sid, s)
            rng_s.shuffle(ids)
            seen_pool.extend(ids[:quota])
        seen_uniform = sorted(seen_pool)

        non_ids = list(nonuniform)
        rng.shuffle(non_ids)
        seen_non = sorted(non_ids[:n_test])
        unseen_non = sorted(non_ids[n_test : 2 * n_test])

        reserved = set(seen_uniform) | set(unseen_uniform) | set(seen_non) | set(unseen_non)
        train = sorted(
            [i for s in seen_schools for i in uniform_by_school[s] if i not in reserved]
            + [i for i in nonuniform if i not in reserved]
        )

        splits.append(
            DatasetSplit(
                train=tuple(train),
                test=tuple(sorted(seen_uniform + seen_non)),
                fold_id=f"loso-{sid}-seen",
                held_out_school=sid,
            )
        )
        splits.append(
            DatasetSplit(
                train=tuple(train),
                test=tuple(sorted(unseen_uniform + unseen_non)),
                fold_id=f"loso-{sid}-unseen",
                held_out_school=sid,
            )
        )
    return splits
