"""Dual-annotator label store with an append-only journal.

A label becomes VERIFIED once at least two annotators agree exactly; the
winning label is the agreeing label with the highest vote count
(majority-of-agreeing-pair).  A tie between two agreeing labels, or two
or more submissions with no agreement at all, is CONFLICTED; fewer than
two submissions is PENDING.  Re-submitting as the same annotator replaces
that annotator's earlier vote.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from threading import Lock
from typing import Optional

from .. import textio
from ..clock import now_epoch
from ..errors import DataError, SchemaViolation
from ..schema import AttributeLabel


class VerificationStatus(Enum):
    PENDING = "PENDING"
    VERIFIED = "VERIFIED"
    CONFLICTED = "CONFLICTED"


@dataclass(frozen=True)
class LabelSubmission:
    image_id: str
    annotator_id: str
    label: AttributeLabel
    submitted_at: int = 0  # epoch seconds; 0 means "stamp at submit time"


@dataclass(frozen=True)
class Ack:
    image_id: str
    annotator_id: str
    replaced: bool
    submissions_for_image: int


_JOURNAL_KIND = "label_journal"


class LabelStore:
    """In-memory vote table, optionally persisted to a journal file."""

    def __init__(self, known_image_ids, journal_path: Optional[str | Path] = None):
        self._known = set(known_image_ids)
        self._votes: dict[str, dict[str, LabelSubmission]] = {}
        self._lock = Lock()
        self._journal = Path(journal_path) if journal_path else None
        if self._journal and self._journal.exists():
            self._replay(self._journal.read_text())

    def _replay(self, text: str) -> None:
        body = textio.split_document(text, _JOURNAL_KIND)
        for ln in body:
            fields = ln.split("\t")
            if len(fields) != 4:
                raise SchemaViolation(f"bad journal line: {ln!r}")
            at, annotator, image_id, inline = fields
            sub = LabelSubmission(
                image_id=image_id,
                annotator_id=annotator,
                label=textio.parse_label_inline(inline),
                submitted_at=int(at),
            )
            self._apply(sub)

    def _apply(self, sub: LabelSubmission) -> Ack:
        if sub.image_id not in self._known:
            raise DataError(f"unknown image_id {sub.image_id!r}")
        votes = self._votes.setdefault(sub.image_id, {})
        replaced = sub.annotator_id in votes
        votes[sub.annotator_id] = sub
        return Ack(
            image_id=sub.image_id,
            annotator_id=sub.annotator_id,
            replaced=replaced,
            submissions_for_image=len(votes),
        )

    def submit(self, submission: LabelSubmission) -> Ack:
        with self._lock:
            if submission.submitted_at == 0:
                submission = LabelSubmission(
                    image_id=submission.image_id,
                    annotator_id=submission.annotator_id,
                    label=submission.label,
                    submitted_at=now_epoch(),
                )
            ack = self._apply(submission)
            if self._journal:
                line = "\t".join(
                    [
                        str(submission.submitted_at),
                        submission.annotator_id,
                        submission.image_id,
                        textio.format_label_inline(submission.label),
                    ]
                )
                new = not self._journal.exists()
                with self._journal.open("a") as fh:
                    if new:
                        fh.write(textio.header(_JOURNAL_KIND) + "\n")
                    fh.write(line + "\n")
            return ack

    def submissions(self, image_id: str) -> list[LabelSubmission]:
        return sorted(
            self._votes.get(image_id, {}).values(), key=lambda s: s.annotator_id
        )

    def image_status(self, image_id: str) -> tuple[VerificationStatus, Optional[AttributeLabel]]:
        votes = self._votes.get(image_id, {})
        if len(votes) < 2:
            return VerificationStatus.PENDING, None
        counts = Counter(sub.label for sub in votes.values())
        agreeing = [(label, n) for label, n in counts.items() if n >= 2]
        if not agreeing:
            return VerificationStatus.CONFLICTED, None
        best = max(n for _, n in agreeing)
        winners = [label for label, n in agreeing if n == best]
        if len(winners) > 1:
            return VerificationStatus.CONFLICTED, None
        return VerificationStatus.VERIFIED, winners[0]

    def verified_labels(self) -> tuple[dict[str, AttributeLabel], list[str]]:
        """Mapping of verified image labels plus the conflicted id list."""
        verified: dict[str, AttributeLabel] = {}
        conflicts: list[str] = []
        for image_id in sorted(self._votes):
            status, label = self.image_status(image_id)
            if status is VerificationStatus.VERIFIED:
                verified[image_id] = label  # type: ignore[assignment]
            elif status is VerificationStatus.CONFLICTED:
                conflicts.append(image_id)
        return verified, conflicts
