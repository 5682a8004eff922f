"""Ground-truth contamination oracle over raw-index footprints.

Contamination is defined on raw-index sets including the target index: a
test observation appearing inside any training-side window (or vice versa)
is exactly the mechanism that inflates leaky evaluations. The buffer
mitigation removes training-side pairs near the test range.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import AuditError
from .splitting import SplitResult
from .windowing import SequencePair, footprint, with_pairs


@dataclass(frozen=True)
class AuditReport:
    """Raw-index overlap between the training side (train + val) and test."""

    train_footprint_size: int
    test_footprint_size: int
    overlap_count: int
    overlap_sample: tuple[int, ...]
    is_contaminated: bool
    contaminated_test_pairs: int

    def to_dict(self) -> dict:
        return {
            "train_footprint_size": self.train_footprint_size,
            "test_footprint_size": self.test_footprint_size,
            "overlap_count": self.overlap_count,
            "overlap_sample": list(self.overlap_sample),
            "is_contaminated": self.is_contaminated,
            "contaminated_test_pairs": self.contaminated_test_pairs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AuditReport":
        return cls(
            train_footprint_size=int(d["train_footprint_size"]),
            test_footprint_size=int(d["test_footprint_size"]),
            overlap_count=int(d["overlap_count"]),
            overlap_sample=tuple(int(i) for i in d["overlap_sample"]),
            is_contaminated=bool(d["is_contaminated"]),
            contaminated_test_pairs=int(d["contaminated_test_pairs"]),
        )


def _training_side(result: SplitResult) -> list[SequencePair]:
    pairs = list(result.train.pairs)
    if result.val is not None:
        pairs.extend(result.val.pairs)
    return pairs


def audit(result: SplitResult) -> AuditReport:
    """Intersect the training-side and test raw footprints (set semantics)."""
    train_fp: set[int] = set()
    for p in _training_side(result):
        train_fp |= footprint(p)
    test_fp: set[int] = set()
    contaminated_pairs = 0
    for p in result.test.pairs:
        fp = footprint(p)
        test_fp |= fp
        if fp & train_fp:
            contaminated_pairs += 1
    overlap = train_fp & test_fp
    return AuditReport(
        train_footprint_size=len(train_fp),
        test_footprint_size=len(test_fp),
        overlap_count=len(overlap),
        overlap_sample=tuple(sorted(overlap)[:20]),
        is_contaminated=bool(overlap),
        contaminated_test_pairs=contaminated_pairs,
    )


def apply_buffer(result: SplitResult, gap: int) -> SplitResult:
    """Drop training-side pairs whose footprints lie within `gap` raw
    indices of the test range.

    The test range is [min, max] of the test footprint union. A pair is
    dropped when every index of its footprint sits within distance `gap`
    of that range, i.e. the footprint is contained in the range widened by
    `gap` on both sides. At gap=0 only pairs falling entirely inside the
    test range are dropped, so a result whose training side merely touches
    the range is returned unchanged. Val pairs count as training side and
    are filtered the same way; the test set is never touched.
    """
    if gap < 0:
        raise AuditError(f"gap must be >= 0, got {gap}")
    test_fp: set[int] = set()
    for p in result.test.pairs:
        test_fp |= footprint(p)
    lo, hi = min(test_fp) - gap, max(test_fp) + gap

    def keep(pairs) -> list[SequencePair]:
        # footprint spans [input_start, target_index], so containment in the
        # widened range reduces to its two extremes
        return [p for p in pairs if p.input_start < lo or p.target_index > hi]

    new_train = keep(result.train.pairs)
    if not new_train:
        raise AuditError(f"buffer gap {gap} empties the train set")
    new_val = None
    if result.val is not None:
        kept_val = keep(result.val.pairs)
        if not kept_val:
            raise AuditError(f"buffer gap {gap} empties the val set")
        new_val = with_pairs(result.val, kept_val)
    return SplitResult(
        train=with_pairs(result.train, new_train),
        val=new_val,
        test=result.test,
        fold_index=result.fold_index,
    )


def minimal_clearing_gap(result: SplitResult) -> int:
    """Smallest gap whose buffered result audits uncontaminated (linear scan)."""
    gap = 0
    while True:
        try:
            buffered = apply_buffer(result, gap)
        except AuditError as exc:
            raise AuditError(
                f"no finite gap clears contamination before partition exhaustion "
                f"(failed at gap {gap}: {exc})"
            ) from exc
        if not audit(buffered).is_contaminated:
            return gap
        gap += 1
