"""Sliding-window construction of supervised sequence pairs.

Every pair keeps its raw-index provenance: the window covers raw indices
[t, t+W-1] and the target sits at t+W+L-1, so with lag step L=1 the target
is the observation immediately after the window. The footprint of a pair
(window indices plus target index) is what the leakage audit intersects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import WindowError


@dataclass(frozen=True)
class WindowConfig:
    """Window size W (observations per input) and lag step L (horizon)."""

    window_size: int
    lag_step: int

    def __post_init__(self) -> None:
        if self.window_size < 1:
            raise WindowError(f"window_size must be >= 1, got {self.window_size}")
        if self.lag_step < 1:
            raise WindowError(f"lag_step must be >= 1, got {self.lag_step}")

    def to_dict(self) -> dict:
        return {"window_size": self.window_size, "lag_step": self.lag_step}

    @classmethod
    def from_dict(cls, d: dict) -> "WindowConfig":
        return cls(window_size=int(d["window_size"]), lag_step=int(d["lag_step"]))


@dataclass(frozen=True, eq=False)
class SequencePair:
    """One supervised example: W past values -> one future value.

    input_start is the raw index of the first window element in the
    originating series; target_index = input_start + W + L - 1.
    """

    input: np.ndarray
    target: float
    input_start: int
    target_index: int


def footprint(pair: SequencePair) -> frozenset[int]:
    """Raw indices the pair touches: its window plus its target."""
    w = pair.input.shape[0]
    return frozenset(range(pair.input_start, pair.input_start + w)) | {pair.target_index}


@dataclass(frozen=True, eq=False)
class SequenceSet:
    """An ordered collection of pairs plus the raw interval(s) that produced it.

    source_range holds half-open [start, stop) raw-index intervals; every
    pair's footprint must lie inside one of them. Empty sets are legal.
    """

    pairs: tuple[SequencePair, ...]
    source_range: tuple[tuple[int, int], ...]
    config: WindowConfig

    def __post_init__(self) -> None:
        object.__setattr__(self, "pairs", tuple(self.pairs))
        object.__setattr__(
            self, "source_range", tuple((int(a), int(b)) for a, b in self.source_range)
        )
        prev = None
        for p in self.pairs:
            if prev is not None and p.input_start < prev:
                raise WindowError("pairs must be ordered by input_start")
            prev = p.input_start
            if not any(
                lo <= p.input_start and p.target_index < hi
                for lo, hi in self.source_range
            ):
                raise WindowError(
                    f"pair at t={p.input_start} falls outside source range"
                    f" {self.source_range}"
                )

    def __len__(self) -> int:
        return len(self.pairs)

    def inputs(self) -> np.ndarray:
        """Stack pair inputs into a (n_pairs, W) matrix."""
        if not self.pairs:
            return np.zeros((0, self.config.window_size))
        return np.stack([p.input for p in self.pairs])

    def targets(self) -> np.ndarray:
        return np.array([p.target for p in self.pairs])


def make_sequences(
    values: Sequence[float] | np.ndarray, config: WindowConfig, offset: int = 0
) -> SequenceSet:
    """Slide a (W, L) window over a contiguous segment.

    `offset` is the segment's global raw index, so pair k has
    input_start = offset + k. A segment shorter than W + L yields an empty
    set; callers decide whether that is an error.
    """
    vals = np.asarray(values, dtype=float)
    n = vals.shape[0]
    w, lag = config.window_size, config.lag_step
    count = max(0, n - w - lag + 1)
    pairs = []
    for k in range(count):
        window = vals[k : k + w].copy()
        window.flags.writeable = False
        pairs.append(
            SequencePair(
                input=window,
                target=float(vals[k + w + lag - 1]),
                input_start=offset + k,
                target_index=offset + k + w + lag - 1,
            )
        )
    return SequenceSet(
        pairs=tuple(pairs), source_range=((offset, offset + n),), config=config
    )


def merge_sequence_sets(sets: Iterable[SequenceSet]) -> SequenceSet:
    """Concatenate sets built from disjoint segments into one ordered set."""
    sets = list(sets)
    if not sets:
        raise WindowError("cannot merge zero sequence sets")
    config = sets[0].config
    for s in sets[1:]:
        if s.config != config:
            raise WindowError("cannot merge sequence sets with different configs")
    pairs = sorted(
        (p for s in sets for p in s.pairs), key=lambda p: p.input_start
    )
    ranges = sorted(r for s in sets for r in s.source_range)
    return SequenceSet(pairs=tuple(pairs), source_range=tuple(ranges), config=config)


def with_pairs(base: SequenceSet, pairs: Iterable[SequencePair]) -> SequenceSet:
    """A copy of `base` holding only `pairs` (re-sorted by input_start)."""
    ordered = tuple(sorted(pairs, key=lambda p: p.input_start))
    return SequenceSet(pairs=ordered, source_range=base.source_range, config=base.config)
