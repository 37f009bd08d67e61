"""Missing-volume accounting from rate limit messages.

A segment is a span bounded by two consecutive sample-set messages during
which the reference (complete) stream reported no message of its own, so
its true missing volume is known exactly.  Counter differences across a
segment estimate that volume; ``validate`` scores the estimates.

``map_threads`` untangles interleaved counters from samplers that spread
rate limit messages over several parallel threads, each with its own
cumulative counter.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from statistics import mean, median
from typing import Sequence

from .model import RateLimitMessage, StreamBundle

DEFAULT_MAX_THREADS = 4


class ThreadOverflowError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    """A message-bounded span with event counts from both streams."""

    start_ms: int
    end_ms: int
    bounding_messages: tuple[RateLimitMessage, RateLimitMessage]
    sample_event_count: int
    complete_event_count: int

    def __post_init__(self):
        if self.start_ms >= self.end_ms:
            raise ValueError("segment must have positive duration")
        if self.complete_event_count < self.sample_event_count:
            raise ValueError("sample count exceeds complete count")

    @property
    def true_missing(self) -> int:
        return self.complete_event_count - self.sample_event_count


@dataclass(frozen=True)
class ValidationReport:
    apes: tuple[float, ...]
    median_ape: float
    mean_ape: float


def _count_in(timestamps: Sequence[int], start_ms: int, end_ms: int) -> int:
    # events with start < ts <= end
    return bisect_right(timestamps, end_ms) - bisect_right(timestamps, start_ms)


def segment_stream(complete: StreamBundle, sample: StreamBundle) -> list[Segment]:
    """Maximal spans between consecutive sample messages with a clean reference.

    A candidate span (m_i, m_i+1] is kept only when the complete stream
    emitted no rate limit message inside it, i.e. the complete stream is
    known to be intact there.  Returns an empty list when the sample carries
    fewer than two messages.
    """
    msgs = sample.messages
    if len(msgs) < 2:
        return []
    complete_ts = [e.timestamp_ms for e in complete.events]
    sample_ts = [e.timestamp_ms for e in sample.events]
    complete_msg_ts = [m.timestamp_ms for m in complete.messages]
    segments = []
    for lo, hi in zip(msgs, msgs[1:]):
        if lo.timestamp_ms >= hi.timestamp_ms:
            continue
        if _count_in(complete_msg_ts, lo.timestamp_ms, hi.timestamp_ms) > 0:
            continue
        segments.append(
            Segment(
                start_ms=lo.timestamp_ms,
                end_ms=hi.timestamp_ms,
                bounding_messages=(lo, hi),
                sample_event_count=_count_in(sample_ts, lo.timestamp_ms, hi.timestamp_ms),
                complete_event_count=_count_in(complete_ts, lo.timestamp_ms, hi.timestamp_ms),
            )
        )
    return segments


def estimate_missing(segment: Segment) -> int:
    """Missing volume as the difference of the two bounding counters."""
    lo, hi = segment.bounding_messages
    diff = hi.cumulative_missed - lo.cumulative_missed
    if diff < 0:
        raise ValueError("non-monotone counter: multi-thread data, use map_threads")
    return diff


def validate(segments: Sequence[Segment]) -> ValidationReport:
    """Absolute percentage error of the counter estimate per segment."""
    if not segments:
        raise ValueError("no segments to validate")
    apes = tuple(
        abs(estimate_missing(s) - s.true_missing) / max(s.true_missing, 1) for s in segments
    )
    return ValidationReport(apes, median(apes), mean(apes))


def map_threads(values: Sequence[int], max_threads: int = DEFAULT_MAX_THREADS) -> list[list[int]]:
    """Split one interleaved counter sequence into monotone per-thread lists.

    Greedy rule: a value starts a new list when it is <= every list tail,
    otherwise it extends the list whose tail is the largest value still
    strictly below it.  Needing more than ``max_threads`` lists is an error.
    """
    if not values:
        raise ValueError("empty input")
    lists: list[list[int]] = [[values[0]]]
    for v in values[1:]:
        tails = [lst[-1] for lst in lists]
        if v <= min(tails):
            if len(lists) >= max_threads:
                raise ThreadOverflowError("thread overflow")
            lists.append([v])
            continue
        best = -1
        for i, t in enumerate(tails):
            if t < v and (best < 0 or t > tails[best]):
                best = i
        lists[best].append(v)
    return lists


def total_missing_from_threads(lists: Sequence[Sequence[int]]) -> int:
    """Total missing volume over per-thread cumulative-from-zero counters."""
    return sum(lst[-1] for lst in lists if lst)
