"""Sampling-rate breakdowns over time buckets, language, and event type.

These are the randomness diagnostics: if sampling were uniform, every
bucket would show the same rate.  Time keys are cyclic (hour of day, minute
of hour, second of minute, millisecond of second).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .model import Event, StreamBundle

BREAKDOWN_KEYS = ("hour", "minute", "second", "millisecond", "lang", "type")


@dataclass(frozen=True)
class BreakdownRow:
    bucket: object
    complete_count: int
    sample_count: int
    rate: float


def bucket_value(ev: Event, key: str, tz_offset_hours: int = 0):
    ts = ev.timestamp_ms + tz_offset_hours * 3_600_000
    if key == "hour":
        return (ts // 3_600_000) % 24
    if key == "minute":
        return (ts // 60_000) % 60
    if key == "second":
        return (ts // 1_000) % 60
    if key == "millisecond":
        return ts % 1_000
    if key == "lang":
        return ev.lang
    if key == "type":
        return ev.event_type
    raise ValueError(f"key must be one of {BREAKDOWN_KEYS}")


def sampling_rate_breakdown(
    complete: StreamBundle,
    sample: StreamBundle,
    key: str,
    tz_offset_hours: int = 0,
) -> list[BreakdownRow]:
    """Per-bucket (complete count, sample count, rate) table.

    Buckets with zero complete count are omitted; the complete-count
    weighted mean of the rates equals the stream-wide mean rate exactly.
    """
    if key not in BREAKDOWN_KEYS:
        raise ValueError(f"key must be one of {BREAKDOWN_KEYS}")
    c_counts: Counter = Counter(bucket_value(ev, key, tz_offset_hours) for ev in complete.events)
    s_counts: Counter = Counter(bucket_value(ev, key, tz_offset_hours) for ev in sample.events)
    rows = []
    for bucket in sorted(c_counts, key=lambda b: (str(type(b)), b)):
        c = c_counts[bucket]
        s = s_counts.get(bucket, 0)
        rows.append(BreakdownRow(bucket, c, s, s / c))
    return rows
