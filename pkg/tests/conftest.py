import numpy as np
import pytest

from streamfid.model import Event, RateLimitMessage, StreamBundle


def ev(id, ts, user=0, kind="root", root_id=None, hashtags=(), urls=(),
       followers=0, lang="en"):
    return Event(id=id, timestamp_ms=ts, user_id=user, event_type=kind,
                 root_id=root_id, hashtags=tuple(hashtags), urls=tuple(urls),
                 follower_count=followers, lang=lang)


@pytest.fixture
def simple_bundle():
    events = [ev(i, 100 * i, user=i % 3) for i in range(10)]
    return StreamBundle.build(events)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def random_bundle(rng, n=50, id_offset=0, span_ms=10_000):
    ts = np.sort(rng.integers(0, span_ms, size=n))
    events = []
    for i, t in enumerate(ts):
        events.append(ev(id_offset + i, int(t) + i, user=int(rng.integers(5))))
    msgs = [RateLimitMessage(int(t), int(c)) for t, c in
            zip(np.sort(rng.integers(0, span_ms, size=3)), np.cumsum(rng.integers(1, 5, size=3)))]
    return StreamBundle.build(events, msgs)
