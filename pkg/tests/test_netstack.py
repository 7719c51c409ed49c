import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commexplore.netstack import (
    Channel,
    Message,
    ProtocolError,
    Receiver,
    Reporter,
    TokenBucket,
    TrafficClass,
    ack,
    enqueue,
    exchange,
    stats,
    transmit_step,
)

KEY, MC, TS = TrafficClass.KEY, TrafficClass.MISSION_CRITICAL, TrafficClass.TIME_SENSITIVE


def reporter(**topics) -> Reporter:
    rep = Reporter()
    for name, (cls, rate, burst, *bound) in topics.items():
        rep.add_topic(name, cls, rate, burst, *(bound or []))
    return rep


def push(rep, topic, size, now=0.0):
    return enqueue(rep, rep.make_message(topic, size, now=now))


def accounted(rep) -> int:
    return sum(q.queued_bytes() for q in rep.topics.values())


def test_single_enqueue_grows_buffer():
    rep = reporter(map=(KEY, 1e4, 1e4))
    push(rep, "map", 100)
    assert rep.buffer_size_bytes == 100


def test_time_sensitive_evicts_oldest():
    rep = reporter(pose=(TS, 1e4, 1e4, 3))
    dropped = []
    for k in range(4):
        dropped += push(rep, "pose", 10 + k)
    assert [m.seq for m in dropped] == [1]
    assert [f.msg.seq for f in rep.topics["pose"].unsent] == [2, 3, 4]
    assert rep.buffer_size_bytes == 11 + 12 + 13


def test_thousand_enqueues_are_accounted():
    r = np.random.default_rng(5)
    rep = reporter(a=(KEY, 1, 1), b=(MC, 1, 1), c=(TS, 1, 1, 10_000))
    total = 0
    for _ in range(1000):
        topic = str(r.choice(["a", "b", "c"]))
        size = int(r.integers(1, 5000))
        push(rep, topic, size)
        total += size
    assert rep.buffer_size_bytes == total == accounted(rep)


def test_sequence_gap_is_rejected():
    rep = reporter(map=(KEY, 1e4, 1e4))
    push(rep, "map", 10)
    with pytest.raises(ProtocolError):
        enqueue(rep, Message("map", KEY, 10, 5))


def test_class_mismatch_is_rejected():
    rep = reporter(map=(KEY, 1e4, 1e4))
    with pytest.raises(ProtocolError):
        enqueue(rep, Message("map", TS, 10, 1))


def test_link_down_keeps_key_buffer():
    rep = reporter(map=(KEY, 1e4, 1e4))
    for _ in range(20):
        push(rep, "map", 321)
    before = [(f.msg.seq, f.msg.size_bytes) for f in rep.topics["map"].unsent]
    for t in range(200):
        transmit_step(rep, 1e6, False, 0.5)
    assert rep.buffer_size_bytes == 20 * 321
    assert [(f.msg.seq, f.msg.size_bytes) for f in rep.topics["map"].unsent] == before


def test_ts_ttl_drop_when_down():
    rep = reporter(pose=(TS, 1e4, 1e4))
    push(rep, "pose", 50, now=0.0)
    res = transmit_step(rep, 0, False, 6.0, now=6.0)
    assert [m.seq for m in res.dropped] == [1] and rep.buffer_size_bytes == 0


def test_token_bucket_bound_over_ten_seconds():
    rep = reporter(map=(KEY, 100, 100))
    for _ in range(200):
        push(rep, "map", 50)
    sent = 0
    for _ in range(100):  # 10 s at 0.1 s
        res = transmit_step(rep, 1e9, True, 0.1)
        sent += res.bytes_by_topic.get("map", 0)
    assert sent <= 100 + 100 * 10


def test_bucket_stays_in_range():
    b = TokenBucket(10, 30, tokens=0)
    for _ in range(10):
        b.refill(1.0)
        assert 0 <= b.tokens <= 30
    with pytest.raises(ValueError):
        b.consume(31)


def test_lossy_link_delivers_in_order_exactly_once():
    rep = reporter(map=(KEY, 1e5, 1e5))
    rx = Receiver()
    ch = Channel(0.3, rng=np.random.default_rng(3))
    for _ in range(500):
        push(rep, "map", 100)
    now = 0.0
    for _ in range(5000):
        now += 0.1
        exchange(rep, rx, ch, 2000, 0.1, now)
        if rep.buffer_size_bytes == 0:
            break
    assert rx.sequence("map") == list(range(1, 501))
    assert rep.buffer_size_bytes == 0


def _sent(rep, *seqs):
    for _ in seqs:
        push(rep, "map", 10)
    transmit_step(rep, 1e6, True, 0.1)


def test_cumulative_ack():
    rep = reporter(map=(KEY, 1e6, 1e6))
    _sent(rep, 1, 2, 3, 4, 5, 6)
    ack(rep, "map", 2)
    assert rep.unacked_seqs("map") == [3, 4, 5, 6]
    freed = ack(rep, "map", 5)
    assert freed == 30 and rep.unacked_seqs("map") == [6]
    assert ack(rep, "map", 5) == 0 and ack(rep, "map", 3) == 0
    assert rep.unacked_seqs("map") == [6] and rep.buffer_size_bytes == 10


def test_expired_frames_are_resent_first():
    rep = reporter(map=(KEY, 1e6, 1e6))
    _sent(rep, 1, 2)
    push(rep, "map", 10)
    res = transmit_step(rep, 1e6, True, 3.0)  # past the 2 s retransmit timeout
    assert [m.seq for m in res.frames] == [1, 2, 3]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), loss=st.floats(0.0, 0.6))
def test_random_interleavings_leave_unacked_bytes(seed, loss):
    r = np.random.default_rng(seed)
    rep = reporter(map=(KEY, 5e3, 5e3), hb=(MC, 2e3, 2e3))
    rx = Receiver()
    ch = Channel(loss, rng=np.random.default_rng(seed + 1))
    now = 0.0
    sizes = {"map": {}, "hb": {}}
    for _ in range(150):
        now += 0.5
        for topic in ("map", "hb"):
            if r.random() < 0.4:
                m = rep.make_message(topic, int(r.integers(1, 3000)), now=now)
                enqueue(rep, m)
                sizes[topic][m.seq] = m.size_bytes
        exchange(rep, rx, ch, float(r.integers(0, 8000)), 0.5, now, link_up=bool(r.random() < 0.8))
        assert rep.buffer_size_bytes == accounted(rep)
    never_acked = sum(sz for t in sizes for s, sz in sizes[t].items() if s > rep.topics[t].acked_through)
    assert rep.buffer_size_bytes == never_acked
    for t in sizes:
        assert rx.sequence(t) == list(range(1, len(rx.sequence(t)) + 1))


def test_mission_critical_goes_first():
    rep = reporter(map=(KEY, 1e6, 1e6), hb=(MC, 1e6, 1e6))
    for _ in range(5):
        push(rep, "map", 100)
        push(rep, "hb", 100)
    res = transmit_step(rep, 450, True, 0.1)
    assert res.bytes_by_topic == {"hb": 450}
    res = transmit_step(rep, 200, True, 0.1)
    assert res.bytes_by_topic == {"hb": 50, "map": 150}


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_no_key_byte_while_eligible_critical_waits(seed):
    r = np.random.default_rng(seed)
    rep = reporter(map=(KEY, 3e3, 6e3), hb=(MC, 1e3, 2e3))
    for _ in range(60):
        if r.random() < 0.5:
            push(rep, "hb", int(r.integers(1, 800)))
        if r.random() < 0.5:
            push(rep, "map", int(r.integers(1, 800)))
        res = transmit_step(rep, float(r.integers(0, 5000)), True, 0.5)
        if res.bytes_by_topic.get("map"):
            q = rep.topics["hb"]
            assert not q.unsent or math.floor(q.bucket.tokens) < 1


# -- statistics ----------------------------------------------------------------


def test_fresh_stats():
    s = stats(Reporter(), 0.0)
    assert (s.buffer_size_bytes, s.measured_rate_bytes_per_s, s.estimated_transfer_time_s) == (0, 0.0, math.inf)


def test_transfer_time_is_buffer_over_rate():
    rep = reporter(map=(KEY, 1e9, 1e9))
    push(rep, "map", 200_000)
    # steady 20 KB/s of acknowledgements over the last 10 s
    for t in range(1, 11):
        rep._acked_log.append((float(t), 20_000))
    s = stats(rep, 10.0)
    assert s.measured_rate_bytes_per_s == pytest.approx(20_000)
    assert s.estimated_transfer_time_s == pytest.approx(10.0)


@settings(max_examples=40, deadline=None)
@given(acks=st.lists(st.tuples(st.floats(0, 60), st.integers(1, 10_000)), max_size=40),
       now=st.floats(0, 80))
def test_rate_window_recount(acks, now):
    rep = Reporter(rate_window_s=10.0)
    acks = sorted(acks)
    rep._acked_log.extend(acks)
    got = stats(rep, now).measured_rate_bytes_per_s
    expect = sum(b for t, b in acks if now - 10.0 < t <= now) / 10.0
    assert got == pytest.approx(expect)
