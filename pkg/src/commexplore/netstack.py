"""Disruption-tolerant messaging: per-topic queues, token buckets, cumulative ACKs.

The sender side is :class:`Reporter`; the base-station side is
:class:`Receiver`. :class:`Channel` applies frame loss and outages between
them. Sizes are bytes, times are simulated seconds.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class TrafficClass(str, Enum):
    KEY = "Key"
    MISSION_CRITICAL = "MissionCritical"
    TIME_SENSITIVE = "TimeSensitive"

    @property
    def reliable(self) -> bool:
        return self is not TrafficClass.TIME_SENSITIVE


# transmit service order
PRIORITY = (TrafficClass.MISSION_CRITICAL, TrafficClass.KEY, TrafficClass.TIME_SENSITIVE)


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class Message:
    topic: str
    cls: TrafficClass
    size_bytes: int
    seq: int
    created_tick: int = 0
    created_s: float = 0.0

    def __post_init__(self):
        if self.size_bytes <= 0:
            raise ValueError("message size must be positive")


class TokenBucket:
    def __init__(self, rate_bytes_per_s: float, burst_bytes: float, tokens: float | None = None):
        if rate_bytes_per_s < 0 or burst_bytes <= 0:
            raise ValueError("token bucket needs rate >= 0 and burst > 0")
        self.rate_bytes_per_s = float(rate_bytes_per_s)
        self.burst_bytes = float(burst_bytes)
        self.tokens = self.burst_bytes if tokens is None else min(float(tokens), self.burst_bytes)

    def refill(self, dt: float) -> None:
        self.tokens = min(self.burst_bytes, self.tokens + self.rate_bytes_per_s * dt)

    def consume(self, n: float) -> None:
        if n > self.tokens + 1e-9:
            raise ValueError("consuming more tokens than available")
        self.tokens = max(0.0, self.tokens - n)

    def __repr__(self):
        return f"TokenBucket(rate={self.rate_bytes_per_s}, burst={self.burst_bytes}, tokens={self.tokens:.1f})"


@dataclass
class _Frame:
    msg: Message
    sent_bytes: int = 0  # partial progress of the current (re)transmission
    deadline: float = math.inf


@dataclass
class TopicQueue:
    topic: str
    cls: TrafficClass
    bucket: TokenBucket
    bound: int | None = None
    next_seq: int = 1
    unsent: deque = field(default_factory=deque)
    unacked: dict = field(default_factory=dict)  # seq -> _Frame, insertion ordered by seq
    acked_through: int = 0

    def queued_bytes(self) -> int:
        return sum(f.msg.size_bytes for f in self.unsent) + sum(f.msg.size_bytes for f in self.unacked.values())


@dataclass
class NetStats:
    buffer_size_bytes: int
    measured_rate_bytes_per_s: float
    estimated_transfer_time_s: float


@dataclass
class TransmitResult:
    frames: list  # Message objects fully transmitted this step, in send order
    bytes_by_topic: dict
    dropped: list  # Messages discarded (TTL / eviction)


class Reporter:
    """Per-robot outbound message state."""

    def __init__(self, retransmit_timeout_s: float = 2.0, rate_window_s: float = 10.0,
                 ts_ttl_s: float = 5.0, compression: float = 1.0):
        self.topics: dict[str, TopicQueue] = {}
        self.retransmit_timeout_s = retransmit_timeout_s
        self.rate_window_s = rate_window_s
        self.ts_ttl_s = ts_ttl_s
        self.compression = compression
        self._acked_log: deque = deque()  # (time, bytes)
        self.now = 0.0
        self.buffer_size_bytes = 0
        self.counters = {c: {"enqueued": 0, "acked": 0, "dropped": 0, "sent_ts": 0} for c in TrafficClass}

    def add_topic(self, topic: str, cls: TrafficClass, rate_bytes_per_s: float, burst_bytes: float,
                  bound: int | None = None) -> TopicQueue:
        if topic in self.topics:
            raise ValueError(f"topic {topic!r} already registered")
        if cls is TrafficClass.TIME_SENSITIVE and bound is None:
            bound = 20
        q = TopicQueue(topic, cls, TokenBucket(rate_bytes_per_s, burst_bytes), bound)
        self.topics[topic] = q
        return q

    def next_seq(self, topic: str) -> int:
        return self.topics[topic].next_seq

    def make_message(self, topic: str, size_bytes: int, tick: int = 0, now: float = 0.0) -> Message:
        q = self.topics[topic]
        size = max(1, int(round(size_bytes * self.compression)))
        return Message(topic, q.cls, size, q.next_seq, tick, now)

    def stats(self, now: float | None = None) -> NetStats:
        return stats(self, self.now if now is None else now)

    def in_flight(self, cls: TrafficClass) -> int:
        return sum(len(q.unacked) for q in self.topics.values() if q.cls is cls)

    def queued(self, cls: TrafficClass) -> int:
        return sum(len(q.unsent) for q in self.topics.values() if q.cls is cls)

    def unacked_seqs(self, topic: str) -> list[int]:
        return list(self.topics[topic].unacked)


def enqueue(reporter: Reporter, message: Message) -> list[Message]:
    """Queue a message; returns TimeSensitive messages evicted to make room."""
    q = reporter.topics.get(message.topic)
    if q is None:
        raise ProtocolError(f"unknown topic {message.topic!r}")
    if message.seq != q.next_seq:
        raise ProtocolError(f"topic {message.topic}: expected seq {q.next_seq}, got {message.seq}")
    if message.cls is not q.cls:
        raise ProtocolError(f"topic {message.topic} carries {q.cls.value}, got {message.cls.value}")
    q.next_seq += 1
    q.unsent.append(_Frame(message))
    reporter.buffer_size_bytes += message.size_bytes
    reporter.counters[q.cls]["enqueued"] += 1
    dropped = []
    if q.bound is not None:
        while len(q.unsent) > q.bound:
            # never evict a frame that is partially on the wire
            victim = 0 if q.unsent[0].sent_bytes == 0 else 1
            f = q.unsent[victim]
            del q.unsent[victim]
            reporter.buffer_size_bytes -= f.msg.size_bytes
            reporter.counters[q.cls]["dropped"] += 1
            dropped.append(f.msg)
    return dropped


def _requeue_expired(reporter: Reporter, q: TopicQueue, now: float) -> None:
    # go-back-N: once the oldest unacked frame times out, everything unacked is resent in order
    if not q.unacked:
        return
    first = next(iter(q.unacked.values()))
    if first.deadline > now:
        return
    frames = list(q.unacked.values())
    q.unacked.clear()
    for f in reversed(frames):
        f.sent_bytes = 0
        f.deadline = math.inf
        q.unsent.appendleft(f)


def transmit_step(reporter: Reporter, link_budget_bytes: float, link_up: bool, dt: float,
                  now: float | None = None) -> TransmitResult:
    """Spend up to ``link_budget_bytes`` this tick.

    Buckets refill first; topics are served MissionCritical, Key, then
    TimeSensitive (by topic name within a class), each limited by its own
    tokens. A message larger than the remaining budget keeps its partial
    progress for the next tick.
    """
    now = reporter.now + dt if now is None else now
    reporter.now = now
    result = TransmitResult([], {}, [])
    for q in reporter.topics.values():
        q.bucket.refill(dt)
        if q.cls.reliable:
            _requeue_expired(reporter, q, now)
    if not link_up:
        for q in reporter.topics.values():
            if q.cls is TrafficClass.TIME_SENSITIVE:
                keep = deque()
                for f in q.unsent:
                    if now - f.msg.created_s > reporter.ts_ttl_s and f.sent_bytes == 0:
                        reporter.buffer_size_bytes -= f.msg.size_bytes
                        reporter.counters[q.cls]["dropped"] += 1
                        result.dropped.append(f.msg)
                    else:
                        keep.append(f)
                q.unsent = keep
        return result

    budget = max(0.0, float(link_budget_bytes))
    for cls in PRIORITY:
        for name in sorted(reporter.topics):
            q = reporter.topics[name]
            if q.cls is not cls:
                continue
            sent = 0
            while q.unsent and budget >= 1.0:
                f = q.unsent[0]
                need = f.msg.size_bytes - f.sent_bytes
                n = int(min(need, math.floor(q.bucket.tokens), math.floor(budget)))
                if n <= 0:
                    break
                q.bucket.consume(n)
                budget -= n
                sent += n
                f.sent_bytes += n
                if f.sent_bytes < f.msg.size_bytes:
                    break
                q.unsent.popleft()
                result.frames.append(f.msg)
                if cls.reliable:
                    f.sent_bytes = 0
                    f.deadline = now + reporter.retransmit_timeout_s
                    q.unacked[f.msg.seq] = f
                else:
                    reporter.buffer_size_bytes -= f.msg.size_bytes
                    reporter.counters[cls]["sent_ts"] += 1
            if sent:
                result.bytes_by_topic[name] = sent
    return result


def ack(reporter: Reporter, topic: str, cumulative_seq: int, now: float | None = None) -> int:
    """Discharge every unacked frame with seq <= ``cumulative_seq``; returns bytes freed."""
    q = reporter.topics[topic]
    now = reporter.now if now is None else now
    if cumulative_seq <= q.acked_through:
        return 0
    freed = 0
    for seq in [s for s in q.unacked if s <= cumulative_seq]:
        f = q.unacked.pop(seq)
        freed += f.msg.size_bytes
        reporter.counters[q.cls]["acked"] += 1
    # a retransmission may be queued again after the original got through
    keep = deque()
    for f in q.unsent:
        if f.msg.seq <= cumulative_seq and f.msg.seq > q.acked_through:
            freed += f.msg.size_bytes
            reporter.counters[q.cls]["acked"] += 1
        else:
            keep.append(f)
    q.unsent = keep
    q.acked_through = cumulative_seq
    reporter.buffer_size_bytes -= freed
    if freed:
        reporter._acked_log.append((now, freed))
    return freed


def stats(reporter: Reporter, now: float) -> NetStats:
    """Buffer size, ACKed byte rate over the sliding window, and time to drain."""
    log = reporter._acked_log
    lo = now - reporter.rate_window_s
    while log and log[0][0] <= lo:
        log.popleft()
    acked = sum(b for t, b in log if t <= now)
    rate = acked / reporter.rate_window_s
    buf = reporter.buffer_size_bytes
    eta = buf / rate if rate > 0 else math.inf
    return NetStats(buf, rate, eta)


# --------------------------------------------------------------------------
# receiving side
# --------------------------------------------------------------------------


class Receiver:
    """Base-station endpoint for one robot.

    Reliable topics accept frames strictly in order (out-of-order frames are
    discarded and re-requested by the cumulative ACK); duplicates are filtered.
    """

    def __init__(self):
        self.expected: dict[str, int] = {}
        self.log: list[Message] = []

    def receive(self, msg: Message) -> bool:
        if not msg.cls.reliable:
            self.log.append(msg)
            return True
        exp = self.expected.get(msg.topic, 1)
        if msg.seq != exp:
            return False
        self.expected[msg.topic] = exp + 1
        self.log.append(msg)
        return True

    def ack_for(self, topic: str) -> int:
        return self.expected.get(topic, 1) - 1

    def sequence(self, topic: str) -> list[int]:
        return [m.seq for m in self.log if m.topic == topic]


class Channel:
    """Lossy link with optional scripted outages ``[(start_s, end_s), ...]``."""

    def __init__(self, loss_prob: float = 0.0, outages=(), rng: np.random.Generator | None = None):
        self.loss_prob = loss_prob
        self.outages = list(outages)
        self.rng = rng or np.random.default_rng(0)

    def up(self, now: float) -> bool:
        return not any(a <= now < b for a, b in self.outages)

    def passes(self) -> bool:
        # one uniform per frame/ACK regardless of the loss setting
        return self.rng.random() >= self.loss_prob


def exchange(reporter: Reporter, receiver: Receiver, channel: Channel, budget: float, dt: float,
             now: float, link_up: bool | None = None):
    """One tick of sender -> receiver transfer plus the ACK return path.

    Returns ``(transmit_result, delivered_messages)``.
    """
    up = channel.up(now) if link_up is None else (link_up and channel.up(now))
    res = transmit_step(reporter, budget if up else 0.0, up, dt, now)
    delivered = []
    touched = set()
    for msg in res.frames:
        if channel.passes() and receiver.receive(msg):
            delivered.append(msg)
        if msg.cls.reliable:
            touched.add(msg.topic)
    for topic in sorted(touched):
        if channel.passes():
            ack(reporter, topic, receiver.ack_for(topic), now)
    return res, delivered
