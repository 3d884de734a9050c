"""RLC unacknowledged mode as a byte stream of application packets.

The transmitter cuts the queued packets into whatever TB sizes MAC grants.
The receiver counts a packet once all of its bytes arrive, in any order; a
packet with a segment in a dropped TB is lost for good (UM has no ARQ).
"""

from __future__ import annotations

from collections import deque

Segment = tuple[int, int]  # (packet id, bytes)


class RlcUmBearer:
    def __init__(self):
        self._queue: deque[list[int]] = deque()  # [packet id, bytes left to send]
        self.sizes: list[int] = []
        self.arrivals: list[float] = []
        self._delivered: list[int] = []
        self._lost: list[bool] = []
        self._segmented: list[bool] = []
        self.buffered_bytes = 0
        self.delays: list[float] = []
        self.rx_bytes = 0
        self.rx_packets = 0
        self.lost_packets = 0

    @property
    def tx_packets(self) -> int:
        return len(self.sizes)

    @property
    def tx_bytes(self) -> int:
        return sum(self.sizes)

    def enqueue(self, size: int, arrival_time: float) -> int:
        if size < 1:
            raise ValueError("packet size must be >= 1 byte")
        pid = len(self.sizes)
        self.sizes.append(size)
        self.arrivals.append(arrival_time)
        self._delivered.append(0)
        self._lost.append(False)
        self._segmented.append(False)
        self._queue.append([pid, size])
        self.buffered_bytes += size
        return pid

    def dequeue(self, tbs_bytes: int) -> list[Segment]:
        """Fill one TB of ``tbs_bytes``; any unused room is padding."""
        room = tbs_bytes
        segments = []
        q = self._queue
        while room > 0 and q:
            head = q[0]
            take = min(room, head[1])
            segments.append((head[0], take))
            self._segmented[head[0]] = True
            head[1] -= take
            room -= take
            if head[1] == 0:
                q.popleft()
        self.buffered_bytes -= tbs_bytes - room
        return segments

    def deliver(self, segments, time: float) -> int:
        """Reassemble the segments of a decoded TB; returns packets completed."""
        done = 0
        for pid, n in segments:
            if self._lost[pid]:
                continue
            self._delivered[pid] += n
            if self._delivered[pid] == self.sizes[pid]:
                self.delays.append(time - self.arrivals[pid])
                self.rx_bytes += self.sizes[pid]
                self.rx_packets += 1
                done += 1
        return done

    def drop(self, segments) -> None:
        for pid, _ in segments:
            if not self._lost[pid]:
                self._lost[pid] = True
                self.lost_packets += 1

    @property
    def lost_bytes(self) -> int:
        return sum(s for s, lost in zip(self.sizes, self._lost) if lost)

    @property
    def queued_packets(self) -> int:
        return self._segmented.count(False)

    @property
    def queued_bytes(self) -> int:
        return sum(s for s, seg in zip(self.sizes, self._segmented) if not seg)

    @property
    def in_flight_bytes(self) -> int:
        return self.tx_bytes - self.rx_bytes - self.lost_bytes - self.queued_bytes

    def mean_delay(self) -> float:
        return sum(self.delays) / len(self.delays) if self.delays else 0.0

    def mean_jitter(self) -> float:
        """Mean absolute delay difference of consecutively received packets."""
        d = self.delays
        if len(d) < 2:
            return 0.0
        return sum(abs(b - a) for a, b in zip(d, d[1:])) / (len(d) - 1)
