"""Downlink MAC scheduling of up to two MIMO streams per UE.

One DCI carries a TB descriptor per scheduled stream and a single HARQ
process id shared by all of them. Streams are acknowledged and retransmitted
independently; a pending retransmission always takes precedence over new
data for that UE.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, NamedTuple, Optional, Sequence

from .antenna import BeamConfId, BeamId
from .phy import DlCqiInfo
from .tables import MCS_TABLE2, McsEntry, check_mcs, cqi_to_mcs

SUBCARRIERS_PER_PRB = 12
MAX_RV = 3
DEFAULT_HARQ_PROCESSES = 20


def mcs_table2() -> tuple[McsEntry, ...]:
    return MCS_TABLE2


def tbs_bytes(mcs: int, n_prb: int, n_data_sym: int, overhead: float) -> int:
    """Transport block size in bytes for one stream."""
    check_mcs(mcs)
    if n_prb < 1:
        raise ValueError("n_prb must be >= 1")
    if not 1 <= n_data_sym <= 14:
        raise ValueError("n_data_sym must be in [1, 14]")
    if not 0.0 <= overhead < 1.0:
        raise ValueError("overhead must be in [0, 1)")
    re = n_prb * SUBCARRIERS_PER_PRB * n_data_sym * (1.0 - overhead)
    return math.floor(MCS_TABLE2[mcs].spectral_efficiency * re / 8.0 + 1e-9)


@dataclass(frozen=True)
class TbInfo:
    mcs: int
    ndi: bool
    rv: int
    tbs_bytes: int

    def __post_init__(self):
        check_mcs(self.mcs)
        if not 0 <= self.rv <= MAX_RV:
            raise ValueError(f"rv {self.rv} outside [0, {MAX_RV}]")
        if self.ndi and self.rv != 0:
            raise ValueError("new data must start at rv 0")
        if self.tbs_bytes < 1:
            raise ValueError("tbs_bytes must be positive")


@dataclass(frozen=True)
class DciInfo:
    rnti: int
    slot: int
    sym_start: int
    num_sym: int
    rbg_mask: int
    harq_process_id: int
    tb_per_stream: tuple[Optional[TbInfo], ...]
    beam_conf: BeamConfId

    def __post_init__(self):
        if not any(tb is not None for tb in self.tb_per_stream):
            raise ValueError("a DCI schedules at least one stream")

    @property
    def n_prb(self) -> int:
        return bin(self.rbg_mask).count("1")

    @property
    def streams(self) -> tuple[int, ...]:
        return tuple(i for i, tb in enumerate(self.tb_per_stream) if tb is not None)


@dataclass(frozen=True)
class DlHarqInfo:
    """Per-stream ACK (True) / NACK (False), ordered like the DCI's scheduled streams."""

    rnti: int
    harq_process_id: int
    ack_per_stream: tuple[bool, ...]


class HarqStatus(str, enum.Enum):
    ACKED = "ack"
    RETX = "retx"
    LOST = "lost"


class HarqOutcome(NamedTuple):
    stream: int
    status: HarqStatus
    tb: TbInfo
    payload: Any


@dataclass
class HarqStream:
    tb: TbInfo
    pending: bool = False
    payload: Any = None


@dataclass
class HarqProcess:
    pid: int
    in_use: bool = False
    awaiting_feedback: bool = False
    streams: dict[int, HarqStream] = field(default_factory=dict)
    last_scheduled: tuple[int, ...] = ()
    n_prb: int = 0
    num_sym: int = 0
    nack_order: int = 0

    @property
    def pending_streams(self) -> tuple[int, ...]:
        return tuple(s for s, hs in sorted(self.streams.items()) if hs.pending)


class HarqProcessPool:
    def __init__(self, size: int = DEFAULT_HARQ_PROCESSES):
        if size < 1:
            raise ValueError("pool needs at least one process")
        self.processes = [HarqProcess(pid) for pid in range(size)]
        self._nack_counter = 0

    def __len__(self):
        return len(self.processes)

    def __getitem__(self, pid: int) -> HarqProcess:
        if not 0 <= pid < len(self.processes):
            raise KeyError(f"unknown HARQ process id {pid}")
        return self.processes[pid]

    @property
    def in_use_count(self) -> int:
        return sum(p.in_use for p in self.processes)

    def has_free(self) -> bool:
        return any(not p.in_use for p in self.processes)

    def allocate(self) -> Optional[HarqProcess]:
        for p in self.processes:
            if not p.in_use:
                p.in_use = True
                p.streams = {}
                return p
        return None

    def release(self, pid: int) -> None:
        p = self[pid]
        p.in_use = False
        p.awaiting_feedback = False
        p.streams = {}
        p.last_scheduled = ()

    def pending(self) -> list[HarqProcess]:
        """Processes with a stream waiting for retransmission, oldest NACK first."""
        waiting = [p for p in self.processes if p.in_use and not p.awaiting_feedback and p.pending_streams]
        return sorted(waiting, key=lambda p: p.nack_order)

    def _next_nack_order(self) -> int:
        self._nack_counter += 1
        return self._nack_counter


def process_harq_feedback(feedback: DlHarqInfo, pool: HarqProcessPool) -> list[HarqOutcome]:
    """Apply one UE's per-stream feedback to its HARQ process."""
    proc = pool[feedback.harq_process_id]
    if not (proc.in_use and proc.awaiting_feedback):
        raise KeyError(f"HARQ process {feedback.harq_process_id} is not awaiting feedback")
    if len(feedback.ack_per_stream) != len(proc.last_scheduled):
        raise ValueError(
            f"feedback for {len(feedback.ack_per_stream)} streams, "
            f"{len(proc.last_scheduled)} were scheduled"
        )
    proc.awaiting_feedback = False
    outcomes = []
    for stream, ack in zip(proc.last_scheduled, feedback.ack_per_stream):
        hs = proc.streams[stream]
        if ack:
            outcomes.append(HarqOutcome(stream, HarqStatus.ACKED, hs.tb, hs.payload))
            del proc.streams[stream]
        elif hs.tb.rv >= MAX_RV:
            outcomes.append(HarqOutcome(stream, HarqStatus.LOST, hs.tb, hs.payload))
            del proc.streams[stream]
        else:
            hs.pending = True
            outcomes.append(HarqOutcome(stream, HarqStatus.RETX, hs.tb, hs.payload))
    if proc.streams:
        proc.nack_order = pool._next_nack_order()
    else:
        pool.release(proc.pid)
    return outcomes


@dataclass
class UeSchedInfo:
    rnti: int
    max_streams: int = 2
    beams: tuple[Optional[BeamId], Optional[BeamId]] = (None, None)
    last_ri: int = 1
    last_cqi_per_stream: list = field(default_factory=lambda: [None, None])
    buffer_bytes: int = 0
    bootstrap_done: bool = False
    preferred_stream: Optional[int] = None

    def new_data_streams(self) -> tuple[int, ...]:
        if not self.bootstrap_done:
            return (0,)
        if min(self.last_ri, self.max_streams) >= 2:
            return (0, 1)
        if self.preferred_stream is not None and self.max_streams >= 2:
            return (self.preferred_stream,)
        return (0,)


def update_ue_from_cqi(report: DlCqiInfo, ue_infos: dict[int, UeSchedInfo]) -> UeSchedInfo:
    try:
        ue = ue_infos[report.rnti]
    except KeyError:
        raise KeyError(f"CQI report for unknown rnti {report.rnti}") from None
    ue.last_ri = report.ri
    for stream, cqi in enumerate(report.wb_cqi):
        if cqi is not None:
            ue.last_cqi_per_stream[stream] = cqi
    ue.bootstrap_done = True
    c0, c1 = ue.last_cqi_per_stream
    if c0 is not None and c1 is not None:
        ue.preferred_stream = 1 if c1 > c0 else 0
    return ue


def beam_conf_of(streams: Iterable[int], gnb_beams: Sequence[Optional[BeamId]]) -> BeamConfId:
    """Beam pair a gNB uses for the given streams of one UE; unused streams are absent."""
    active = set(streams)
    return BeamConfId(tuple(gnb_beams[s] if s in active and s < len(gnb_beams) else None for s in (0, 1)))


class SchedulerMode(str, enum.Enum):
    TDMA = "tdma"
    OFDMA = "ofdma"


class MacScheduler:
    """Round-robin scheduler over one gNB's UEs.

    In TDMA mode one UE owns each slot. In OFDMA mode the UEs sharing a slot
    must have identical beam configurations; PRBs are split equally among
    them after retransmissions keep their original allocation.
    """

    def __init__(
        self,
        n_prb: int = 106,
        n_data_sym: int = 12,
        sym_start: int = 1,
        overhead: float = 0.04,
        mode: SchedulerMode | str = SchedulerMode.TDMA,
        harq_processes: int = DEFAULT_HARQ_PROCESSES,
        initial_mcs: int = 0,
    ):
        check_mcs(initial_mcs)
        self.n_prb = n_prb
        self.n_data_sym = n_data_sym
        self.sym_start = sym_start
        self.overhead = overhead
        self.mode = SchedulerMode(mode)
        self.harq_processes = harq_processes
        self.initial_mcs = initial_mcs
        self.ue_infos: dict[int, UeSchedInfo] = {}
        self.harq: dict[int, HarqProcessPool] = {}
        self._rr: list[int] = []
        self._next = 0

    def add_ue(self, rnti: int, max_streams: int = 2, beams=(None, None)) -> UeSchedInfo:
        if rnti in self.ue_infos:
            raise ValueError(f"duplicate rnti {rnti}")
        if max_streams not in (1, 2):
            raise ValueError("max_streams must be 1 or 2")
        ue = UeSchedInfo(rnti, max_streams, tuple(beams))
        self.ue_infos[rnti] = ue
        self.harq[rnti] = HarqProcessPool(self.harq_processes)
        self._rr.append(rnti)
        return ue

    def update_ue_from_cqi(self, report: DlCqiInfo) -> UeSchedInfo:
        return update_ue_from_cqi(report, self.ue_infos)

    def process_harq_feedback(self, feedback: DlHarqInfo) -> list[HarqOutcome]:
        try:
            pool = self.harq[feedback.rnti]
        except KeyError:
            raise KeyError(f"HARQ feedback for unknown rnti {feedback.rnti}") from None
        return process_harq_feedback(feedback, pool)

    def mcs_for(self, ue: UeSchedInfo, stream: int) -> int:
        cqi = ue.last_cqi_per_stream[stream]
        return self.initial_mcs if cqi is None else cqi_to_mcs(cqi)

    # -- slot scheduling -------------------------------------------------

    def _rr_order(self) -> list[int]:
        n = len(self._rr)
        return [self._rr[(self._next + i) % n] for i in range(n)]

    def _advance_past(self, rnti: int) -> None:
        self._next = (self._rr.index(rnti) + 1) % len(self._rr)

    def _intent(self, rnti: int):
        """(kind, streams) the UE would be served with this slot, or None."""
        pool = self.harq[rnti]
        pending = pool.pending()
        if pending:
            return "retx", pending[0].pending_streams
        ue = self.ue_infos[rnti]
        if ue.buffer_bytes > 0 and pool.has_free():
            return "new", ue.new_data_streams()
        return None

    def schedule_slot(self, slot: int) -> list[DciInfo]:
        if not self._rr:
            return []
        order = self._rr_order()
        intents = {r: self._intent(r) for r in order}
        eligible = [r for r in order if intents[r] is not None]
        if not eligible:
            return []
        # retransmissions first, round-robin otherwise
        eligible.sort(key=lambda r: intents[r][0] != "retx")
        full_mask = (1 << self.n_prb) - 1
        if self.mode is SchedulerMode.TDMA:
            rnti = eligible[0]
            self._advance_past(rnti)
            dci = self._serve(rnti, intents[rnti], slot, full_mask, self.n_prb)
            return [dci] if dci is not None else []

        confs = {r: beam_conf_of(intents[r][1], self.ue_infos[r].beams) for r in eligible}
        head = eligible[0]
        group = [r for r in eligible if confs[r] == confs[head]]
        self._advance_past(group[-1])
        dcis = []
        next_prb = 0
        retx = [r for r in group if intents[r][0] == "retx"]
        fresh = [r for r in group if intents[r][0] == "new"]
        for r in retx:
            need = self.harq[r].pending()[0].n_prb
            if next_prb + need > self.n_prb:
                continue
            mask = ((1 << need) - 1) << next_prb
            dci = self._serve(r, intents[r], slot, mask, need)
            if dci is not None:
                dcis.append(dci)
                next_prb += need
        free = self.n_prb - next_prb
        if fresh and free > 0:
            fresh = fresh[:free]
            share, extra = divmod(free, len(fresh))
            for i, r in enumerate(fresh):
                n = share + (1 if i < extra else 0)
                mask = ((1 << n) - 1) << next_prb
                dci = self._serve(r, intents[r], slot, mask, n)
                if dci is not None:
                    dcis.append(dci)
                next_prb += n
        return dcis

    def _serve(self, rnti, intent, slot, mask, n_prb) -> Optional[DciInfo]:
        kind, streams = intent
        ue = self.ue_infos[rnti]
        pool = self.harq[rnti]
        tbs: list[Optional[TbInfo]] = [None, None]
        if kind == "retx":
            proc = pool.pending()[0]
            for s in streams:
                hs = proc.streams[s]
                hs.tb = replace(hs.tb, ndi=False, rv=hs.tb.rv + 1)
                hs.pending = False
                tbs[s] = hs.tb
            n_prb, num_sym = proc.n_prb, proc.num_sym
            mask = ((1 << n_prb) - 1) << ((mask & -mask).bit_length() - 1)
        else:
            proc = pool.allocate()
            num_sym = self.n_data_sym
            # every intended stream gets a full-size TB, padded if the buffer runs dry
            for s in streams:
                mcs = self.mcs_for(ue, s)
                tb = TbInfo(mcs, True, 0, tbs_bytes(mcs, n_prb, num_sym, self.overhead))
                proc.streams[s] = HarqStream(tb)
                tbs[s] = tb
                ue.buffer_bytes = max(0, ue.buffer_bytes - tb.tbs_bytes)
            proc.n_prb, proc.num_sym = n_prb, num_sym
        proc.last_scheduled = tuple(s for s in (0, 1) if tbs[s] is not None)
        proc.awaiting_feedback = True
        return DciInfo(
            rnti,
            slot,
            self.sym_start,
            num_sym,
            mask,
            proc.pid,
            tuple(tbs),
            beam_conf_of(proc.last_scheduled, ue.beams),
        )
