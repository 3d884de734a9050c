"""Slot-driven downlink simulation of one gNB serving dual-polarized UEs.

Per slot: stale channel state is refreshed, due HARQ feedback and CQI/RI
reports reach the scheduler, CBR packets enter each UE's RLC UM queue, the
scheduler emits DCIs and each scheduled stream is decoded at the UE.
"""

from __future__ import annotations

import math
import statistics
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple, Optional, Sequence

from .antenna import build_subarrays, steer
from .channel import POWER_FLOOR_DBM, ChannelModel, LinkGeometry, Node, pathloss_db, rx_psd
from .config import ScenarioConfig
from .mac import MAX_RV, DciInfo, DlHarqInfo, MacScheduler
from .phy import (
    HarqSoftState,
    RiMode,
    build_cqi_report,
    compute_cqi,
    compute_ri,
    compute_stream_sinr,
    decode_tb,
    harq_combine,
    noise_power_dbm,
    split_tx_power,
)
from .rlc import RlcUmBearer
from .rng import RngStreams

GNB_ID = "gnb0"

PHY_TRACE_HEADER = ("slot", "rnti", "stream", "sinr_db", "cqi", "ri", "ack")
MAC_TRACE_HEADER = ("slot", "rnti", "harq_pid", "stream", "ndi", "rv", "mcs", "tbs_bytes", "outcome")
RESULTS_HEADER = ("distance", "rng_run", "thr_mbps", "delay_ms", "jitter_ms", "tx_bytes", "rx_bytes", "mean_ri")


@dataclass(frozen=True)
class StatsRecord:
    distance_m: float
    rng_run: int
    tx_bytes: int
    rx_bytes: int
    throughput_mbps: float
    mean_delay_ms: float
    mean_jitter_ms: float
    mean_ri: float
    ri_trace: tuple[int, ...] = field(repr=False)
    new_tbs: int = 0
    retransmissions: int = 0
    lost_tbs: int = 0
    queued_bytes: int = 0
    in_flight_bytes: int = 0
    lost_bytes: int = 0
    n_dci: int = 0
    per_ue_throughput_mbps: tuple[float, ...] = ()


@dataclass
class Traces:
    phy: list = field(default_factory=list)
    mac: list = field(default_factory=list)
    channel: list = field(default_factory=list)
    dci: list = field(default_factory=list)


class _Budget(NamedTuple):
    co_offset_db: float
    cross_offset_db: float


@dataclass
class _UeContext:
    rnti: int
    node: Node
    geometry: LinkGeometry
    gnb_subs: list
    ue_subs: list
    n_streams: int
    bearer: RlcUmBearer = field(default_factory=RlcUmBearer)
    soft: dict = field(default_factory=lambda: defaultdict(HarqSoftState))
    next_packet: int = 0
    budget_params: object = None
    budget: tuple = ()


class Simulation:
    def __init__(self, config: ScenarioConfig, trace: bool = False):
        self.config = config
        self.traces = Traces() if trace else None
        self.streams = RngStreams(config.rng_run)
        self.channel = ChannelModel(
            config.channel_config(), self.streams, self.traces.channel if trace else None
        )
        self.gnb = Node(GNB_ID, (0.0, 0.0, config.gnb_height_m), config.gnb_array)
        self.channel.add_node(self.gnb)
        self.scheduler = MacScheduler(
            n_prb=config.n_prb,
            n_data_sym=config.n_data_sym,
            sym_start=1,
            overhead=config.overhead,
            mode=config.scheduler_mode,
            harq_processes=config.harq_processes,
            initial_mcs=config.initial_mcs,
        )
        self.noise_dbm = noise_power_dbm(config.bandwidth_mhz * 1e6, config.noise_figure_db)
        positions = config.ue_positions or ((config.distance_m, 0.0),)
        self.ues: dict[int, _UeContext] = {}
        for i, (x, y) in enumerate(positions):
            rnti = i + 1
            node = Node(f"ue{i}", (float(x), float(y), config.ue_height_m), config.ue_array)
            self.channel.add_node(node)
            down = LinkGeometry.between(self.gnb, node)
            gnb_subs = steer(build_subarrays(config.gnb_array), down.departure, config.gnb_array)
            ue_subs = steer(build_subarrays(config.ue_array), down.arrival, config.ue_array)
            n_streams = min(len(gnb_subs), len(ue_subs))
            self.ues[rnti] = _UeContext(rnti, node, down, gnb_subs, ue_subs, n_streams)
            beams = tuple(down.departure if s < n_streams else None for s in (0, 1))
            self.scheduler.add_ue(rnti, n_streams, beams)
        self._harq_due: dict[int, list[DlHarqInfo]] = defaultdict(list)
        self._cqi_due: dict[int, list] = defaultdict(list)
        self._ri_trace: list[int] = []
        self._new_tbs = 0
        self._retx = 0
        self._lost_tbs = 0
        self._n_dci = 0

    # -- per-slot pieces -------------------------------------------------

    def _link_budget(self, ue: _UeContext, slot: int) -> tuple[_Budget, ...]:
        params = self.channel.get_channel_params(GNB_ID, ue.node.node_id, slot)
        if params is ue.budget_params:
            return ue.budget
        cfg = self.config
        pl = pathloss_db(params, cfg.fc_ghz, cfg.gnb_height_m, cfg.ue_height_m)
        budget = []
        for s in range(ue.n_streams):
            entry = self.channel.get_channel_matrix(params, GNB_ID, s, s)
            cross = None
            if ue.n_streams == 2:
                o = 1 - s
                cross = (ue.gnb_subs[o], self.channel.get_channel_matrix(params, GNB_ID, o, s))
            sample = rx_psd(0.0, ue.gnb_subs[s], ue.ue_subs[s], entry, params, ue.geometry, pl, cross)
            budget.append(_Budget(sample.rx_power_dbm_co, sample.rx_power_dbm_cross))
        ue.budget_params, ue.budget = params, tuple(budget)
        return ue.budget

    def _arrivals(self, ue: _UeContext, now: float) -> None:
        traffic = self.config.traffic
        if traffic.offered_rate_bps <= 0:
            return
        interval = traffic.packet_bytes * 8.0 / traffic.offered_rate_bps
        stop = traffic.stop_s if traffic.stop_s is not None else self.config.sim_duration_s
        while True:
            t = traffic.start_s + ue.next_packet * interval
            if t > now + 1e-12 or t >= stop - 1e-12:
                break
            ue.bearer.enqueue(traffic.packet_bytes, t)
            ue.next_packet += 1

    def _receive(self, dci: DciInfo, slot: int) -> None:
        cfg = self.config
        ue = self.ues[dci.rnti]
        budget = self._link_budget(ue, slot)
        streams = dci.streams
        p_stream = split_tx_power(cfg.gnb_power_dbm, len(streams))
        proc = self.scheduler.harq[dci.rnti][dci.harq_process_id]
        soft = ue.soft[dci.harq_process_id]
        rng = self.streams.get("phy", "decode", dci.rnti)
        t_done = (slot + 1) * cfg.slot_duration_s
        sinrs, acks = {}, []
        for s in streams:
            tb = dci.tb_per_stream[s]
            co = p_stream + budget[s].co_offset_db
            cross = p_stream + budget[s].cross_offset_db if (1 - s) in streams else POWER_FLOOR_DBM
            sinr = compute_stream_sinr(co, max(cross, POWER_FLOOR_DBM), self.noise_dbm, cfg.rho)
            sinrs[s] = sinr
            hs = proc.streams[s]
            if tb.ndi:
                soft.reset(s)
                hs.payload = ue.bearer.dequeue(tb.tbs_bytes)
                self._new_tbs += 1
            else:
                self._retx += 1
            effective = harq_combine(soft, s, sinr)
            ack = decode_tb(tb, effective, rng)
            if ack:
                ue.bearer.deliver(hs.payload, t_done)
                outcome = "ack"
            elif tb.rv >= MAX_RV:
                ue.bearer.drop(hs.payload)
                self._lost_tbs += 1
                outcome = "lost"
            else:
                outcome = "nack"
            acks.append(ack)
            if self.traces is not None:
                self.traces.mac.append(
                    (slot, dci.rnti, dci.harq_process_id, s, int(tb.ndi), tb.rv, tb.mcs, tb.tbs_bytes, outcome)
                )
        cqis = {s: compute_cqi(sinrs[s], cfg.mcs_table) for s in streams}
        if cfg.ri.mode is RiMode.FIXED:
            ri_cfg = cfg.ri if cfg.ri.fixed_ri <= ue.n_streams else replace(cfg.ri, fixed_ri=ue.n_streams)
        else:
            ri_cfg = cfg.ri
        decision = compute_ri(ri_cfg, streams, sinrs)
        ri = min(decision.ri, ue.n_streams)
        self._ri_trace.append(ri)
        report = build_cqi_report(dci.rnti, ri, cqis)
        self._harq_due[slot + cfg.harq_delay_slots].append(DlHarqInfo(dci.rnti, dci.harq_process_id, tuple(acks)))
        self._cqi_due[slot + cfg.cqi_delay_slots].append(report)
        if self.traces is not None:
            for s, ack in zip(streams, acks):
                self.traces.phy.append((slot, dci.rnti, s, sinrs[s], cqis[s], ri, int(ack)))

    def step(self, slot: int) -> list[DciInfo]:
        cfg = self.config
        now = slot * cfg.slot_duration_s
        self.channel.update_channel(slot)
        # payload delivery/drop already happened at the UE when the TB was decoded
        for fb in self._harq_due.pop(slot, ()):
            self.scheduler.process_harq_feedback(fb)
        for report in self._cqi_due.pop(slot, ()):
            self.scheduler.update_ue_from_cqi(report)
        for ue in self.ues.values():
            self._arrivals(ue, now)
            self.scheduler.ue_infos[ue.rnti].buffer_bytes = ue.bearer.buffered_bytes
        dcis = self.scheduler.schedule_slot(slot)
        for dci in dcis:
            self._n_dci += 1
            if self.traces is not None:
                self.traces.dci.append(dci)
            self._receive(dci, slot)
        return dcis

    def run(self) -> StatsRecord:
        cfg = self.config
        for slot in range(cfg.n_slots):
            self.step(slot)
        return self._stats()

    def _stats(self) -> StatsRecord:
        cfg = self.config
        traffic = cfg.traffic
        stop = traffic.stop_s if traffic.stop_s is not None else cfg.sim_duration_s
        interval = max(min(stop, cfg.sim_duration_s) - traffic.start_s, cfg.slot_duration_s)
        bearers = [ue.bearer for ue in self.ues.values()]
        tx = sum(b.tx_bytes for b in bearers)
        rx = sum(b.rx_bytes for b in bearers)
        queued = sum(b.queued_bytes for b in bearers)
        lost = sum(b.lost_bytes for b in bearers)
        in_flight = sum(b.in_flight_bytes for b in bearers)
        if tx != rx + queued + lost + in_flight or in_flight < 0:
            raise RuntimeError("byte conservation violated")
        delays = [d for b in bearers for d in b.delays]
        n_rx = sum(len(b.delays) for b in bearers)
        jitter_terms = sum(b.mean_jitter() * (len(b.delays) - 1) for b in bearers if len(b.delays) > 1)
        n_jitter = sum(len(b.delays) - 1 for b in bearers if len(b.delays) > 1)
        return StatsRecord(
            distance_m=cfg.distance_m,
            rng_run=cfg.rng_run,
            tx_bytes=tx,
            rx_bytes=rx,
            throughput_mbps=rx * 8.0 / interval / 1e6,
            mean_delay_ms=1e3 * sum(delays) / n_rx if n_rx else 0.0,
            mean_jitter_ms=1e3 * jitter_terms / n_jitter if n_jitter else 0.0,
            mean_ri=sum(self._ri_trace) / len(self._ri_trace) if self._ri_trace else 0.0,
            ri_trace=tuple(self._ri_trace),
            new_tbs=self._new_tbs,
            retransmissions=self._retx,
            lost_tbs=self._lost_tbs,
            queued_bytes=queued,
            in_flight_bytes=in_flight,
            lost_bytes=lost,
            n_dci=self._n_dci,
            per_ue_throughput_mbps=tuple(b.rx_bytes * 8.0 / interval / 1e6 for b in bearers),
        )


def run(config: ScenarioConfig) -> StatsRecord:
    return Simulation(config).run()


@dataclass(frozen=True)
class AggregateRow:
    distance_m: float
    n_runs: int
    throughput_mbps: float
    throughput_std_mbps: float
    mean_delay_ms: float
    mean_jitter_ms: float
    tx_bytes: float
    rx_bytes: float
    mean_ri: float


@dataclass(frozen=True)
class SweepResult:
    records: tuple[StatsRecord, ...]
    aggregates: tuple[AggregateRow, ...]

    def mean_throughput(self) -> dict[float, float]:
        return {a.distance_m: a.throughput_mbps for a in self.aggregates}


def aggregate(records: Sequence[StatsRecord]) -> AggregateRow:
    thr = [r.throughput_mbps for r in records]
    return AggregateRow(
        distance_m=records[0].distance_m,
        n_runs=len(records),
        throughput_mbps=statistics.fmean(thr),
        throughput_std_mbps=statistics.pstdev(thr) if len(thr) > 1 else 0.0,
        mean_delay_ms=statistics.fmean(r.mean_delay_ms for r in records),
        mean_jitter_ms=statistics.fmean(r.mean_jitter_ms for r in records),
        tx_bytes=statistics.fmean(r.tx_bytes for r in records),
        rx_bytes=statistics.fmean(r.rx_bytes for r in records),
        mean_ri=statistics.fmean(r.mean_ri for r in records),
    )


def sweep(
    base_config: ScenarioConfig,
    distances: Iterable[float],
    rng_runs: Iterable[int],
    jobs: int = 1,
) -> SweepResult:
    """Run every (distance, rng_run) pair and average per distance.

    Runs are independent, so ``jobs > 1`` fans them out over processes; the
    result order is always sorted by (distance, rng_run).
    """
    distances = sorted(set(float(d) for d in distances))
    runs = sorted(set(int(r) for r in rng_runs))
    if not distances or not runs:
        raise ValueError("sweep needs at least one distance and one rng run")
    configs = [replace(base_config, distance_m=d, rng_run=r) for d in distances for r in runs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run, configs))
    else:
        records = [run(c) for c in configs]
    records.sort(key=lambda r: (r.distance_m, r.rng_run))
    aggregates = tuple(aggregate([r for r in records if r.distance_m == d]) for d in distances)
    return SweepResult(tuple(records), aggregates)
