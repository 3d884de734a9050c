"""UMi large-scale propagation and the node-pair / subarray-pair channel split.

Long-term state (LOS condition, shadowing, XPD) is generated once per node
pair and shared by every subarray pair between those nodes. Each
(TX subarray, RX subarray) pair then gets its own flat-fading co-polar and
cross-polar coefficients, drawn independently given the shared parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .antenna import ArrayConfig, BeamId, SubarrayPartition, array_gain, vector_angles
from .rng import RngStreams

SPEED_OF_LIGHT = 299_792_458.0
POWER_FLOOR_DBM = -300.0
XPD_CAP_DB = 200.0

UMI_SHADOWING_STD_DB = {True: 4.0, False: 7.82}


@dataclass(frozen=True)
class Node:
    node_id: str
    position: tuple[float, float, float]
    array: ArrayConfig


@dataclass(frozen=True)
class LinkGeometry:
    """Distances and LOS-path angles between a transmitter and a receiver."""

    tx_config: ArrayConfig
    rx_config: ArrayConfig
    distance_2d_m: float
    distance_3d_m: float
    departure: BeamId
    arrival: BeamId

    @classmethod
    def between(cls, tx: Node, rx: Node) -> "LinkGeometry":
        d = np.subtract(rx.position, tx.position, dtype=float)
        d2 = math.hypot(d[0], d[1])
        d3 = float(np.linalg.norm(d))
        if d3 == 0.0:
            raise ValueError("co-located nodes")
        th, ph = vector_angles(d)
        th_r, ph_r = vector_angles(-d)
        return cls(
            tx.array,
            rx.array,
            d2,
            d3,
            BeamId.from_angles(ph, th),
            BeamId.from_angles(ph_r, th_r),
        )


@dataclass(eq=False)
class ChannelParams:
    node_pair_key: tuple[str, str]
    los: bool
    shadowing_db: float
    xpd_db: float
    distance_2d_m: float
    distance_3d_m: float
    generated_at: int


class MatrixKey(NamedTuple):
    node_pair_key: tuple[str, str]
    tx_node: str
    tx_partition: int
    rx_partition: int


@dataclass(eq=False)
class ChannelMatrixEntry:
    key: MatrixKey
    co_polar_gain: complex
    cross_polar_gain: complex
    small_scale_fading_db: float
    params: ChannelParams


@dataclass(frozen=True)
class PropagationSample:
    stream: int
    rx_power_dbm_co: float
    rx_power_dbm_cross: float


@dataclass(frozen=True)
class ChannelConfig:
    scenario: str = "UMi"
    fc_ghz: float = 3.5
    coherence_slots: int = 100
    k_factor_db: float = 10.0
    xpd_mean_los_db: float = 9.0
    xpd_mean_nlos_db: float = 8.0
    xpd_std_db: float = 3.0
    perfect_isolation: bool = False

    def __post_init__(self):
        if self.scenario != "UMi":
            raise ValueError(f"unsupported scenario {self.scenario!r}")
        if self.coherence_slots < 1:
            raise ValueError("coherence_slots must be >= 1")
        if self.xpd_std_db < 0:
            raise ValueError("xpd_std_db must be non-negative")


def node_pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def same_node_guard(tx_node: str, rx_node: str) -> bool:
    """True when a channel may be computed between the two endpoints."""
    return tx_node != rx_node


def umi_los_probability(distance_2d_m: float) -> float:
    if distance_2d_m <= 18.0:
        return 1.0
    return 18.0 / distance_2d_m + math.exp(-distance_2d_m / 36.0) * (1.0 - 18.0 / distance_2d_m)


def breakpoint_distance_m(fc_ghz: float, h_bs_m: float, h_ut_m: float) -> float:
    return 4.0 * (h_bs_m - 1.0) * (h_ut_m - 1.0) * fc_ghz * 1e9 / SPEED_OF_LIGHT


def _umi_los_pl(d2, d3, fc, h_bs, h_ut) -> float:
    d_bp = breakpoint_distance_m(fc, h_bs, h_ut)
    if d2 <= d_bp:
        return 32.4 + 21.0 * math.log10(d3) + 20.0 * math.log10(fc)
    return (
        32.4
        + 40.0 * math.log10(d3)
        + 20.0 * math.log10(fc)
        - 9.5 * math.log10(d_bp**2 + (h_bs - h_ut) ** 2)
    )


def pathloss_db(params: ChannelParams, fc_ghz: float, h_bs_m: float, h_ut_m: float) -> float:
    """UMi street-canyon pathloss (TR 38.901 Table 7.4.1-1), shadowing excluded."""
    if not 0.5 <= fc_ghz <= 100.0:
        raise ValueError(f"carrier {fc_ghz} GHz outside [0.5, 100]")
    if params.distance_3d_m < 1.0:
        raise ValueError("3D distance must be at least 1 m")
    if not (h_bs_m > 1.0 and h_ut_m > 1.0):
        raise ValueError("antenna heights must exceed 1 m")
    d2, d3 = params.distance_2d_m, params.distance_3d_m
    pl_los = _umi_los_pl(d2, d3, fc_ghz, h_bs_m, h_ut_m)
    if params.los:
        return pl_los
    pl_nlos = 35.3 * math.log10(d3) + 22.4 + 21.3 * math.log10(fc_ghz) - 0.3 * (h_ut_m - 1.5)
    return max(pl_los, pl_nlos)


def _to_dbm(lin_mw: float) -> float:
    return 10.0 * math.log10(lin_mw) if lin_mw > 0 else POWER_FLOOR_DBM


def rx_psd(
    tx_power_dbm_per_stream: float,
    tx_sub: SubarrayPartition,
    rx_sub: SubarrayPartition,
    entry: ChannelMatrixEntry,
    params: ChannelParams,
    geometry: LinkGeometry,
    pathloss: float,
    cross: Optional[tuple[SubarrayPartition, ChannelMatrixEntry]] = None,
) -> PropagationSample:
    """Received co-polar power of one stream and the cross-polar leakage into it.

    ``cross`` is the other stream's TX subarray together with the entry that
    links it to ``rx_sub``; without it the leakage is reported at the floor.
    """
    if entry.params is not params:
        raise ValueError("channel entry was generated from different parameters")
    if (entry.key.tx_partition, entry.key.rx_partition) != (tx_sub.partition_index, rx_sub.partition_index):
        raise ValueError(f"entry {entry.key} does not match partitions "
                         f"({tx_sub.partition_index}, {rx_sub.partition_index})")

    g_rx = array_gain(rx_sub, rx_sub.weights, geometry.arrival, geometry.rx_config)
    common = -pathloss - params.shadowing_db + g_rx

    def received(sub: SubarrayPartition, gain: complex) -> float:
        if gain == 0:
            return POWER_FLOOR_DBM
        g_tx = array_gain(sub, sub.weights, geometry.departure, geometry.tx_config)
        budget_db = tx_power_dbm_per_stream + g_tx + common + 20.0 * math.log10(abs(gain))
        return max(budget_db, POWER_FLOOR_DBM)

    co = received(tx_sub, entry.co_polar_gain)
    leak = POWER_FLOOR_DBM
    if cross is not None:
        other_sub, other_entry = cross
        if other_entry.params is not params:
            raise ValueError("cross entry was generated from different parameters")
        if (other_entry.key.tx_partition, other_entry.key.rx_partition) != (
            other_sub.partition_index,
            rx_sub.partition_index,
        ) or other_sub.partition_index == tx_sub.partition_index:
            raise ValueError(f"cross entry {other_entry.key} does not feed RX partition {rx_sub.partition_index}")
        leak = received(other_sub, other_entry.cross_polar_gain)
    return PropagationSample(rx_sub.partition_index, co, leak)


class ChannelModel:
    """Owns the parameter and matrix caches for one simulation run."""

    def __init__(self, config: ChannelConfig, streams: RngStreams, trace: Optional[list] = None):
        self.config = config
        self.streams = streams
        self.trace = trace
        self.nodes: dict[str, Node] = {}
        self.params_cache: dict[tuple[str, str], ChannelParams] = {}
        self.matrix_cache: dict[MatrixKey, ChannelMatrixEntry] = {}

    def add_node(self, node: Node) -> None:
        if node.node_id in self.nodes:
            raise ValueError(f"duplicate node id {node.node_id!r}")
        self.nodes[node.node_id] = node

    def _stale(self, params: ChannelParams, now_slot: int) -> bool:
        return now_slot - params.generated_at >= self.config.coherence_slots

    def get_channel_params(self, node_a: str, node_b: str, now_slot: int) -> ChannelParams:
        if not same_node_guard(node_a, node_b):
            raise ValueError(f"no channel model between arrays of the same node {node_a!r}")
        key = node_pair_key(node_a, node_b)
        params = self.params_cache.get(key)
        if params is not None and not self._stale(params, now_slot):
            return params
        if params is not None:
            self._invalidate(key)
        params = self._new_params(key, now_slot)
        self.params_cache[key] = params
        return params

    def _new_params(self, key, now_slot) -> ChannelParams:
        a, b = (self.nodes[k] for k in key)
        d = np.subtract(a.position, b.position, dtype=float)
        d2 = math.hypot(d[0], d[1])
        d3 = float(np.linalg.norm(d))
        rng = self.streams.get("channel", "|".join(key), "params")
        los = bool(rng.random() < umi_los_probability(d2))
        shadowing = float(rng.normal(0.0, UMI_SHADOWING_STD_DB[los]))
        mean = self.config.xpd_mean_los_db if los else self.config.xpd_mean_nlos_db
        xpd = max(0.0, float(rng.normal(mean, self.config.xpd_std_db)))
        if self.config.perfect_isolation:
            xpd = XPD_CAP_DB
        return ChannelParams(key, los, shadowing, xpd, d2, d3, now_slot)

    def get_channel_matrix(
        self, params: ChannelParams, tx_node: str, tx_partition: int, rx_partition: int
    ) -> ChannelMatrixEntry:
        if self.params_cache.get(params.node_pair_key) is not params:
            raise ValueError("channel parameters are not current")
        if tx_node not in params.node_pair_key:
            raise ValueError(f"{tx_node!r} is not an end of {params.node_pair_key}")
        rx_node = params.node_pair_key[1] if params.node_pair_key[0] == tx_node else params.node_pair_key[0]
        p_tx = self.nodes[tx_node].array.polarizations
        p_rx = self.nodes[rx_node].array.polarizations
        if not (0 <= tx_partition < p_tx and 0 <= rx_partition < p_rx):
            raise IndexError(f"partition pair ({tx_partition}, {rx_partition}) out of range ({p_tx}, {p_rx})")
        key = MatrixKey(params.node_pair_key, tx_node, tx_partition, rx_partition)
        entry = self.matrix_cache.get(key)
        if entry is None:
            entry = self._new_entry(key, params)
            self.matrix_cache[key] = entry
        return entry

    def _new_entry(self, key: MatrixKey, params: ChannelParams) -> ChannelMatrixEntry:
        rng = self.streams.get("channel", "|".join(key.node_pair_key), key.tx_node,
                               key.tx_partition, key.rx_partition, "fading")
        los_phase, cross_phase = rng.uniform(0.0, 2.0 * math.pi, size=2)
        g = rng.normal(0.0, math.sqrt(0.5), size=2)
        scatter = complex(g[0], g[1])
        if params.los:
            k = 10.0 ** (self.config.k_factor_db / 10.0)
            co = math.sqrt(k / (k + 1.0)) * complex(math.cos(los_phase), math.sin(los_phase)) + scatter / math.sqrt(k + 1.0)
        else:
            co = scatter
        if params.xpd_db >= XPD_CAP_DB:
            cross = 0j
        else:
            cross = co * 10.0 ** (-params.xpd_db / 20.0) * complex(math.cos(cross_phase), math.sin(cross_phase))
        fading_db = 20.0 * math.log10(max(abs(co), 1e-300))
        entry = ChannelMatrixEntry(key, co, cross, fading_db, params)
        if self.trace is not None:
            cross_db = 20.0 * math.log10(abs(cross)) if cross != 0 else POWER_FLOOR_DBM
            self.trace.append(
                (params.generated_at, "|".join(key.node_pair_key), key.tx_partition, key.rx_partition,
                 int(params.los), params.shadowing_db, params.xpd_db, fading_db, cross_db)
            )
        return entry

    def _invalidate(self, pair_key) -> None:
        for k in [k for k in self.matrix_cache if k.node_pair_key == pair_key]:
            del self.matrix_cache[k]

    def update_channel(self, now_slot: int) -> list[tuple[str, str]]:
        """Regenerate every parameter set older than the coherence window."""
        refreshed = []
        for key, params in list(self.params_cache.items()):
            if self._stale(params, now_slot):
                self._invalidate(key)
                self.params_cache[key] = self._new_params(key, now_slot)
                refreshed.append(key)
        return refreshed


CHANNEL_TRACE_HEADER = ("slot", "node_pair", "tx_part", "rx_part", "los", "shadowing_db", "xpd_db", "co_db", "cross_db")
