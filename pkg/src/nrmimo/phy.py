"""Per-stream SINR, error model, HARQ soft combining, CQI and rank indication."""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from statistics import NormalDist
from typing import Mapping, NamedTuple, Optional, Sequence

from .tables import CQI_TABLE2, MCS_TABLE2, check_mcs, cqi_to_mcs

THERMAL_NOISE_DBM_HZ = -174.0
BLER_TARGET = 0.1
BLER_SLOPE_DB = 0.5
SHANNON_FRACTION = 0.85
MAX_TRANSMISSIONS = 4  # initial transmission + RV 1..3


class RiMode(str, enum.Enum):
    FIXED = "fixed"
    ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class RiConfig:
    mode: RiMode = RiMode.ADAPTIVE
    fixed_ri: int = 1
    threshold1_db: float = 7.0
    threshold2_db: float = 12.0

    def __post_init__(self):
        object.__setattr__(self, "mode", RiMode(self.mode))
        if self.fixed_ri not in (1, 2):
            raise ValueError("fixed_ri must be 1 or 2")
        if not (math.isfinite(self.threshold1_db) and math.isfinite(self.threshold2_db)):
            raise ValueError("RI thresholds must be finite")


class RiDecision(NamedTuple):
    ri: int
    report_both_cqis: bool


@dataclass(frozen=True)
class StreamSinrReport:
    stream_index: int
    sinr_db: float
    slot: int


@dataclass(frozen=True)
class DlCqiInfo:
    """Wideband CQI report; ``wb_cqi[i]`` belongs to stream ``i``.

    A stream that was not received is ``None`` when a higher stream index is
    reported, so the index/stream correspondence always holds.
    """

    rnti: int
    wb_cqi: tuple[Optional[int], ...]
    ri: int

    def __post_init__(self):
        if not 1 <= len(self.wb_cqi) <= 2:
            raise ValueError("wb_cqi holds one or two entries")
        if self.ri not in (1, 2):
            raise ValueError("ri must be 1 or 2")


@dataclass
class HarqSoftState:
    """Accumulated linear SINR and transmission count of each stream's TB."""

    accumulated: dict[int, float] = field(default_factory=dict)
    transmissions: dict[int, int] = field(default_factory=dict)

    def reset(self, stream: int) -> None:
        self.accumulated[stream] = 0.0
        self.transmissions[stream] = 0


def db_to_lin(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def lin_to_db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def noise_power_dbm(bandwidth_hz: float, noise_figure_db: float = 7.0) -> float:
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


def split_tx_power(total_dbm: float, n_active_streams: int) -> float:
    if n_active_streams not in (1, 2):
        raise ValueError(f"number of active streams must be 1 or 2, got {n_active_streams}")
    return total_dbm - 10.0 * math.log10(n_active_streams)


def compute_stream_sinr(co_dbm: float, cross_from_other_stream_dbm: float, noise_dbm: float, rho: float) -> float:
    """SINR (dB) of one stream when ``rho`` of the other stream's leakage is not cancelled."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"inter-stream interference ratio {rho} outside [0, 1]")
    denom = db_to_lin(noise_dbm) + rho * db_to_lin(cross_from_other_stream_dbm)
    return lin_to_db(db_to_lin(co_dbm) / denom)


def _q(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


@lru_cache(maxsize=None)
def calibration_sinr_db(mcs: int) -> float:
    """SINR at which the MCS's spectral efficiency is 85% of Shannon capacity."""
    check_mcs(mcs)
    se = MCS_TABLE2[mcs].spectral_efficiency
    return lin_to_db(2.0 ** (se / SHANNON_FRACTION) - 1.0)


@lru_cache(maxsize=None)
def bler_threshold_db(mcs: int) -> float:
    """Midpoint (BLER 0.5) of the MCS's waterfall curve."""
    z = NormalDist().inv_cdf(1.0 - BLER_TARGET)
    return calibration_sinr_db(mcs) - BLER_SLOPE_DB * z


def bler(effective_sinr_db: float, mcs: int) -> float:
    return _q((effective_sinr_db - bler_threshold_db(mcs)) / BLER_SLOPE_DB)


def harq_combine(state: HarqSoftState, stream: int, new_sinr_db: float) -> float:
    count = state.transmissions.get(stream, 0)
    if count >= MAX_TRANSMISSIONS:
        raise ValueError(f"stream {stream} already used all {MAX_TRANSMISSIONS} transmissions")
    state.accumulated[stream] = state.accumulated.get(stream, 0.0) + db_to_lin(new_sinr_db)
    state.transmissions[stream] = count + 1
    return lin_to_db(state.accumulated[stream])


@lru_cache(maxsize=None)
def _cqi_sinr_floors() -> tuple[float, ...]:
    # SINR at which CQI 1..15 reach the BLER target; non-decreasing in CQI
    return tuple(calibration_sinr_db(cqi_to_mcs(c.index)) for c in CQI_TABLE2[1:])


def compute_cqi(sinr_db: float, mcs_table: int = 2) -> int:
    """Largest CQI whose mapped MCS meets the 10% BLER target at ``sinr_db``.

    BLER is monotone in SINR, so the target holds exactly when the SINR is at
    or above the MCS's calibration point.
    """
    if mcs_table != 2:
        raise ValueError("only MCS table 2 is supported")
    return bisect.bisect_right(_cqi_sinr_floors(), sinr_db)


def compute_ri(config: RiConfig, active_streams: Sequence[int], per_stream_sinr_db: Mapping[int, float]) -> RiDecision:
    """Rank to report after receiving data on ``active_streams``.

    Adaptive mode compares one received stream against ``threshold1_db`` and
    two received streams (each) against ``threshold2_db``.
    """
    streams = sorted(set(active_streams))
    if not streams:
        raise ValueError("RI needs at least one active stream")
    if len(streams) > 2:
        raise ValueError("at most two streams are supported")
    missing = [s for s in streams if s not in per_stream_sinr_db]
    if missing:
        raise ValueError(f"no SINR for active streams {missing}")
    both = len(streams) == 2
    if config.mode is RiMode.FIXED:
        return RiDecision(config.fixed_ri, both)
    if not both:
        ri = 2 if per_stream_sinr_db[streams[0]] >= config.threshold1_db else 1
        return RiDecision(ri, False)
    ri = 2 if all(per_stream_sinr_db[s] >= config.threshold2_db for s in streams) else 1
    return RiDecision(ri, True)


def build_cqi_report(rnti: int, ri_result: RiDecision | int, per_stream_cqi: Mapping[int, int]) -> DlCqiInfo:
    if not per_stream_cqi:
        raise ValueError("a CQI report needs at least one stream")
    ri = ri_result.ri if isinstance(ri_result, RiDecision) else int(ri_result)
    top = max(per_stream_cqi)
    if top > 1 or min(per_stream_cqi) < 0:
        raise ValueError(f"stream indices {sorted(per_stream_cqi)} outside {{0, 1}}")
    wb = tuple(per_stream_cqi.get(i) for i in range(top + 1))
    return DlCqiInfo(rnti, wb, ri)


def decode_tb(tb, effective_sinr_db: float, rng) -> bool:
    """One decoding attempt of ``tb`` (a TB descriptor or a bare MCS); True is ACK."""
    mcs = getattr(tb, "mcs", tb)
    return bool(rng.random() >= bler(effective_sinr_db, mcs))
