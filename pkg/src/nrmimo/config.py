"""Scenario configuration and the ``key = value`` config-file format.

Nested fields use dotted keys, e.g. ``ri.mode = fixed`` or
``gnb_array.rows = 4``. Unknown keys are rejected.
"""

from __future__ import annotations

import configparser
import dataclasses
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

from .antenna import ArrayConfig, ElementPattern
from .channel import ChannelConfig
from .mac import SchedulerMode
from .phy import RiConfig

# (numerology, bandwidth MHz) -> PRBs, TS 38.101-1 Table 5.3.2-1
NR_PRB_TABLE = {
    (0, 5): 25, (0, 10): 52, (0, 15): 79, (0, 20): 106, (0, 25): 133, (0, 30): 160,
    (0, 40): 216, (0, 50): 270,
    (1, 10): 24, (1, 20): 51, (1, 40): 106, (1, 50): 133, (1, 100): 273,
    (2, 20): 24, (2, 40): 51, (2, 100): 135,
}


@dataclass(frozen=True)
class TrafficConfig:
    """Downlink CBR UDP flow; the default rate saturates two streams."""

    packet_bytes: int = 1000
    offered_rate_bps: float = 250e6
    start_s: float = 0.0
    stop_s: Optional[float] = None

    def __post_init__(self):
        if self.packet_bytes < 1:
            raise ValueError("packet_bytes must be >= 1")
        if self.offered_rate_bps < 0:
            raise ValueError("offered_rate_bps must be non-negative")
        if self.start_s < 0 or (self.stop_s is not None and self.stop_s < self.start_s):
            raise ValueError("traffic window must satisfy 0 <= start_s <= stop_s")


def _default_gnb_array() -> ArrayConfig:
    return ArrayConfig(rows=2, cols=2, polarizations=2, element_pattern=ElementPattern.DIRECTIONAL_3GPP)


def _default_ue_array() -> ArrayConfig:
    return ArrayConfig(rows=1, cols=1, polarizations=2, element_pattern=ElementPattern.ISOTROPIC, bearing_deg=180.0)


@dataclass(frozen=True)
class ScenarioConfig:
    distance_m: float = 10.0
    scenario: str = "UMi"
    fc_ghz: float = 3.5
    bandwidth_mhz: float = 20.0
    numerology: int = 0
    n_prb: int = 106
    gnb_power_dbm: float = 30.0
    gnb_height_m: float = 10.0
    ue_height_m: float = 1.5
    gnb_array: ArrayConfig = field(default_factory=_default_gnb_array)
    ue_array: ArrayConfig = field(default_factory=_default_ue_array)
    ri: RiConfig = field(default_factory=RiConfig)
    rho: float = 0.0
    rng_run: int = 1
    sim_duration_s: float = 2.0
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    mcs_table: int = 2
    overhead: float = 0.04
    n_data_sym: int = 12
    noise_figure_db: float = 7.0
    coherence_slots: int = 100
    k_factor_db: float = 10.0
    xpd_mean_los_db: float = 9.0
    xpd_mean_nlos_db: float = 8.0
    xpd_std_db: float = 3.0
    perfect_isolation: bool = False
    cqi_delay_slots: int = 2
    harq_delay_slots: int = 1
    harq_processes: int = 20
    initial_mcs: int = 0
    scheduler_mode: SchedulerMode = SchedulerMode.TDMA
    # (x, y) ground positions of the UEs; empty means one UE at distance_m on +x
    ue_positions: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "scheduler_mode", SchedulerMode(self.scheduler_mode))
        if self.distance_m <= 0:
            raise ValueError("distance_m must be positive")
        if self.mcs_table != 2:
            raise ValueError("only MCS table 2 is supported")
        expected = NR_PRB_TABLE.get((self.numerology, int(self.bandwidth_mhz)))
        if expected is not None and expected != self.n_prb:
            raise ValueError(
                f"n_prb={self.n_prb} inconsistent with {self.bandwidth_mhz} MHz at numerology "
                f"{self.numerology} ({expected} PRBs)"
            )
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must be in [0, 1]")
        if self.rng_run < 0:
            raise ValueError("rng_run must be non-negative")
        if self.sim_duration_s <= 0:
            raise ValueError("sim_duration_s must be positive")
        if self.cqi_delay_slots < 1 or self.harq_delay_slots < 1:
            raise ValueError("feedback delays must be at least one slot")
        if not 1 <= self.harq_processes <= 20:
            raise ValueError("harq_processes must be in [1, 20]")
        if len(self.ue_positions) > 8:
            raise ValueError("at most 8 UEs are supported")
        self.channel_config()  # validates channel knobs

    @property
    def slot_duration_s(self) -> float:
        return 1e-3 / (2**self.numerology)

    @property
    def n_slots(self) -> int:
        return int(round(self.sim_duration_s / self.slot_duration_s))

    def channel_config(self) -> ChannelConfig:
        return ChannelConfig(
            scenario=self.scenario,
            fc_ghz=self.fc_ghz,
            coherence_slots=self.coherence_slots,
            k_factor_db=self.k_factor_db,
            xpd_mean_los_db=self.xpd_mean_los_db,
            xpd_mean_nlos_db=self.xpd_mean_nlos_db,
            xpd_std_db=self.xpd_std_db,
            perfect_isolation=self.perfect_isolation,
        )


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(text: str, current: Any, name: str) -> Any:
    text = text.strip()
    if isinstance(current, bool):
        low = text.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"{name}: expected a boolean, got {text!r}")
    if isinstance(current, enum.Enum):
        return type(current)(text.lower())
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    if name.endswith("ue_positions"):
        if not text:
            return ()
        return tuple(tuple(float(v) for v in pair.split(",")) for pair in text.split(";"))
    if name.endswith("pol_slant_angles"):
        return tuple(float(v) for v in text.split(","))
    if name.endswith("stop_s"):
        return None if text.lower() in ("", "none") else float(text)
    return text


def apply_overrides(config, overrides: Mapping[str, Any]):
    """Return a copy of a (nested) config dataclass with dotted-key overrides applied.

    String values are parsed according to the type of the field they replace.
    """
    nested: dict[str, dict[str, Any]] = {}
    flat: dict[str, Any] = {}
    names = {f.name for f in dataclasses.fields(config)}
    for key, value in overrides.items():
        head, _, rest = key.partition(".")
        if head not in names:
            raise KeyError(f"unknown configuration key {key!r}")
        if rest:
            nested.setdefault(head, {})[rest] = value
        else:
            current = getattr(config, head)
            flat[head] = _coerce(value, current, key) if isinstance(value, str) else value
    for head, sub in nested.items():
        child = getattr(config, head)
        if not dataclasses.is_dataclass(child):
            raise KeyError(f"{head!r} has no nested fields")
        flat[head] = apply_overrides(child, sub)
    return dataclasses.replace(config, **flat)


def load_config_file(path: str | Path) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    text = Path(path).read_text(encoding="utf-8")
    parser.read_string("[scenario]\n" + text)
    return dict(parser["scenario"])
