"""NR modulation/coding tables with 256QAM (MCS table 2 and CQI table 2)."""

from __future__ import annotations

import numbers
from typing import NamedTuple


class McsEntry(NamedTuple):
    index: int
    modulation_order: int
    code_rate_x1024: float
    spectral_efficiency: float


class CqiEntry(NamedTuple):
    index: int
    modulation_order: int
    code_rate_x1024: float
    spectral_efficiency: float


# TS 38.214 Table 5.1.3.1-2 (indices 28..31 are reserved for retransmissions)
MCS_TABLE2: tuple[McsEntry, ...] = tuple(
    McsEntry(i, qm, r, se)
    for i, (qm, r, se) in enumerate(
        [
            (2, 120, 0.2344),
            (2, 193, 0.3770),
            (2, 308, 0.6016),
            (2, 449, 0.8770),
            (2, 602, 1.1758),
            (4, 378, 1.4766),
            (4, 434, 1.6953),
            (4, 490, 1.9141),
            (4, 553, 2.1602),
            (4, 616, 2.4063),
            (4, 658, 2.5703),
            (6, 466, 2.7305),
            (6, 517, 3.0293),
            (6, 567, 3.3223),
            (6, 616, 3.6094),
            (6, 666, 3.9023),
            (6, 719, 4.2129),
            (6, 772, 4.5234),
            (6, 822, 4.8164),
            (6, 873, 5.1152),
            (8, 682.5, 5.3320),
            (8, 711, 5.5547),
            (8, 754, 5.8906),
            (8, 797, 6.2266),
            (8, 841, 6.5703),
            (8, 885, 6.9141),
            (8, 916.5, 7.1602),
            (8, 948, 7.4063),
        ]
    )
)

# TS 38.214 Table 5.2.2.1-3; CQI 0 is "out of range"
CQI_TABLE2: tuple[CqiEntry, ...] = (CqiEntry(0, 0, 0.0, 0.0),) + tuple(
    CqiEntry(i + 1, qm, r, se)
    for i, (qm, r, se) in enumerate(
        [
            (2, 78, 0.1523),
            (2, 193, 0.3770),
            (2, 449, 0.8770),
            (4, 378, 1.4766),
            (4, 490, 1.9141),
            (4, 616, 2.4063),
            (6, 466, 2.7305),
            (6, 567, 3.3223),
            (6, 666, 3.9023),
            (6, 772, 4.5234),
            (6, 873, 5.1152),
            (8, 711, 5.5547),
            (8, 797, 6.2266),
            (8, 885, 6.9141),
            (8, 948, 7.4063),
        ]
    )
)

MAX_MCS = len(MCS_TABLE2) - 1
MAX_CQI = len(CQI_TABLE2) - 1


def _build_cqi_to_mcs() -> tuple[int, ...]:
    mapping = []
    for cqi in CQI_TABLE2:
        best = 0
        for mcs in MCS_TABLE2:
            if mcs.spectral_efficiency <= cqi.spectral_efficiency + 1e-9:
                best = mcs.index
        mapping.append(best)
    return tuple(mapping)


CQI_TO_MCS: tuple[int, ...] = _build_cqi_to_mcs()


def cqi_to_mcs(cqi: int) -> int:
    """Highest MCS whose spectral efficiency does not exceed the CQI's.

    CQI 0 and CQI 1 both map to MCS 0, the most robust entry.
    """
    if not 0 <= cqi <= MAX_CQI:
        raise ValueError(f"CQI {cqi} outside [0, {MAX_CQI}]")
    return CQI_TO_MCS[cqi]


def check_mcs(mcs: int) -> None:
    if isinstance(mcs, bool) or not isinstance(mcs, numbers.Integral) or not 0 <= mcs <= MAX_MCS:
        raise ValueError(f"MCS {mcs!r} outside [0, {MAX_MCS}]")
