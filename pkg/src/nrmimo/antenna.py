"""Dual-polarized uniform planar arrays split into per-polarization subarrays.

Each polarization of a planar array forms one subarray partition driven by a
single RF chain, so a P=2 array carries up to two spatial streams. Elements
sit on a rectangular lattice in the array's local y-z plane with boresight
along local +x; element ``k`` of a partition lives at column ``k // M`` and
row ``k % M`` (column-major).

Angles follow the usual spherical convention: ``theta`` is the zenith
(inclination) angle in [0, 180] with 90 meaning the horizon, and ``phi`` is
the azimuth measured from +x.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

DIRECTIONAL_MAX_GAIN_DBI = 8.0
_HPBW_DEG = 65.0
_MAX_ATTENUATION_DB = 30.0


class ElementPattern(str, enum.Enum):
    ISOTROPIC = "isotropic"
    DIRECTIONAL_3GPP = "directional3gpp"


@dataclass(frozen=True)
class ArrayConfig:
    """Geometry and orientation of one dual- or single-polarized panel.

    ``rows`` is the number of same-polarization elements per column (M) and
    ``cols`` the number of columns (N). Spacings are in carrier wavelengths.
    ``pol_slant_angles`` defaults to (+45, -45) for P=2 and (0,) for P=1.
    """

    rows: int = 1
    cols: int = 1
    polarizations: int = 2
    dv: float = 0.5
    dh: float = 0.5
    element_pattern: ElementPattern = ElementPattern.ISOTROPIC
    bearing_deg: float = 0.0
    downtilt_deg: float = 0.0
    pol_slant_angles: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive")
        if self.polarizations not in (1, 2):
            raise ValueError("polarizations must be 1 or 2")
        if not (self.dv > 0 and self.dh > 0):
            raise ValueError("element spacings must be strictly positive")
        object.__setattr__(self, "element_pattern", ElementPattern(self.element_pattern))
        slants = self.pol_slant_angles
        if slants is None:
            slants = (45.0, -45.0) if self.polarizations == 2 else (0.0,)
        slants = tuple(float(s) for s in slants)
        if len(slants) != self.polarizations:
            raise ValueError(
                f"expected {self.polarizations} slant angles, got {len(slants)}"
            )
        object.__setattr__(self, "pol_slant_angles", slants)

    @property
    def elements_per_partition(self) -> int:
        return self.rows * self.cols

    @property
    def rotation(self) -> np.ndarray:
        """Local-to-global rotation: bearing about z after downtilt about y."""
        a = math.radians(self.bearing_deg)
        b = math.radians(self.downtilt_deg)
        rz = np.array([[math.cos(a), -math.sin(a), 0.0], [math.sin(a), math.cos(a), 0.0], [0.0, 0.0, 1.0]])
        ry = np.array([[math.cos(b), 0.0, math.sin(b)], [0.0, 1.0, 0.0], [-math.sin(b), 0.0, math.cos(b)]])
        return rz @ ry


@dataclass(frozen=True, order=True)
class BeamId:
    """Steering direction quantized to 0.01 degree.

    ``elevation_deg`` is the zenith angle, in [0, 180].
    """

    azimuth_deg: float
    elevation_deg: float

    @classmethod
    def from_angles(cls, azimuth_deg: float, elevation_deg: float) -> "BeamId":
        az = round(wrap_azimuth(azimuth_deg), 2)
        if az >= 180.0:
            az = -180.0
        el = round(min(max(elevation_deg, 0.0), 180.0), 2)
        return cls(az, el)


@dataclass(frozen=True)
class BeamConfId:
    """The per-stream beams a gNB uses towards one UE (at most two streams)."""

    beam_per_stream: tuple[Optional[BeamId], ...]

    def __post_init__(self):
        beams = tuple(self.beam_per_stream)
        if not 1 <= len(beams) <= 2:
            raise ValueError("a beam configuration holds one or two streams")
        if all(b is None for b in beams):
            raise ValueError("at least one stream beam must be present")
        if len(beams) == 1:
            beams = beams + (None,)
        object.__setattr__(self, "beam_per_stream", beams)


@dataclass(frozen=True, eq=False)
class SubarrayPartition:
    partition_index: int
    pol_slant_deg: float
    num_elements: int
    weights: np.ndarray = field(repr=False)

    def with_weights(self, weights) -> "SubarrayPartition":
        w = np.asarray(weights, dtype=complex)
        if w.shape != (self.num_elements,):
            raise ValueError(f"expected {self.num_elements} weights, got shape {w.shape}")
        return replace(self, weights=w)


def wrap_azimuth(phi_deg: float) -> float:
    return (phi_deg + 180.0) % 360.0 - 180.0


def build_subarrays(config: ArrayConfig) -> list[SubarrayPartition]:
    n = config.elements_per_partition
    w = np.full(n, 1.0 / math.sqrt(n), dtype=complex)
    return [
        SubarrayPartition(i, slant, n, w.copy())
        for i, slant in enumerate(config.pol_slant_angles)
    ]


def element_positions(config: ArrayConfig) -> np.ndarray:
    """(K, 3) local element coordinates of one partition, in wavelengths."""
    k = np.arange(config.elements_per_partition)
    col, row = np.divmod(k, config.rows)
    return np.column_stack([np.zeros(k.size), col * config.dh, row * config.dv])


def direction_vector(theta_deg: float, phi_deg: float) -> np.ndarray:
    t = math.radians(theta_deg)
    p = math.radians(phi_deg)
    return np.array([math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t)])


def vector_angles(u: np.ndarray) -> tuple[float, float]:
    """Zenith and azimuth (degrees) of a vector."""
    x, y, z = u / np.linalg.norm(u)
    theta = math.degrees(math.acos(min(max(z, -1.0), 1.0)))
    phi = math.degrees(math.atan2(y, x))
    return theta, phi


def to_local(config: ArrayConfig, theta_deg: float, phi_deg: float) -> tuple[float, float]:
    u = config.rotation.T @ direction_vector(theta_deg, phi_deg)
    return vector_angles(u)


def element_gain_db(theta_deg: float, phi_deg: float, pattern: ElementPattern) -> float:
    """Element power gain (dBi) for a local direction."""
    if ElementPattern(pattern) is ElementPattern.ISOTROPIC:
        return 0.0
    phi = wrap_azimuth(phi_deg)
    a_v = -min(12.0 * ((theta_deg - 90.0) / _HPBW_DEG) ** 2, _MAX_ATTENUATION_DB)
    a_h = -min(12.0 * (phi / _HPBW_DEG) ** 2, _MAX_ATTENUATION_DB)
    return DIRECTIONAL_MAX_GAIN_DBI - min(-(a_v + a_h), _MAX_ATTENUATION_DB)


def element_field(theta_deg, phi_deg, slant_deg, pattern) -> tuple[float, float]:
    """Vertical/horizontal field components of a slanted element (model-2)."""
    amp = math.sqrt(10.0 ** (element_gain_db(theta_deg, phi_deg, pattern) / 10.0))
    zeta = math.radians(slant_deg)
    return amp * math.cos(zeta), amp * math.sin(zeta)


def _phases(config: ArrayConfig, direction: BeamId) -> np.ndarray:
    theta, phi = to_local(config, direction.elevation_deg, direction.azimuth_deg)
    u = direction_vector(theta, phi)
    return 2.0 * math.pi * (element_positions(config) @ u)


def steering_weights(partition: SubarrayPartition, direction: BeamId, config: ArrayConfig) -> np.ndarray:
    """Unit-norm weights that phase-align every element towards ``direction``."""
    if partition.num_elements != config.elements_per_partition:
        raise ValueError("partition does not belong to this array configuration")
    psi = _phases(config, direction)
    return np.exp(1j * psi) / math.sqrt(partition.num_elements)


def array_gain(partition: SubarrayPartition, weights, direction: BeamId, config: ArrayConfig) -> float:
    """Beamformed gain (dB) of the partition towards ``direction``, element gain included."""
    w = np.asarray(weights, dtype=complex)
    psi = _phases(config, direction)
    af = abs(np.vdot(w, np.exp(1j * psi)))
    theta, phi = to_local(config, direction.elevation_deg, direction.azimuth_deg)
    return 20.0 * math.log10(max(af, 1e-15)) + element_gain_db(theta, phi, config.element_pattern)


def steer(partitions: Sequence[SubarrayPartition], direction: BeamId, config: ArrayConfig) -> list[SubarrayPartition]:
    return [p.with_weights(steering_weights(p, direction, config)) for p in partitions]
