"""Walker-delta constellation geometry on a spherical Earth.

Circular two-body orbits only. Positions are Earth-centred inertial (ECI),
kilometres, with t = 0 placing satellite (0, 0) on the ascending node of
plane 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

EARTH_RADIUS_KM = 6371.0
MU_KM3_S2 = 398600.4418
EARTH_ROTATION_RAD_S = 7.2921159e-5
SPEED_OF_LIGHT_KM_S = 299792.458


class ConfigurationError(ValueError):
    pass


class ContractViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class ConstellationConfig:
    plane_count: int = 12
    sats_per_plane: int = 24
    altitude: float = 500.0
    inclination: float = 60.0
    beam_half_angle: float = 45.0
    phasing_offset: float = 0.0

    def __post_init__(self):
        if self.plane_count < 2:
            raise ConfigurationError("plane_count must be >= 2")
        if self.sats_per_plane < 3:
            raise ConfigurationError("sats_per_plane must be >= 3")
        if not 0.0 < self.inclination <= 180.0:
            raise ConfigurationError("inclination must be in (0, 180]")
        if not 0.0 < self.beam_half_angle < 90.0:
            raise ConfigurationError("beam_half_angle must be in (0, 90)")
        if self.altitude <= 0.0:
            raise ConfigurationError("altitude must be positive")

    @property
    def n_sats(self) -> int:
        return self.plane_count * self.sats_per_plane

    @property
    def semi_major_axis(self) -> float:
        return EARTH_RADIUS_KM + self.altitude

    @property
    def angular_rate(self) -> float:
        return math.sqrt(MU_KM3_S2 / self.semi_major_axis ** 3)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.angular_rate


PRESETS: dict[str, ConstellationConfig] = {
    "paper-walker-12x24": ConstellationConfig(12, 24, 500.0, 60.0, 45.0),
    "iridium": ConstellationConfig(6, 11, 780.0, 86.4, 45.0),
    "telesat": ConstellationConfig(27, 13, 1015.0, 98.98, 45.0),
    "oneweb": ConstellationConfig(18, 36, 1200.0, 87.9, 45.0),
    "starlink-g1s2": ConstellationConfig(36, 20, 570.0, 70.0, 45.0),
}


@dataclass(frozen=True)
class SatelliteId:
    plane_index: int
    slot_index: int
    sats_per_plane: int = field(default=24, compare=False, repr=False)

    @property
    def flat_id(self) -> int:
        return self.plane_index * self.sats_per_plane + self.slot_index

    @classmethod
    def from_flat(cls, flat_id: int, config: ConstellationConfig) -> "SatelliteId":
        p, s = divmod(flat_id, config.sats_per_plane)
        return cls(p, s, config.sats_per_plane)


def sat_id(config: ConstellationConfig, plane: int, slot: int) -> SatelliteId:
    if not (0 <= plane < config.plane_count and 0 <= slot < config.sats_per_plane):
        raise ContractViolation(f"satellite ({plane},{slot}) outside grid")
    return SatelliteId(plane, slot, config.sats_per_plane)


@dataclass(frozen=True)
class GroundStation:
    name: str
    latitude: float
    longitude: float

    def __post_init__(self):
        if abs(self.latitude) > 90 or abs(self.longitude) > 180:
            raise ConfigurationError(f"ground station {self.name!r} has invalid coordinates")


DEFAULT_GROUND_STATIONS = (
    GroundStation("Dubai", 25.252, 55.280),
    GroundStation("Harbin", 45.750, 126.650),
    GroundStation("Istanbul", 41.019, 28.965),
    GroundStation("Jakarta", -6.174, 106.829),
    GroundStation("Karachi", 24.867, 67.050),
    GroundStation("Moscow", 55.752, 37.616),
    GroundStation("Nairobi", -1.283, 36.817),
    GroundStation("Sanya", 18.243, 109.505),
    GroundStation("Shanghai", 31.109, 121.368),
    GroundStation("Urumqi", 43.800, 87.583),
    GroundStation("Xian", 34.258, 108.929),
)


@dataclass(frozen=True)
class Position:
    x: float
    y: float
    z: float
    epoch: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def _orbital_angles(config: ConstellationConfig, plane, slot, t):
    raan = 2.0 * np.pi * np.asarray(plane) / config.plane_count
    u = (2.0 * np.pi * np.asarray(slot) / config.sats_per_plane
         + np.radians(config.phasing_offset) * np.asarray(plane)
         + config.angular_rate * t)
    return raan, u


def _eci(config, raan, u):
    a = config.semi_major_axis
    inc = math.radians(config.inclination)
    cos_u, sin_u = np.cos(u), np.sin(u)
    cos_o, sin_o = np.cos(raan), np.sin(raan)
    x = a * (cos_o * cos_u - sin_o * sin_u * math.cos(inc))
    y = a * (sin_o * cos_u + cos_o * sin_u * math.cos(inc))
    z = a * sin_u * math.sin(inc)
    return x, y, z


def propagate(config: ConstellationConfig, sat: SatelliteId, t: float) -> Position:
    if t < 0:
        raise ContractViolation("propagate requires t >= 0")
    raan, u = _orbital_angles(config, sat.plane_index, sat.slot_index, t)
    x, y, z = _eci(config, raan, u)
    return Position(float(x), float(y), float(z), float(t))


def all_positions(config: ConstellationConfig, t: float) -> np.ndarray:
    """(N, 3) ECI positions indexed by flat id."""
    flat = np.arange(config.n_sats)
    plane, slot = np.divmod(flat, config.sats_per_plane)
    raan, u = _orbital_angles(config, plane, slot, t)
    return np.stack(_eci(config, raan, u), axis=1)


def isl_distance(a: Position, b: Position) -> float:
    if a.epoch != b.epoch:
        raise ContractViolation(f"epoch mismatch: {a.epoch} vs {b.epoch}")
    return math.dist((a.x, a.y, a.z), (b.x, b.y, b.z))


def grid_neighbors(config: ConstellationConfig, sat: SatelliteId) -> list[SatelliteId]:
    """+Grid neighbours in fixed direction order: slot+1, slot-1, plane+1, plane-1."""
    P, S = config.plane_count, config.sats_per_plane
    p, s = sat.plane_index, sat.slot_index
    return [
        SatelliteId(p, (s + 1) % S, S),
        SatelliteId(p, (s - 1) % S, S),
        SatelliteId((p + 1) % P, s, S),
        SatelliteId((p - 1) % P, s, S),
    ]


def neighbor_table(config: ConstellationConfig) -> np.ndarray:
    """(N, 4) flat-id neighbour table, same direction order as grid_neighbors."""
    P, S = config.plane_count, config.sats_per_plane
    flat = np.arange(config.n_sats)
    p, s = np.divmod(flat, S)
    return np.stack([
        p * S + (s + 1) % S,
        p * S + (s - 1) % S,
        ((p + 1) % P) * S + s,
        ((p - 1) % P) * S + s,
    ], axis=1)


# direction j on one side of a link is REVERSE[j] on the other side
REVERSE_DIRECTION = (1, 0, 3, 2)


def compute_d_max(config: ConstellationConfig) -> float:
    R = EARTH_RADIUS_KM
    a = config.semi_major_axis
    theta = math.radians(config.beam_half_angle)
    if theta >= math.asin(R / a):
        raise ConfigurationError(
            f"beam half-angle {config.beam_half_angle} deg misses the Earth at altitude {config.altitude} km")
    return a * math.cos(theta) - math.sqrt(R * R - (a * math.sin(theta)) ** 2)


def ground_station_eci(gs: GroundStation, t: float) -> np.ndarray:
    lat = math.radians(gs.latitude)
    lon = math.radians(gs.longitude) + EARTH_ROTATION_RAD_S * t
    return EARTH_RADIUS_KM * np.array([math.cos(lat) * math.cos(lon),
                                       math.cos(lat) * math.sin(lon),
                                       math.sin(lat)])


def ground_stations_eci(stations, t: float) -> np.ndarray:
    lat = np.radians([g.latitude for g in stations])
    lon = np.radians([g.longitude for g in stations]) + EARTH_ROTATION_RAD_S * t
    return EARTH_RADIUS_KM * np.stack(
        [np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=1)


def ground_visibility(sat_pos: Position, gs: GroundStation, d_max: float) -> tuple[bool, float]:
    slant = float(np.linalg.norm(sat_pos.as_array() - ground_station_eci(gs, sat_pos.epoch)))
    return slant <= d_max, slant


def slant_ranges(positions: np.ndarray, stations, t: float) -> np.ndarray:
    """(N, G) satellite-to-station distances."""
    gs = ground_stations_eci(stations, t)
    return np.linalg.norm(positions[:, None, :] - gs[None, :, :], axis=2)


def subsatellite_latlon(positions: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Geocentric latitude/longitude (degrees) of the sub-satellite points at time t."""
    r = np.linalg.norm(positions, axis=1)
    lat = np.degrees(np.arcsin(positions[:, 2] / r))
    lon = np.degrees(np.arctan2(positions[:, 1], positions[:, 0]) - EARTH_ROTATION_RAD_S * t)
    lon = (lon + 180.0) % 360.0 - 180.0
    return lat, lon
