"""Walker-delta shell geometry: satellite propagation, link visibility, latency.

All positions are kilometres in an Earth-centred frame; times are seconds.
Orbits are circular two-body, so in-plane motion is a single angular rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

EARTH_RADIUS_KM = 6371.0
MU_KM3_S2 = 398600.4418
LIGHT_SPEED_KM_S = 299792.458
SIDEREAL_DAY_S = 86164.0905
EARTH_ROTATION_RAD_S = 2.0 * math.pi / SIDEREAL_DAY_S

# Link admission rules shared by the per-slot graph builder.
MIN_ELEVATION_DEG = 25.0
ISL_CLEARANCE_KM = 80.0


@dataclass(frozen=True)
class GroundPoint:
    """A point on (or slightly above) the spherical Earth surface."""

    lat_deg: float
    lon_deg: float
    alt_km: float = 0.0

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat_deg}")
        if not -180.0 <= self.lon_deg <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon_deg}")


@dataclass(frozen=True)
class ShellConfig:
    """One Walker-delta shell of identical circular orbits.

    Planes are spaced evenly in right ascension; satellites are spaced
    evenly within a plane.  ``phase_factor`` shifts adjacent planes by
    phase_factor * 360 / (num_orbits * sats_per_orbit) degrees.
    """

    num_orbits: int
    sats_per_orbit: int
    altitude_km: float = 550.0
    inclination_deg: float = 53.0
    phase_factor: int = 1
    earth_radius_km: float = EARTH_RADIUS_KM
    epoch_s: float = 0.0

    def __post_init__(self) -> None:
        if self.num_orbits < 1 or self.sats_per_orbit < 1:
            raise ValueError("shell needs at least one orbit and one satellite")
        if self.altitude_km <= 0.0:
            raise ValueError("altitude must be positive")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise ValueError(f"inclination out of range: {self.inclination_deg}")

    @property
    def total_sats(self) -> int:
        return self.num_orbits * self.sats_per_orbit

    @property
    def semi_major_axis_km(self) -> float:
        return self.earth_radius_km + self.altitude_km


@dataclass(frozen=True)
class SatelliteState:
    """Position snapshot of one satellite at a given epoch."""

    sat_id: int
    orbit_index: int
    slot_index: int
    position: np.ndarray = field(repr=False)
    epoch_s: float = 0.0


def orbital_period(shell: ShellConfig) -> float:
    """Keplerian period 2*pi*sqrt(a^3 / mu) in seconds."""
    a = shell.semi_major_axis_km
    return 2.0 * math.pi * math.sqrt(a**3 / MU_KM3_S2)


def propagate(shell: ShellConfig, t: float, earth_fixed: bool = True) -> list[SatelliteState]:
    """Compute all satellite positions at simulation time ``t``.

    Args:
        shell: shell geometry.
        t: seconds since the shell's epoch.
        earth_fixed: rotate positions into the Earth-fixed frame
            (sidereal rate).  Ground stations live in that frame; pass
            False to inspect raw inertial geometry.

    Returns:
        One SatelliteState per satellite, ordered by sat_id
        (sat_id = orbit_index * sats_per_orbit + slot_index).
    """
    a = shell.semi_major_axis_km
    n = math.sqrt(MU_KM3_S2 / a**3)
    inc = math.radians(shell.inclination_deg)
    cos_i, sin_i = math.cos(inc), math.sin(inc)
    t_total = shell.epoch_s + t

    p_count, s_count = shell.num_orbits, shell.sats_per_orbit
    phase_step = 2.0 * math.pi * shell.phase_factor / (p_count * s_count)
    theta = EARTH_ROTATION_RAD_S * t_total if earth_fixed else 0.0
    cos_t, sin_t = math.cos(theta), math.sin(theta)

    states = []
    for p in range(p_count):
        raan = 2.0 * math.pi * p / p_count
        cos_o, sin_o = math.cos(raan), math.sin(raan)
        for s in range(s_count):
            u = 2.0 * math.pi * s / s_count + p * phase_step + n * t_total
            cos_u, sin_u = math.cos(u), math.sin(u)
            xi = a * (cos_u * cos_o - sin_u * sin_o * cos_i)
            yi = a * (cos_u * sin_o + sin_u * cos_o * cos_i)
            zi = a * sin_u * sin_i
            # Earth-fixed frame: rotate by -theta about the polar axis.
            x = xi * cos_t + yi * sin_t
            y = -xi * sin_t + yi * cos_t
            states.append(
                SatelliteState(
                    sat_id=p * s_count + s,
                    orbit_index=p,
                    slot_index=s,
                    position=np.array([x, y, zi]),
                    epoch_s=t_total,
                )
            )
    return states


def ground_to_ecef(point: GroundPoint, earth_radius_km: float = EARTH_RADIUS_KM) -> np.ndarray:
    """Spherical-Earth conversion of a ground point to Cartesian km."""
    r = earth_radius_km + point.alt_km
    lat = math.radians(point.lat_deg)
    lon = math.radians(point.lon_deg)
    return np.array(
        [
            r * math.cos(lat) * math.cos(lon),
            r * math.cos(lat) * math.sin(lon),
            r * math.sin(lat),
        ]
    )


def great_circle_km(a: GroundPoint, b: GroundPoint, earth_radius_km: float = EARTH_RADIUS_KM) -> float:
    """Great-circle distance between two ground points (haversine)."""
    lat1, lon1 = math.radians(a.lat_deg), math.radians(a.lon_deg)
    lat2, lon2 = math.radians(b.lat_deg), math.radians(b.lon_deg)
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * earth_radius_km * math.asin(min(1.0, math.sqrt(h)))


def propagation_latency(p: np.ndarray, q: np.ndarray) -> float:
    """One-way free-space latency between two positions, in milliseconds."""
    dist = float(np.linalg.norm(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)))
    return dist / LIGHT_SPEED_KM_S * 1000.0


def elevation_deg(user_pos: np.ndarray, sat_pos: np.ndarray) -> float:
    """Elevation of a satellite above the user's local horizon, degrees."""
    user_pos = np.asarray(user_pos, dtype=float)
    d = np.asarray(sat_pos, dtype=float) - user_pos
    norm_d = float(np.linalg.norm(d))
    norm_u = float(np.linalg.norm(user_pos))
    if norm_d == 0.0 or norm_u == 0.0:
        raise ValueError("degenerate geometry for elevation")
    sin_el = float(np.dot(d, user_pos)) / (norm_d * norm_u)
    return math.degrees(math.asin(max(-1.0, min(1.0, sin_el))))


def usl_visible(
    user: GroundPoint,
    sat: SatelliteState,
    min_elevation_deg: float = MIN_ELEVATION_DEG,
    earth_radius_km: float = EARTH_RADIUS_KM,
) -> bool:
    """True when the satellite sits at or above the elevation mask."""
    user_pos = ground_to_ecef(user, earth_radius_km)
    return elevation_deg(user_pos, sat.position) >= min_elevation_deg


def segment_clearance_km(p: np.ndarray, q: np.ndarray) -> float:
    """Minimum distance from the Earth's centre to the segment p-q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d = q - p
    dd = float(np.dot(d, d))
    if dd == 0.0:
        return float(np.linalg.norm(p))
    # Closest point of the segment to the origin, clamped to its ends.
    s = max(0.0, min(1.0, -float(np.dot(p, d)) / dd))
    return float(np.linalg.norm(p + s * d))


def grid_neighbors(orbit: int, slot: int, shell: ShellConfig) -> list[tuple[int, int]]:
    """+Grid neighbour indices of a satellite: in-plane fore/aft plus the
    same slot in both adjacent planes, wrapping at the seams."""
    p_count, s_count = shell.num_orbits, shell.sats_per_orbit
    out: list[tuple[int, int]] = []
    if s_count > 1:
        out.append((orbit, (slot - 1) % s_count))
        out.append((orbit, (slot + 1) % s_count))
    if p_count > 1:
        out.append(((orbit - 1) % p_count, slot))
        out.append(((orbit + 1) % p_count, slot))
    # Tiny shells can fold both directions onto the same satellite.
    seen: set[tuple[int, int]] = set()
    unique = []
    for pair in out:
        if pair != (orbit, slot) and pair not in seen:
            seen.add(pair)
            unique.append(pair)
    return unique


def isl_visible(
    a: SatelliteState,
    b: SatelliteState,
    shell: ShellConfig,
    clearance_km: float = ISL_CLEARANCE_KM,
) -> bool:
    """True when a and b are +Grid neighbours and their line of sight
    clears the Earth sphere by at least ``clearance_km``."""
    if (b.orbit_index, b.slot_index) not in grid_neighbors(a.orbit_index, a.slot_index, shell):
        return False
    return segment_clearance_km(a.position, b.position) >= shell.earth_radius_km + clearance_km
