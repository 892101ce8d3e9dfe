"""Circular-orbit propagation, Earth-fixed nodes, and elevation-angle visibility.

Satellites fly analytic circular orbits (spherical Earth, no perturbations);
parameter-server nodes (ground stations or high-altitude platforms) are fixed
to the rotating Earth. All positions are expressed in an Earth-centered
inertial frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi

#: Lowest/highest orbital altitude accepted by default validation (LEO band).
LEO_ALTITUDE_RANGE = (5.0e5, 2.0e6)


@dataclass(frozen=True)
class BodyConstants:
    """Physical constants of the central body and signal propagation."""

    gm: float = 3.986004418e14           # m^3/s^2
    earth_radius: float = 6.371e6        # m
    earth_rotation_rate: float = 7.2921159e-5  # rad/s, sidereal
    light_speed: float = 2.99792458e8    # m/s

    def __post_init__(self) -> None:
        for name in ("gm", "earth_radius", "earth_rotation_rate", "light_speed"):
            if getattr(self, name) <= 0:
                raise ValueError(f"BodyConstants.{name} must be strictly positive")

    @property
    def sidereal_day(self) -> float:
        return TWO_PI / self.earth_rotation_rate


EARTH = BodyConstants()


def _normalize_angle(a: float) -> float:
    return float(a) % TWO_PI


@dataclass(frozen=True)
class OrbitSpec:
    """One circular orbital plane with equally spaced satellite slots."""

    altitude: float                      # m above the surface
    inclination: float                   # rad
    raan: float = 0.0                    # rad, ascending-node longitude
    num_sats: int = 1
    phase_offset: float = 0.0            # rad, in-plane offset of slot 0

    def __post_init__(self) -> None:
        lo, hi = LEO_ALTITUDE_RANGE
        if not lo <= self.altitude <= hi:
            raise ValueError(
                f"orbit altitude {self.altitude} m outside LEO range [{lo}, {hi}] m")
        if self.num_sats < 1:
            raise ValueError("orbit must hold at least one satellite")
        object.__setattr__(self, "inclination", _normalize_angle(self.inclination))
        object.__setattr__(self, "raan", _normalize_angle(self.raan))
        object.__setattr__(self, "phase_offset", _normalize_angle(self.phase_offset))


@dataclass(frozen=True)
class ConstellationSpec:
    """Ordered collection of orbits; Walker-delta when built via :func:`walker_delta`."""

    orbits: tuple[OrbitSpec, ...]
    epoch_time_origin: float = 0.0       # s, when every slot sits at its phase offset

    def __post_init__(self) -> None:
        object.__setattr__(self, "orbits", tuple(self.orbits))
        if len(self.orbits) < 1:
            raise ValueError("constellation needs at least one orbit")

    @property
    def num_orbits(self) -> int:
        return len(self.orbits)

    @property
    def num_sats(self) -> int:
        return sum(o.num_sats for o in self.orbits)

    def satellites(self) -> list["SatelliteId"]:
        """All satellite ids in ascending (orbit_index, slot_index) order."""
        return [SatelliteId(o, s)
                for o, spec in enumerate(self.orbits)
                for s in range(spec.num_sats)]

    def satellite_index(self, sat: "SatelliteId") -> int:
        """Flat index of `sat` in :meth:`satellites` order."""
        self.validate_sat(sat)
        return sum(o.num_sats for o in self.orbits[:sat.orbit_index]) + sat.slot_index

    def validate_sat(self, sat: "SatelliteId") -> None:
        if not 0 <= sat.orbit_index < self.num_orbits:
            raise LookupError(f"no orbit {sat.orbit_index} in constellation")
        if not 0 <= sat.slot_index < self.orbits[sat.orbit_index].num_sats:
            raise LookupError(
                f"no slot {sat.slot_index} in orbit {sat.orbit_index} "
                f"({self.orbits[sat.orbit_index].num_sats} satellites)")


def walker_delta(num_orbits: int, sats_per_orbit: int, altitude: float,
                 inclination: float, phase_offset_step: float = 0.0) -> ConstellationSpec:
    """Build a Walker-delta constellation: RAANs evenly spaced over 360 deg.

    `phase_offset_step` is the extra in-plane phase added per orbit index
    (0 keeps all planes in phase).
    """
    orbits = tuple(
        OrbitSpec(altitude=altitude, inclination=inclination,
                  raan=o * TWO_PI / num_orbits,
                  num_sats=sats_per_orbit,
                  phase_offset=o * phase_offset_step)
        for o in range(num_orbits))
    return ConstellationSpec(orbits=orbits)


@dataclass(frozen=True, order=True)
class SatelliteId:
    orbit_index: int
    slot_index: int

    def __post_init__(self) -> None:
        if self.orbit_index < 0 or self.slot_index < 0:
            raise ValueError("satellite indices are 0-based and non-negative")

    @property
    def label(self) -> str:
        return f"sat-{self.orbit_index}-{self.slot_index}"


@dataclass(frozen=True)
class NodeSpec:
    """A parameter-server platform: ground station or high-altitude platform."""

    id: str
    role: str = "HAP"                    # "GS" or "HAP"
    latitude: float = 0.0                # rad
    longitude: float = 0.0               # rad
    altitude: float = 2.0e4              # m; 0 is valid for a GS
    min_elevation: float = math.radians(10.0)  # rad

    def __post_init__(self) -> None:
        if self.role not in ("GS", "HAP"):
            raise ValueError(f"node role must be GS or HAP, got {self.role!r}")
        if not -math.pi / 2 <= self.latitude <= math.pi / 2:
            raise ValueError("latitude must lie in [-pi/2, pi/2]")
        if self.altitude < 0:
            raise ValueError("node altitude must be non-negative")
        if not 0 <= self.min_elevation < math.pi / 2:
            raise ValueError("min_elevation must lie in [0, pi/2)")


@dataclass(frozen=True)
class EciPosition:
    """Earth-centered inertial position (m)."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError("position components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def distance_to(self, other: "EciPosition") -> float:
        return math.sqrt((self.x - other.x) ** 2 + (self.y - other.y) ** 2
                         + (self.z - other.z) ** 2)


class VisibilityWindow(NamedTuple):
    sat: SatelliteId
    enter: float
    exit: float


def orbital_velocity(constants: BodyConstants, altitude: float) -> float:
    """Circular-orbit speed sqrt(GM / (R_E + h)) in m/s."""
    if altitude <= 0:
        raise ValueError(f"altitude must be positive, got {altitude}")
    return math.sqrt(constants.gm / (constants.earth_radius + altitude))


def orbital_period(constants: BodyConstants, altitude: float) -> float:
    """Circular-orbit period 2*pi*(R_E + h) / v in s."""
    r = constants.earth_radius + altitude
    return TWO_PI * r / orbital_velocity(constants, altitude)


def true_anomaly(spec: ConstellationSpec, sat: SatelliteId, t: float,
                 constants: BodyConstants = EARTH) -> float:
    """In-plane phase angle of `sat` at time t, in [0, 2*pi)."""
    spec.validate_sat(sat)
    orbit = spec.orbits[sat.orbit_index]
    period = orbital_period(constants, orbit.altitude)
    nu = (TWO_PI * sat.slot_index / orbit.num_sats
          + orbit.phase_offset
          + TWO_PI * (t - spec.epoch_time_origin) / period)
    return _normalize_angle(nu)


def _plane_rotation(orbit: OrbitSpec) -> np.ndarray:
    """Rotation from in-plane (x toward ascending node) to ECI axes."""
    co, so = math.cos(orbit.raan), math.sin(orbit.raan)
    ci, si = math.cos(orbit.inclination), math.sin(orbit.inclination)
    # Rz(raan) @ Rx(inclination) applied to [cos(nu), sin(nu), 0]
    return np.array([
        [co, -so * ci, so * si],
        [so, co * ci, -co * si],
        [0.0, si, ci],
    ])


def satellite_positions(spec: ConstellationSpec, sat: SatelliteId,
                        times: np.ndarray,
                        constants: BodyConstants = EARTH) -> np.ndarray:
    """(N, 3) ECI positions of one satellite at the given times."""
    spec.validate_sat(sat)
    orbit = spec.orbits[sat.orbit_index]
    r = constants.earth_radius + orbit.altitude
    period = orbital_period(constants, orbit.altitude)
    t = np.asarray(times, dtype=float)
    nu = (TWO_PI * sat.slot_index / orbit.num_sats
          + orbit.phase_offset
          + TWO_PI * (t - spec.epoch_time_origin) / period)
    plane = np.stack([r * np.cos(nu), r * np.sin(nu), np.zeros_like(nu)], axis=-1)
    return plane @ _plane_rotation(orbit).T


def satellite_position(spec: ConstellationSpec, sat: SatelliteId, t: float,
                       constants: BodyConstants = EARTH) -> EciPosition:
    """ECI position of `sat` at time t."""
    p = satellite_positions(spec, sat, np.array([t]), constants)[0]
    return EciPosition(float(p[0]), float(p[1]), float(p[2]))


def node_positions(constants: BodyConstants, node: NodeSpec,
                   times: np.ndarray) -> np.ndarray:
    """(N, 3) ECI positions of an Earth-fixed node at the given times."""
    t = np.asarray(times, dtype=float)
    r = constants.earth_radius + node.altitude
    lon = node.longitude + constants.earth_rotation_rate * t
    clat = math.cos(node.latitude)
    return np.stack([
        r * clat * np.cos(lon),
        r * clat * np.sin(lon),
        np.full_like(t, r * math.sin(node.latitude)),
    ], axis=-1)


def node_position(constants: BodyConstants, node: NodeSpec, t: float) -> EciPosition:
    """ECI position of an Earth-fixed node at time t (spherical Earth)."""
    p = node_positions(constants, node, np.array([t]))[0]
    return EciPosition(float(p[0]), float(p[1]), float(p[2]))


def is_visible(sat_pos: EciPosition, node_pos: EciPosition,
               min_elevation: float) -> bool:
    """True iff the satellite stands at least `min_elevation` above the node's horizon.

    Equivalent to: angle(zenith, node->sat) <= pi/2 - min_elevation, with the
    node's zenith along its own position vector.
    """
    rg = node_pos.as_array()
    rel = sat_pos.as_array() - rg
    ng = np.linalg.norm(rg)
    nr = np.linalg.norm(rel)
    if ng == 0.0 or nr == 0.0:
        raise ValueError("visibility needs non-zero node and relative vectors")
    cos_angle = float(np.dot(rg, rel) / (ng * nr))
    angle = math.acos(min(1.0, max(-1.0, cos_angle)))
    return angle <= math.pi / 2 - min_elevation


def _visible_mask(sat_pos: np.ndarray, node_pos: np.ndarray,
                  min_elevation: float) -> np.ndarray:
    """Vectorized is_visible over (N, 3) position arrays."""
    rel = sat_pos - node_pos
    dot = np.einsum("ij,ij->i", node_pos, rel)
    norms = np.linalg.norm(node_pos, axis=1) * np.linalg.norm(rel, axis=1)
    cos_angle = np.clip(dot / norms, -1.0, 1.0)
    return np.arccos(cos_angle) <= math.pi / 2 - min_elevation


def _bisect_boundary(spec: ConstellationSpec, sat: SatelliteId, node: NodeSpec,
                     t_lo: float, t_hi: float, constants: BodyConstants,
                     tol: float = 1e-3) -> float:
    """Refine a visibility transition inside (t_lo, t_hi] to `tol` seconds."""
    lo_state = is_visible(satellite_position(spec, sat, t_lo, constants),
                          node_position(constants, node, t_lo), node.min_elevation)
    while t_hi - t_lo > tol:
        mid = 0.5 * (t_lo + t_hi)
        state = is_visible(satellite_position(spec, sat, mid, constants),
                           node_position(constants, node, mid), node.min_elevation)
        if state == lo_state:
            t_lo = mid
        else:
            t_hi = mid
    return 0.5 * (t_lo + t_hi)


def visibility_windows(spec: ConstellationSpec, node: NodeSpec,
                       t_start: float, t_end: float, step: float = 10.0,
                       constants: BodyConstants = EARTH) -> list[VisibilityWindow]:
    """Maximal contact intervals of every satellite with `node`, sorted by entry.

    Contacts are detected by sampling every `step` seconds and boundaries are
    refined by bisection to 1 ms. Windows are clipped to [t_start, t_end].
    """
    if t_start >= t_end:
        raise ValueError("t_start must precede t_end")
    if step <= 0:
        raise ValueError("step must be positive")
    times = np.arange(t_start, t_end, step)
    if times[-1] < t_end:
        times = np.append(times, t_end)
    node_pos = node_positions(constants, node, times)
    windows: list[VisibilityWindow] = []
    for sat in spec.satellites():
        mask = _visible_mask(satellite_positions(spec, sat, times, constants),
                             node_pos, node.min_elevation)
        if not mask.any():
            continue
        changes = np.flatnonzero(mask[1:] != mask[:-1])
        bounds = []
        for i in changes:
            bounds.append(_bisect_boundary(spec, sat, node,
                                           float(times[i]), float(times[i + 1]),
                                           constants))
        if mask[0]:
            bounds.insert(0, t_start)
        if mask[-1]:
            bounds.append(t_end)
        for enter, exit_ in zip(bounds[0::2], bounds[1::2]):
            windows.append(VisibilityWindow(sat, enter, exit_))
    windows.sort(key=lambda w: (w.enter, w.sat))
    return windows


def next_visit_time(spec: ConstellationSpec, sat: SatelliteId, node: NodeSpec,
                    t: float, step: float = 10.0,
                    constants: BodyConstants = EARTH) -> float | None:
    """Earliest t' >= t when `sat` sees `node`; None if no contact within
    one orbital period plus one sidereal day."""
    spec.validate_sat(sat)
    if is_visible(satellite_position(spec, sat, t, constants),
                  node_position(constants, node, t), node.min_elevation):
        return t
    orbit = spec.orbits[sat.orbit_index]
    horizon = t + orbital_period(constants, orbit.altitude) + constants.sidereal_day
    times = np.arange(t, horizon + step, step)
    mask = _visible_mask(satellite_positions(spec, sat, times, constants),
                         node_positions(constants, node, times),
                         node.min_elevation)
    hits = np.flatnonzero(mask)
    if hits.size == 0:
        return None
    i = int(hits[0])
    if i == 0:
        return float(times[0])
    return _bisect_boundary(spec, sat, node, float(times[i - 1]), float(times[i]),
                            constants)


def intra_orbit_neighbors(spec: ConstellationSpec,
                          sat: SatelliteId) -> tuple[SatelliteId, SatelliteId]:
    """Ring neighbors (slot-1, slot+1) of `sat` within its own orbit."""
    spec.validate_sat(sat)
    n = spec.orbits[sat.orbit_index].num_sats
    if n < 3:
        raise ValueError(f"orbit {sat.orbit_index} has {n} satellites; "
                         "a ring needs at least 3 for distinct neighbors")
    return (SatelliteId(sat.orbit_index, (sat.slot_index - 1) % n),
            SatelliteId(sat.orbit_index, (sat.slot_index + 1) % n))
