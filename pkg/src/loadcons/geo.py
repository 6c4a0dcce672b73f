"""Great-circle distances, travel times and route bearings."""

from __future__ import annotations

import math

EARTH_RADIUS_MILES = 3958.8
DEFAULT_SPEED_MPH = 50.0
TWO_PI = 2.0 * math.pi

# Direction angles in the mathematical orientation (east = 0, north = pi/2).
_REFERENCE_ANGLES = {
    "east": 0.0,
    "north": 0.5 * math.pi,
    "west": math.pi,
    "south": 1.5 * math.pi,
}


class DegenerateBearingError(ValueError):
    pass


class GeoConfigError(ValueError):
    pass


def haversine_miles(a, b, radius: float = EARTH_RADIUS_MILES) -> float:
    """Great-circle distance between two (lat, lon) pairs in degrees."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2.0 * radius * math.asin(min(1.0, math.sqrt(h)))


def travel_minutes(a, b, speed_mph: float = DEFAULT_SPEED_MPH, radius: float = EARTH_RADIUS_MILES) -> float:
    """Driving time between two terminals (anything with ``.coords``) at constant speed."""
    if not speed_mph > 0:
        raise GeoConfigError(f"speed_mph must be positive, got {speed_mph}")
    return haversine_miles(_coords(a), _coords(b), radius) / speed_mph * 60.0


def _coords(x) -> tuple[float, float]:
    return x.coords if hasattr(x, "coords") else (x[0], x[1])


def compass_bearing(a, b) -> float:
    """Initial great-circle bearing from a to b, radians clockwise from north."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    dlon = lon2 - lon1
    y = math.sin(dlon) * math.cos(lat2)
    x = math.cos(lat1) * math.sin(lat2) - math.sin(lat1) * math.cos(lat2) * math.cos(dlon)
    if abs(x) < 1e-15 and abs(y) < 1e-15:
        raise DegenerateBearingError(f"bearing undefined between coincident points {a} and {b}")
    return normalize_angle(math.atan2(y, x))


def route_bearing(origin, dest, reference: str = "west") -> float:
    """Orientation of the origin->dest route relative to a reference direction.

    Measured in the mathematical (counterclockwise) sense starting at
    ``reference``, normalized to [0, 2*pi). With the default west reference a
    westbound route is 0 and a northbound route is 3*pi/2.
    """
    try:
        ref = _REFERENCE_ANGLES[reference]
    except KeyError:
        raise GeoConfigError(f"unknown reference direction {reference!r}") from None
    theta = compass_bearing(_coords(origin), _coords(dest))
    math_angle = 0.5 * math.pi - theta
    return normalize_angle(math_angle - ref)


def normalize_angle(x: float) -> float:
    x %= TWO_PI
    return 0.0 if x >= TWO_PI else x


def angle_distance(a: float, b: float) -> float:
    """Wrapped difference between two angles, in [0, pi]."""
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)
