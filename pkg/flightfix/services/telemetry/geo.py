import math
from typing import Optional, Tuple

from flightfix.services.telemetry.models import FlightSample


# WGS84 equatorial radius; equirectangular projection is adequate over a few km
EARTH_RADIUS_M = 6378137.0

Geodetic = Tuple[float, float, float]


def geodetic_to_enu(lat: float, lon: float, alt: float, origin: Geodetic) -> Tuple[float, float, float]:
    lat0, lon0, alt0 = origin
    east = math.radians(lon - lon0) * EARTH_RADIUS_M * math.cos(math.radians(lat0))
    north = math.radians(lat - lat0) * EARTH_RADIUS_M
    return east, north, alt - alt0


class GeoIngest:
    """Converts geodetic log samples into local-frame FlightSamples.

    The first sample seen fixes the ENU origin unless one is given.
    """


    def __init__(self, origin: Optional[Geodetic] = None):
        self.origin = origin


    def convert(self, t: float, lat: float, lon: float, alt: float, vel=(0.0, 0.0, 0.0)) -> FlightSample:
        if self.origin is None:
            self.origin = (lat, lon, alt)
        east, north, up = geodetic_to_enu(lat, lon, alt, self.origin)
        return FlightSample(t=t, pos=(east, north, up), vel=tuple(vel), alt=up)
