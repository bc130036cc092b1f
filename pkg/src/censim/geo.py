"""Location representation, fixed-point wire codec, and grid blurring.

The 16-byte context blob carries two unsigned 32-bit fixed-point coordinates,
the 32-bit interval number, and 4 reserved zero bytes (the extension point
for any future non-GPS context). Blurring snaps a point to a metric grid in
a local equirectangular projection and returns the cell center, so recovered
locations are accurate to the configured cell size and nothing finer.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .errors import DomainError, FormatError, UnsupportedRegionError
from .gaen import Enin

EARTH_RADIUS_M = 6_371_000.0
MAX_GRID_LAT = 85.0
_SCALE = 2**32
_DEG_TO_M = EARTH_RADIUS_M * math.pi / 180.0

BLOB_LEN = 16


@dataclass(frozen=True)
class GeoPoint:
    """WGS-ish latitude/longitude pair in degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise DomainError("coordinates must be finite")
        if not -90.0 <= self.lat <= 90.0:
            raise DomainError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon < 180.0:
            raise DomainError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class ContextBlob:
    """Fixed-layout 16-byte plaintext: lat code, lon code, interval, reserved."""

    lat_code: int
    lon_code: int
    enin: int
    reserved: bytes = b"\x00" * 4

    def __post_init__(self):
        for name, v in (("lat_code", self.lat_code), ("lon_code", self.lon_code),
                        ("enin", self.enin)):
            if not 0 <= v < _SCALE:
                raise DomainError(f"{name} out of u32 range: {v}")
        if len(self.reserved) != 4:
            raise FormatError("reserved field must be 4 bytes")

    def to_bytes(self) -> bytes:
        # Big-endian: [0:4) lat, [4:8) lon, [8:12) enin, [12:16) reserved.
        return struct.pack(">III", self.lat_code, self.lon_code, self.enin) + self.reserved

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ContextBlob":
        if len(raw) != BLOB_LEN:
            raise FormatError(f"context blob must be {BLOB_LEN} bytes, got {len(raw)}")
        lat_code, lon_code, enin = struct.unpack(">III", raw[:12])
        # Reserved bytes are ignored on decode but normalized to zero here.
        return cls(lat_code, lon_code, enin, b"\x00" * 4)


def _fixed_code(value: float, lo: float, span: float) -> int:
    # Exact rational floor of (value - lo) / span * 2^32, clamped to the top code.
    code = int(Fraction(value - lo) * _SCALE / Fraction(span))
    return min(code, _SCALE - 1)


def encode_context(p: GeoPoint, e: Enin) -> ContextBlob:
    """Quantize a point onto the fixed-point wire grid, keeping the interval."""
    return ContextBlob(
        lat_code=_fixed_code(p.lat, -90.0, 180.0),
        lon_code=_fixed_code(p.lon, -180.0, 360.0),
        enin=e.value,
    )


def decode_context(raw: bytes) -> tuple[GeoPoint, Enin]:
    """Inverse of the codec up to one fixed-point step per coordinate."""
    blob = ContextBlob.from_bytes(raw)
    lat = blob.lat_code * (180.0 / _SCALE) - 90.0
    lon = blob.lon_code * (360.0 / _SCALE) - 180.0
    return GeoPoint(lat, lon), Enin(blob.enin)


class DensityClass(Enum):
    URBAN = "urban"
    SUBURBAN = "suburban"
    RURAL = "rural"


# Urban/suburban blur radii; rural has no stated figure and reuses the
# suburban default (see README). Which class applies is caller input.
_DENSITY_CELL_M = {
    DensityClass.URBAN: 200.0,
    DensityClass.SUBURBAN: 1000.0,
    DensityClass.RURAL: 1000.0,
}


def density_cell_size(density: DensityClass) -> float:
    return _DENSITY_CELL_M[density]


@dataclass(frozen=True)
class QuantizerConfig:
    """Grid cell side length in meters."""

    cell_m: float

    def __post_init__(self):
        if not 1.0 <= self.cell_m <= 100_000.0:
            raise DomainError(f"cell size out of range [1, 100000] m: {self.cell_m}")

    @classmethod
    def for_density(cls, density: DensityClass) -> "QuantizerConfig":
        return cls(density_cell_size(density))


@dataclass(frozen=True)
class FGps:
    """Blurred location: center of the grid cell containing the source point."""

    center: GeoPoint
    cell_m: float


def quantize(p: GeoPoint, cfg: QuantizerConfig) -> FGps:
    """Snap a point to its metric grid cell and return the cell center.

    Rows are latitude bands of cell_m meters; the east-west meter scale of a
    row uses the cosine at that row's center latitude, so cell membership is
    a function of the cell alone and re-quantizing a center is a fixed point.
    Cells near the antimeridian are defined on the [-180, 180) chart; centers
    are wrapped back into range there, which breaks the fixed-point property
    only within one cell of the seam.
    """
    if abs(p.lat) > MAX_GRID_LAT:
        raise UnsupportedRegionError(
            f"latitude {p.lat} beyond +/-{MAX_GRID_LAT}; polar band unsupported"
        )
    cell = cfg.cell_m
    row = math.floor(p.lat * _DEG_TO_M / cell)
    center_lat = (row + 0.5) * cell / _DEG_TO_M
    scale_x = math.cos(math.radians(center_lat)) * _DEG_TO_M
    col = math.floor(p.lon * scale_x / cell)
    center_lon = (col + 0.5) * cell / scale_x
    if center_lon >= 180.0:
        center_lon -= 360.0
    elif center_lon < -180.0:
        center_lon += 360.0
    return FGps(GeoPoint(center_lat, center_lon), cell)


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters."""
    la1, lo1, la2, lo2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    s = (
        math.sin((la2 - la1) / 2) ** 2
        + math.cos(la1) * math.cos(la2) * math.sin((lo2 - lo1) / 2) ** 2
    )
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(s)))
