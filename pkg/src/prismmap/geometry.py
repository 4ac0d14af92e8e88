"""Spherical and projective math for prism-map faces.

Conventions (fixed here, used everywhere else in the package):

* longitude is measured in radians in [-pi, pi), latitude in [-pi/2, pi/2];
  at the poles the longitude is canonicalized to 0.
* a 3D direction is (cos(lat)*cos(lon), cos(lat)*sin(lon), sin(lat)),
  i.e. +x is longitude 0 on the equator and +z is straight up.
* face k of an n-gonal prism map looks along heading k * 2*pi/n; within a
  face, columns advance toward increasing longitude and rows advance
  downward toward decreasing latitude, so faces read like undistorted
  crops of the flat panorama.

All functions broadcast over numpy arrays; everything is pure and
stateless, so concurrent use needs no locking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AspectRatioError, InvalidFovError, InvalidPolygonError

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi


def normalize_longitude(lon):
    """Wrap longitude(s) into [-pi, pi); pi itself maps to -pi."""
    return np.mod(lon + math.pi, TWO_PI) - math.pi


def central_angle_deg(n: int) -> float:
    """Angle in degrees between consecutive face headings of an n-gon."""
    if n < 3:
        raise InvalidPolygonError(f"prism base needs at least 3 sides, got {n}")
    return 360.0 / n


@dataclass(frozen=True)
class SphericalCoord:
    """Point on the unit sphere as (longitude, latitude) in radians."""

    longitude: float
    latitude: float

    def __post_init__(self):
        lat = min(max(float(self.latitude), -HALF_PI), HALF_PI)
        lon = 0.0 if abs(lat) == HALF_PI else float(normalize_longitude(self.longitude))
        object.__setattr__(self, "longitude", lon)
        object.__setattr__(self, "latitude", lat)


@dataclass(frozen=True)
class Direction:
    """Unit-norm 3-vector; +x = (lon 0, lat 0), +z = north pole."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        norm = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"direction must be unit-norm, |v| = {norm!r}")


@dataclass(frozen=True)
class FaceGeometry:
    """Orientation of one lateral face: side count, FOV, and face index."""

    n: int
    fov_deg: float
    face_index: int

    def __post_init__(self):
        if self.n < 3:
            raise InvalidPolygonError(f"prism base needs at least 3 sides, got {self.n}")
        if not 0.0 < self.fov_deg < 180.0:
            raise InvalidFovError(
                f"field of view must be in (0, 180) degrees, got {self.fov_deg}"
            )
        if not 0 <= self.face_index < self.n:
            raise ValueError(f"face index {self.face_index} out of range [0, {self.n})")

    @property
    def heading(self) -> float:
        """Radians; face 0 looks along longitude 0, face k along k * 2*pi/n."""
        return self.face_index * (TWO_PI / self.n)


# ---------------------------------------------------------------------------
# face pixels <-> sphere
# ---------------------------------------------------------------------------


def tangent_offsets(indices, face_size: int, fov_deg: float):
    """Tangent-plane offsets of pixel centers: (2*(i+0.5)/N - 1) * tan(fov/2)."""
    if not 0.0 < fov_deg < 180.0:
        raise InvalidFovError(f"field of view must be in (0, 180) degrees, got {fov_deg}")
    t = math.tan(math.radians(fov_deg) / 2.0)
    u = (np.asarray(indices, dtype=np.float64) + 0.5) / face_size
    return (2.0 * u - 1.0) * t


def face_grid_lonlat(face_size: int, geom: FaceGeometry):
    """(longitude, latitude) arrays of shape (N, N) for every pixel center.

    Row 0 is the top of the face (highest latitude), column 0 the left
    edge (lowest longitude relative to the heading).
    """
    a = tangent_offsets(np.arange(face_size), face_size, geom.fov_deg)
    b = -tangent_offsets(np.arange(face_size), face_size, geom.fov_deg)
    aa, bb = np.meshgrid(a, b)  # aa varies along columns, bb along rows
    lon = normalize_longitude(geom.heading + np.arctan2(aa, 1.0))
    lat = np.arcsin(bb / np.sqrt(1.0 + aa * aa + bb * bb))
    return lon, lat


def face_pixel_to_spherical(i: int, j: int, face_size: int, geom: FaceGeometry) -> SphericalCoord:
    """Sphere point seen by face pixel (column i, row j)."""
    if not (0 <= i < face_size and 0 <= j < face_size):
        raise ValueError(f"pixel ({i}, {j}) outside {face_size}x{face_size} face")
    a = float(tangent_offsets(i, face_size, geom.fov_deg))
    b = -float(tangent_offsets(j, face_size, geom.fov_deg))
    lon = geom.heading + math.atan2(a, 1.0)
    lat = math.asin(b / math.sqrt(1.0 + a * a + b * b))
    return SphericalCoord(lon, lat)


# ---------------------------------------------------------------------------
# sphere <-> equirectangular pixels
# ---------------------------------------------------------------------------


def lonlat_to_equirect(lon, lat, width: int, height: int):
    """Continuous pixel coordinates of sphere points in a 2:1 panorama.

    x = (lon/2pi + 0.5) * W in [0, W); y = (0.5 - lat/pi) * H in [0, H].
    """
    if width != 2 * height:
        raise AspectRatioError(width, height)
    x = (np.asarray(lon) / TWO_PI + 0.5) * width
    y = (0.5 - np.asarray(lat) / math.pi) * height
    return x, y


def spherical_to_equirect(coord: SphericalCoord, width: int, height: int) -> tuple[float, float]:
    """Scalar wrapper of :func:`lonlat_to_equirect`."""
    x, y = lonlat_to_equirect(coord.longitude, coord.latitude, width, height)
    return float(x), float(y)


# ---------------------------------------------------------------------------
# sphere <-> 3D directions
# ---------------------------------------------------------------------------


def lonlat_to_xyz(lon, lat):
    """Unit direction vectors, stacked on the last axis. Broadcasts."""
    lon, lat = np.broadcast_arrays(
        np.asarray(lon, dtype=np.float64), np.asarray(lat, dtype=np.float64)
    )
    cos_lat = np.cos(lat)
    return np.stack([cos_lat * np.cos(lon), cos_lat * np.sin(lon), np.sin(lat)], axis=-1)


def xyz_to_lonlat(xyz):
    """Inverse of :func:`lonlat_to_xyz`; pole longitudes come out as 0."""
    xyz = np.asarray(xyz, dtype=np.float64)
    lon = normalize_longitude(np.arctan2(xyz[..., 1], xyz[..., 0]))
    lat = np.arcsin(np.clip(xyz[..., 2], -1.0, 1.0))
    return lon, lat


def spherical_to_direction(coord: SphericalCoord) -> Direction:
    v = lonlat_to_xyz(coord.longitude, coord.latitude)
    return Direction(float(v[0]), float(v[1]), float(v[2]))


def direction_to_spherical(d: Direction) -> SphericalCoord:
    lon, lat = xyz_to_lonlat(np.array([d.x, d.y, d.z]))
    return SphericalCoord(float(lon), float(lat))


# ---------------------------------------------------------------------------
# coverage
# ---------------------------------------------------------------------------


def seam_overlap_deg(n: int, fov_deg: float) -> float:
    """Angular overlap between adjacent faces at the equator: fov - 360/n."""
    return fov_deg - central_angle_deg(n)


def equator_coverage(n: int, fov_deg: float) -> tuple[bool, float]:
    """Whether n faces at this FOV cover the whole equator, and the seam overlap.

    Face k spans longitudes [heading_k - fov/2, heading_k + fov/2] at
    latitude 0, so the union covers [-pi, pi) exactly when fov >= 360/n.
    """
    overlap = seam_overlap_deg(n, fov_deg)
    return overlap >= 0.0, overlap
