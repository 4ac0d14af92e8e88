"""Synthetic photosphere generation for tests, demos and benchmarks.

Fiducials are solid pure-color squares defined in a tangent frame on the
sphere: painted into the equirectangular source by inverse projection,
they come back as crisp axis-aligned squares in a prism-map face whose
heading matches, while appearing small and warped in the raw 2:1 image.
This mirrors, at desk scale, why direct cognition of the flat panorama
underperforms face-based processing.
"""

from __future__ import annotations

import math

import numpy as np

from . import geometry
from .metrics import ExperimentSample, TruthSet
from .reproject import EquirectImage, validate_photosphere

FIDUCIAL_RGB = {
    "red": (255, 0, 0),
    "green": (0, 255, 0),
    "blue": (0, 0, 255),
}

#: Tangent-plane half sizes used by the bundled corpus. The small value is
#: chosen so the warped equirect footprint stays under the 16 px detector
#: window while an octagonal fov-52 face at 512 px renders it ~23 px wide.
CORPUS_SMALL_HALF = 0.022
CORPUS_BIG_HALF = 0.045


def _pixel_lonlat(width: int, height: int):
    """Longitude per column and latitude per row at pixel centers."""
    lon = (np.arange(width) / width - 0.5) * geometry.TWO_PI
    lat = (0.5 - np.arange(height) / height) * math.pi
    return lon, lat


def gradient_photosphere(width: int, height: int) -> EquirectImage:
    """Smooth panorama-like background that contains no pure primary color."""
    lon, lat = _pixel_lonlat(width, height)
    shape = (height, width)
    lon_ramp = np.broadcast_to(0.5 + 0.5 * np.sin(lon)[None, :], shape)
    lat_ramp = np.broadcast_to(0.5 + 0.5 * np.cos(2.0 * lat)[:, None], shape)
    rows = np.broadcast_to((np.arange(height) / height)[:, None], shape)
    px = np.stack([60.0 + 120.0 * lon_ramp, 50.0 + 140.0 * lat_ramp, 70.0 + 120.0 * rows], axis=-1)
    return validate_photosphere(px.astype(np.uint8))


def paint_fiducial(
    image: EquirectImage,
    lon_deg: float,
    lat_deg: float,
    half_size: float,
    color: str | tuple[int, int, int],
) -> EquirectImage:
    """Paint a tangent-frame square fiducial into the panorama in place.

    The square covers tangent offsets within +-half_size of the anchor in
    an upright frame headed at lon_deg, so a face rendered at that heading
    sees an exact axis-aligned square of side ~ half_size * N / tan(fov/2).
    """
    rgb = FIDUCIAL_RGB[color] if isinstance(color, str) else color
    lon0 = math.radians(lon_deg)
    b0 = math.tan(math.radians(lat_deg))
    lon, lat = _pixel_lonlat(image.width, image.height)
    delta = geometry.normalize_longitude(lon - lon0)[None, :]
    in_front = np.cos(delta) > 0.0
    a = np.tan(np.where(in_front, delta, 0.0))
    b = np.tan(lat)[:, None] / np.where(in_front, np.cos(delta), 1.0)
    inside = in_front & (np.abs(a) <= half_size) & (np.abs(b - b0) <= half_size)
    image.pixels[inside] = np.array(rgb, dtype=np.uint8)
    return image


def paint_disk(
    image: EquirectImage,
    lon_deg: float,
    lat_deg: float,
    radius_deg: float,
    color: tuple[int, int, int],
) -> EquirectImage:
    """Paint a great-circle disk (a 'dot' on the sphere) in place."""
    lon, lat = _pixel_lonlat(image.width, image.height)
    center = geometry.lonlat_to_xyz(math.radians(lon_deg), math.radians(lat_deg))
    grid = geometry.lonlat_to_xyz(lon[None, :], lat[:, None])
    inside = grid @ center >= math.cos(math.radians(radius_deg))
    image.pixels[inside] = np.array(color, dtype=np.uint8)
    return image


# ---------------------------------------------------------------------------
# fiducial corpus
# ---------------------------------------------------------------------------

_B, _S = CORPUS_BIG_HALF, CORPUS_SMALL_HALF

#: Six samples, four fiducials each (24 total): one large equatorial square
#: the direct 2:1 detector can still resolve, plus three small off-equator
#: squares it cannot. Latitudes stay within the octagonal fov-52 band.
CORPUS_LAYOUT = (
    ("sphere-00", ((0.0, 0.0, _B, "red"), (55.0, 14.0, _S, "green"),
                   (-70.0, -16.0, _S, "blue"), (150.0, 10.0, _S, "green"))),
    ("sphere-01", ((20.0, 0.0, _B, "green"), (95.0, 12.0, _S, "red"),
                   (-120.0, 18.0, _S, "blue"), (-40.0, -12.0, _S, "red"))),
    ("sphere-02", ((-10.0, 0.0, _B, "blue"), (70.0, -14.0, _S, "red"),
                   (130.0, 16.0, _S, "green"), (-100.0, 10.0, _S, "green"))),
    ("sphere-03", ((40.0, 0.0, _B, "red"), (-60.0, 12.0, _S, "red"),
                   (110.0, -18.0, _S, "green"), (170.0, 14.0, _S, "blue"))),
    ("sphere-04", ((-30.0, 0.0, _B, "green"), (35.0, 16.0, _S, "blue"),
                   (-135.0, -10.0, _S, "blue"), (85.0, 20.0, _S, "red"))),
    ("sphere-05", ((10.0, 0.0, _B, "blue"), (-80.0, 14.0, _S, "green"),
                   (45.0, -20.0, _S, "red"), (-160.0, 12.0, _S, "red"))),
)


def fiducial_photosphere(layout, width: int = 2048, height: int = 1024) -> EquirectImage:
    """One synthetic sample: gradient background plus the given fiducials."""
    image = gradient_photosphere(width, height)
    for lon_deg, lat_deg, half, color in layout:
        paint_fiducial(image, lon_deg, lat_deg, half, color)
    return image


def fiducial_corpus(width: int = 2048, height: int = 1024) -> list[ExperimentSample]:
    """The bundled 24-fiducial corpus with shared truth sets per sample."""
    samples = []
    for sample_id, layout in CORPUS_LAYOUT:
        image = fiducial_photosphere(layout, width, height)
        truth = frozenset(f"fiducial-{color}" for _, _, _, color in layout)
        samples.append(
            ExperimentSample(sample_id, image, (TruthSet(sample_id, truth, None),))
        )
    return samples
