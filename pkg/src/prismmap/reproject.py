"""Render the lateral faces of an n-gonal prism map from a 2:1 photosphere.

The renderer works by direct inverse mapping: every face pixel is traced
back through the perspective projection to a longitude/latitude and then
to a continuous source coordinate, where the panorama is sampled with
horizontal wraparound. No 3D scene or lighting model is involved.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import re
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import geometry
from .errors import (
    AspectRatioError,
    ImageDecodeError,
    InvalidFovError,
    InvalidPolygonError,
    NarrowFovError,
)

SAMPLING_MODES = ("bilinear", "nearest")

#: (n, fov_deg) sweep used throughout: one entry per experiment configuration.
TABLE2_SWEEP = (
    (3, 120.0),
    (4, 90.0),
    (4, 120.0),
    (6, 60.0),
    (6, 90.0),
    (6, 120.0),
    (8, 45.0),
    (8, 52.0),
    (8, 60.0),
    (8, 90.0),
    (8, 120.0),
)


def content_id(pixels: np.ndarray) -> str:
    """SHA-256 of the decoded 8-bit pixel buffer (shape-tagged).

    Hashing decoded pixels rather than file bytes keeps in-memory and
    on-disk pipelines keyed identically.
    """
    arr = np.ascontiguousarray(pixels)
    header = f"u8:{arr.shape[0]}x{arr.shape[1]}x{arr.shape[2] if arr.ndim == 3 else 1}:"
    return hashlib.sha256(header.encode("ascii") + arr.tobytes()).hexdigest()


# ---------------------------------------------------------------------------
# input validation
# ---------------------------------------------------------------------------


def pack_rgba32(pixels: np.ndarray) -> np.ndarray:
    """Flat uint32 view of RGBA-padded pixels; one word per pixel.

    Packing lets the bilinear sampler gather whole pixels with single-word
    loads instead of per-channel row copies.
    """
    arr = np.ascontiguousarray(pixels)
    if arr.shape[2] == 3:
        padded = np.zeros(arr.shape[:2] + (4,), dtype=np.uint8)
        padded[..., :3] = arr
        arr = padded
    return arr.view(np.uint32).reshape(-1)


@dataclass(frozen=True)
class EquirectImage:
    """Validated 2:1 panorama; pixels are (H, W, 3|4) uint8, row-major."""

    pixels: np.ndarray

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def content_id(self) -> str:
        return content_id(self.pixels)

    @property
    def packed(self) -> np.ndarray:
        """Cached uint32-packed pixels for fast sampling."""
        cached = self.__dict__.get("_packed")
        if cached is None:
            cached = pack_rgba32(self.pixels)
            object.__setattr__(self, "_packed", cached)
        return cached


def validate_photosphere(pixels: np.ndarray) -> EquirectImage:
    """Wrap a pixel grid as an EquirectImage, enforcing the strict 2:1 contract."""
    arr = np.asarray(pixels)
    if arr.dtype != np.uint8:
        raise ImageDecodeError(f"expected uint8 pixels, got {arr.dtype}")
    if arr.ndim != 3 or arr.shape[2] not in (3, 4):
        raise ImageDecodeError(f"expected (H, W, 3|4) pixels, got shape {arr.shape}")
    h, w = arr.shape[:2]
    if w < 2 or h < 2 or w != 2 * h:
        raise AspectRatioError(w, h)
    return EquirectImage(np.ascontiguousarray(arr))


def resample_to_2to1(pixels: np.ndarray) -> np.ndarray:
    """Bilinear-resize an off-ratio raster to width = 2 * height."""
    arr = np.asarray(pixels)
    h = max(arr.shape[0], 2)
    img = Image.fromarray(arr).resize((2 * h, h), Image.BILINEAR)
    return np.asarray(img)


def load_photosphere(path: str | Path, resample: bool = False) -> EquirectImage:
    """Decode a PNG/JPEG photosphere from disk and validate it.

    With ``resample=True`` an off-ratio input is resized to 2:1 instead of
    rejected.
    """
    try:
        with Image.open(path) as img:
            if img.mode not in ("RGB", "RGBA"):
                img = img.convert("RGBA" if "transparency" in img.info else "RGB")
            arr = np.asarray(img)
    except UnidentifiedImageError as exc:
        raise ImageDecodeError(f"cannot decode image {path}: {exc}") from exc
    if resample and arr.shape[1] != 2 * arr.shape[0]:
        arr = resample_to_2to1(arr)
    return validate_photosphere(arr)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrismMapConfig:
    """One prism-map configuration: side count, FOV, face size, sampling."""

    n: int
    fov_deg: float
    face_size: int = 1024
    sampling: str = "bilinear"
    allow_narrow_fov: bool = False

    def __post_init__(self):
        if self.n < 3:
            raise InvalidPolygonError(f"prism base needs at least 3 sides, got {self.n}")
        if not 0.0 < self.fov_deg < 180.0:
            raise InvalidFovError(
                f"field of view must be in (0, 180) degrees, got {self.fov_deg}"
            )
        if self.face_size < 1:
            raise ValueError(f"face size must be positive, got {self.face_size}")
        if self.sampling not in SAMPLING_MODES:
            raise ValueError(f"sampling must be one of {SAMPLING_MODES}, got {self.sampling!r}")
        if self.fov_deg < geometry.central_angle_deg(self.n) and not self.allow_narrow_fov:
            raise NarrowFovError(
                f"fov {self.fov_deg} < central angle {geometry.central_angle_deg(self.n):g} "
                f"leaves equator gaps; pass allow_narrow_fov to accept"
            )

    @property
    def config_id(self) -> str:
        return f"n{self.n}_fov{self.fov_deg:g}"

    def face_geometry(self, k: int) -> geometry.FaceGeometry:
        return geometry.FaceGeometry(self.n, self.fov_deg, k)


def table2_configs(face_size: int = 1024, sampling: str = "bilinear") -> tuple[PrismMapConfig, ...]:
    """The 11-configuration experiment sweep at a given face size."""
    return tuple(PrismMapConfig(n, fov, face_size, sampling) for n, fov in TABLE2_SWEEP)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample(image: EquirectImage, x, y, mode: str = "bilinear") -> np.ndarray:
    """Sample the panorama at continuous coordinates (x, y).

    Pixel (i, j) is centered at (x=i, y=j). x wraps modulo W across the
    cylindrical seam; y clamps to the [0, H-1] pixel-center range.
    Broadcasts over arrays; returns uint8 with a trailing channel axis.
    """
    if mode not in SAMPLING_MODES:
        raise ValueError(f"sampling must be one of {SAMPLING_MODES}, got {mode!r}")
    px = image.pixels
    h, w = px.shape[:2]
    x = np.mod(np.asarray(x, dtype=np.float64), w)
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, float(h - 1))

    if mode == "nearest":
        xi = np.mod(np.floor(x + 0.5).astype(np.int64), w)
        yi = np.clip(np.floor(y + 0.5).astype(np.int64), 0, h - 1)
        return px[yi, xi]

    out_shape = x.shape + (image.channels,)
    x0f = np.floor(x)
    y0f = np.floor(y)
    tx = (x - x0f).astype(np.float32).reshape(-1, 1)
    ty = (y - y0f).astype(np.float32).reshape(-1, 1)
    x0 = np.mod(x0f.astype(np.intp), w).reshape(-1)
    x1 = (x0 + 1) % w
    y0 = np.clip(y0f.astype(np.intp), 0, h - 1).reshape(-1)
    row0 = y0 * w
    row1 = np.minimum(y0 + 1, h - 1) * w

    packed = image.packed
    channels = image.channels

    def corner(idx):
        return packed.take(idx).view(np.uint8).reshape(-1, 4)[:, :channels].astype(np.float32)

    p00 = corner(row0 + x0)
    p01 = corner(row0 + x1)
    p10 = corner(row1 + x0)
    p11 = corner(row1 + x1)
    p00 += (p01 - p00) * tx
    p10 += (p11 - p10) * tx
    p00 += (p10 - p00) * ty
    p00 += 0.5
    return np.floor(p00, out=p00).astype(np.uint8).reshape(out_shape)


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def face_source_coords(config: PrismMapConfig, k: int, width: int, height: int):
    """Continuous source coordinates sampled by every pixel of face k."""
    lon, lat = geometry.face_grid_lonlat(config.face_size, config.face_geometry(k))
    return geometry.lonlat_to_equirect(lon, lat, width, height)


def render_face(image: EquirectImage, config: PrismMapConfig, k: int) -> np.ndarray:
    """Render lateral face k as an (N, N, C) uint8 array."""
    x, y = face_source_coords(config, k, image.width, image.height)
    return sample(image, x, y, config.sampling)


@dataclass(frozen=True)
class PrismMap:
    """All n lateral faces of one configuration, in face-index order."""

    config: PrismMapConfig
    faces: tuple[np.ndarray, ...]
    source_id: str

    def __post_init__(self):
        if len(self.faces) != self.config.n:
            raise ValueError(f"expected {self.config.n} faces, got {len(self.faces)}")
        n = self.config.face_size
        for k, face in enumerate(self.faces):
            if face.shape[:2] != (n, n):
                raise ValueError(f"face {k} is {face.shape[:2]}, expected ({n}, {n})")


def render_prism_map(image: EquirectImage, config: PrismMapConfig, jobs: int = 1) -> PrismMap:
    """Render all n faces; faces are independent, so jobs > 1 renders them
    concurrently without affecting the output."""
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            faces = tuple(pool.map(lambda k: render_face(image, config, k), range(config.n)))
    else:
        faces = tuple(render_face(image, config, k) for k in range(config.n))
    return PrismMap(config, faces, image.content_id)


# ---------------------------------------------------------------------------
# file output
# ---------------------------------------------------------------------------

_EXTENSIONS = {"png": "png", "jpeg": "jpg"}
_MANIFEST_RE = re.compile(r"^(?P<stem>.+)_n(?P<n>\d+)_fov(?P<fov>[0-9.]+)\.manifest\.json$")


def atomic_write_bytes(path: Path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_image(pixels: np.ndarray, image_format: str = "png", jpeg_quality: int = 90) -> bytes:
    """Encode a face or panorama to PNG or JPEG bytes."""
    if image_format not in _EXTENSIONS:
        raise ValueError(f"image format must be one of {tuple(_EXTENSIONS)}, got {image_format!r}")
    arr = pixels
    if image_format == "jpeg" and arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[..., :3]  # JPEG has no alpha
    buf = io.BytesIO()
    img = Image.fromarray(arr)
    if image_format == "jpeg":
        img.save(buf, format="JPEG", quality=jpeg_quality)
    else:
        img.save(buf, format="PNG")
    return buf.getvalue()


def face_filename(stem: str, config: PrismMapConfig, k: int, image_format: str = "png") -> str:
    return f"{stem}_n{config.n}_fov{config.fov_deg:g}_f{k}.{_EXTENSIONS[image_format]}"


def manifest_filename(stem: str, config: PrismMapConfig) -> str:
    return f"{stem}_n{config.n}_fov{config.fov_deg:g}.manifest.json"


def manifest_dict(pmap: PrismMap, stem: str, image_format: str = "png") -> dict:
    cfg = pmap.config
    return {
        "source_id": pmap.source_id,
        "n": cfg.n,
        "fov_deg": cfg.fov_deg,
        "face_size": cfg.face_size,
        "sampling": cfg.sampling,
        "faces": [
            {
                "index": k,
                "heading_deg": k * (360.0 / cfg.n),
                "file": face_filename(stem, cfg, k, image_format),
            }
            for k in range(cfg.n)
        ],
    }


def write_prism_map(
    pmap: PrismMap,
    out_dir: str | Path,
    stem: str,
    image_format: str = "png",
    jpeg_quality: int = 90,
) -> Path:
    """Write all faces plus the manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, face in enumerate(pmap.faces):
        data = encode_image(face, image_format, jpeg_quality)
        atomic_write_bytes(out_dir / face_filename(stem, pmap.config, k, image_format), data)
    manifest = manifest_dict(pmap, stem, image_format)
    payload = (json.dumps(manifest, indent=2) + "\n").encode("utf-8")
    manifest_path = out_dir / manifest_filename(stem, pmap.config)
    atomic_write_bytes(manifest_path, payload)
    return manifest_path


def read_manifest(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def manifest_sample_id(path: str | Path) -> str:
    """Sample id encoded in a manifest filename (the input stem)."""
    name = Path(path).name
    m = _MANIFEST_RE.match(name)
    if not m:
        raise ValueError(f"not a prism-map manifest filename: {name}")
    return m.group("stem")


def load_face_pixels(manifest_path: str | Path, face_entry: dict) -> np.ndarray:
    """Decode one face file referenced by a manifest entry."""
    face_path = Path(manifest_path).parent / face_entry["file"]
    try:
        with Image.open(face_path) as img:
            if img.mode not in ("RGB", "RGBA"):
                img = img.convert("RGB")
            return np.asarray(img)
    except UnidentifiedImageError as exc:
        raise ImageDecodeError(f"cannot decode face image {face_path}: {exc}") from exc
