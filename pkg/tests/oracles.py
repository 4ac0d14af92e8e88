"""Independent reference implementations used as test oracles.

These deliberately re-derive results from first principles (explicit 3D
rays, rotation matrices, scalar loops) rather than reusing the package's
formulas, so they can catch algebra mistakes in the production path.
"""

from __future__ import annotations

import math

import numpy as np


def naive_cubemap_source_coords(face_size: int, k: int, width: int, height: int):
    """Source coordinates for lateral cube-map face k via explicit rays.

    Builds the pixel ray in camera space (forward +x, columns toward +y,
    rows downward from +z), rotates it about the vertical axis by the face
    heading with a rotation matrix, converts to spherical coordinates and
    then to equirectangular pixels. Vectorized but formula-independent of
    the production implementation.
    """
    u = (np.arange(face_size) + 0.5) / face_size
    yc = 2.0 * u - 1.0  # tan(45 deg) = 1 for a 90 degree FOV
    zc = 1.0 - 2.0 * u
    yy, zz = np.meshgrid(yc, zc)
    xx = np.ones_like(yy)

    angle = k * (math.pi / 2.0)
    c, s = math.cos(angle), math.sin(angle)
    wx = c * xx - s * yy
    wy = s * xx + c * yy
    wz = zz

    norm = np.sqrt(wx * wx + wy * wy + wz * wz)
    lon = np.arctan2(wy, wx)
    lat = np.arcsin(wz / norm)
    x = (lon / (2.0 * math.pi) + 0.5) * width
    y = (0.5 - lat / math.pi) * height
    return np.mod(x, width), y


def naive_cubemap_source_coords_scalar(face_size: int, k: int, width: int, height: int):
    """Pure-Python double loop variant; cross-checks the vectorized oracle."""
    xs = np.empty((face_size, face_size))
    ys = np.empty((face_size, face_size))
    angle = k * (math.pi / 2.0)
    c, s = math.cos(angle), math.sin(angle)
    for j in range(face_size):
        zc = 1.0 - 2.0 * (j + 0.5) / face_size
        for i in range(face_size):
            yc = 2.0 * (i + 0.5) / face_size - 1.0
            wx = c * 1.0 - s * yc
            wy = s * 1.0 + c * yc
            wz = zc
            norm = math.sqrt(wx * wx + wy * wy + wz * wz)
            lon = math.atan2(wy, wx)
            lat = math.asin(wz / norm)
            xs[j, i] = ((lon / (2.0 * math.pi) + 0.5) * width) % width
            ys[j, i] = (0.5 - lat / math.pi) * height
    return xs, ys


def reference_bilinear(pixels: np.ndarray, x: float, y: float) -> np.ndarray:
    """Scalar float64 bilinear lookup with x-wrap and y-clamp."""
    h, w = pixels.shape[:2]
    x = x % w
    y = min(max(y, 0.0), float(h - 1))
    x0 = int(math.floor(x))
    y0 = int(math.floor(y))
    tx = x - x0
    ty = y - y0
    x0 %= w
    x1 = (x0 + 1) % w
    y1 = min(y0 + 1, h - 1)
    p = pixels.astype(np.float64)
    value = (
        p[y0, x0] * (1 - tx) * (1 - ty)
        + p[y0, x1] * tx * (1 - ty)
        + p[y1, x0] * (1 - tx) * ty
        + p[y1, x1] * tx * ty
    )
    return np.floor(value + 0.5).astype(np.uint8)


def brute_force_union(label_lists) -> set:
    """Element-by-element union, written without set operators."""
    out = set()
    for labels in label_lists:
        for label in labels:
            if label not in out:
                out.add(label)
    return out


def exhaustive_confusion(positives, vocab, truth):
    """Enumerate every vocabulary label and classify it one at a time."""
    tp, fp, fn = set(), set(), set()
    for label in vocab:
        if label in positives:
            if label in truth:
                tp.add(label)
            else:
                fp.add(label)
        elif label in truth:
            fn.add(label)
    return tp, fp, fn
