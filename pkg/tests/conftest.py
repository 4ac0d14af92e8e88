from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from prismmap import synth
from prismmap.reproject import validate_photosphere


@pytest.fixture
def rng():
    return np.random.default_rng(20170614)


@pytest.fixture
def gradient_pano():
    """Small smooth 2:1 panorama (128x64)."""
    return synth.gradient_photosphere(128, 64)


@pytest.fixture
def noise_pano(rng):
    """Random 2:1 panorama; pixel-level structure exposes sampling bugs."""
    return validate_photosphere(rng.integers(0, 256, (64, 128, 3), dtype=np.uint8))


@pytest.fixture
def dot_pano():
    """Gradient pano with a white dot at (lon 0, lat 0)."""
    image = synth.gradient_photosphere(512, 256)
    synth.paint_disk(image, 0.0, 0.0, 2.0, (250, 250, 250))
    return image
