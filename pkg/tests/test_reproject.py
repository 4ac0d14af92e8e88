from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from prismmap import synth
from prismmap.errors import AspectRatioError, ImageDecodeError, NarrowFovError
from prismmap.reproject import (
    EquirectImage,
    PrismMap,
    PrismMapConfig,
    TABLE2_SWEEP,
    content_id,
    face_filename,
    face_source_coords,
    load_photosphere,
    manifest_filename,
    manifest_sample_id,
    read_manifest,
    render_face,
    render_prism_map,
    resample_to_2to1,
    sample,
    table2_configs,
    validate_photosphere,
    write_prism_map,
)

from oracles import naive_cubemap_source_coords, reference_bilinear

GOLDEN_DIR = Path(__file__).parent / "data" / "golden_hex"


def solid_image(h, w, color):
    px = np.zeros((h, w, 3), dtype=np.uint8)
    px[:] = color
    return validate_photosphere(px)


class TestValidatePhotosphere:
    def test_accepts_2to1(self):
        img = validate_photosphere(np.zeros((1024, 2048, 3), dtype=np.uint8))
        assert (img.width, img.height) == (2048, 1024)

    def test_rejects_hd_frame(self):
        with pytest.raises(AspectRatioError) as err:
            validate_photosphere(np.zeros((1080, 1920, 3), dtype=np.uint8))
        assert "1920" in str(err.value) and "1080" in str(err.value)

    def test_strict_no_tolerance(self):
        with pytest.raises(AspectRatioError):
            validate_photosphere(np.zeros((1024, 2047, 3), dtype=np.uint8))

    def test_rejects_tiny(self):
        with pytest.raises(AspectRatioError):
            validate_photosphere(np.zeros((1, 2, 3), dtype=np.uint8))

    def test_rejects_bad_dtype_and_shape(self):
        with pytest.raises(ImageDecodeError):
            validate_photosphere(np.zeros((64, 128, 3), dtype=np.float32))
        with pytest.raises(ImageDecodeError):
            validate_photosphere(np.zeros((64, 128), dtype=np.uint8))

    def test_accepts_rgba(self):
        img = validate_photosphere(np.zeros((64, 128, 4), dtype=np.uint8))
        assert img.channels == 4

    def test_resample_escape_hatch(self):
        fixed = resample_to_2to1(np.zeros((1080, 1920, 3), dtype=np.uint8))
        assert fixed.shape == (1080, 2160, 3)
        validate_photosphere(fixed)


class TestLoadPhotosphere:
    def test_round_trips_png(self, tmp_path, noise_pano):
        path = tmp_path / "pano.png"
        Image.fromarray(noise_pano.pixels).save(path)
        loaded = load_photosphere(path)
        np.testing.assert_array_equal(loaded.pixels, noise_pano.pixels)

    def test_undecodable_bytes(self, tmp_path):
        path = tmp_path / "junk.png"
        path.write_bytes(b"this is not an image")
        with pytest.raises(ImageDecodeError):
            load_photosphere(path)

    def test_resample_flag(self, tmp_path):
        path = tmp_path / "off.png"
        Image.fromarray(np.zeros((50, 80, 3), dtype=np.uint8)).save(path)
        with pytest.raises(AspectRatioError):
            load_photosphere(path)
        loaded = load_photosphere(path, resample=True)
        assert loaded.width == 2 * loaded.height


class TestSample:
    def test_uniform_color_lookup(self):
        img = solid_image(4, 8, (10, 200, 30))
        for x, y in [(0, 0), (3, 2), (7.0, 3.0)]:
            np.testing.assert_array_equal(sample(img, x, y), [10, 200, 30])

    def test_seam_blend_with_column_zero(self):
        img = solid_image(2, 4, (0, 0, 0))
        img.pixels[:, 3] = 100
        img.pixels[:, 0] = 200
        # x = W - 0.25 sits 0.75 of the way from column W-1 to column 0
        value = sample(img, 4 - 0.25, 0.0)
        assert value[0] == round(0.25 * 100 + 0.75 * 200)

    def test_nearest_wraps_at_seam(self):
        img = solid_image(2, 4, (0, 0, 0))
        img.pixels[:, 3] = 100
        img.pixels[:, 0] = 200
        assert sample(img, 4 - 0.25, 0.0, "nearest")[0] == 200
        assert sample(img, 4 - 0.6, 0.0, "nearest")[0] == 100

    def test_vertical_clamp(self, noise_pano):
        h = noise_pano.height
        np.testing.assert_array_equal(
            sample(noise_pano, 5.0, h + 3.0), sample(noise_pano, 5.0, float(h - 1))
        )
        np.testing.assert_array_equal(
            sample(noise_pano, 5.0, -2.0), sample(noise_pano, 5.0, 0.0)
        )

    def test_matches_reference_interpolator(self, rng):
        # gradient image, 100 random positions, within 1 intensity level
        n = np.arange(64)[None, :] * 2 + np.arange(32)[:, None] * 3
        px = np.stack([n % 251, (n * 7) % 249, (n * 13) % 253], axis=-1).astype(np.uint8)
        img = validate_photosphere(px)
        xs = rng.uniform(-10, 80, 100)
        ys = rng.uniform(-5, 40, 100)
        got = sample(img, xs, ys)
        for x, y, value in zip(xs, ys, got):
            expected = reference_bilinear(px, x, y)
            assert np.abs(value.astype(int) - expected.astype(int)).max() <= 1

    def test_array_shape_and_mode_validation(self, noise_pano):
        out = sample(noise_pano, np.zeros((5, 7)), np.zeros((5, 7)))
        assert out.shape == (5, 7, 3)
        with pytest.raises(ValueError):
            sample(noise_pano, 0, 0, "bicubic")

    def test_rgba_sampling(self):
        img = validate_photosphere(np.full((4, 8, 4), 77, dtype=np.uint8))
        assert sample(img, 1.5, 1.5).shape == (4,)


class TestPrismMapConfig:
    def test_defaults(self):
        cfg = PrismMapConfig(6, 60.0)
        assert cfg.face_size == 1024
        assert cfg.sampling == "bilinear"
        assert cfg.config_id == "n6_fov60"

    def test_narrow_fov_needs_override(self):
        with pytest.raises(NarrowFovError):
            PrismMapConfig(8, 40.0)
        PrismMapConfig(8, 40.0, allow_narrow_fov=True)

    def test_fov_equal_to_central_angle_is_fine(self):
        for n, fov in [(3, 120.0), (4, 90.0), (6, 60.0), (8, 45.0)]:
            PrismMapConfig(n, fov)

    def test_table2_has_11_rows_and_69_faces(self):
        configs = table2_configs()
        assert len(configs) == 11
        assert sum(c.n for c in configs) == 69


class TestRenderFace:
    def test_dot_lands_at_face_center(self, dot_pano):
        face = render_face(dot_pano, PrismMapConfig(4, 90.0, 33), 0)
        center = face[16, 16]
        np.testing.assert_array_equal(center, [250, 250, 250])

    def test_source_coords_in_range(self, noise_pano):
        for n, fov in TABLE2_SWEEP:
            cfg = PrismMapConfig(n, fov, 32)
            for k in range(n):
                x, y = face_source_coords(cfg, k, noise_pano.width, noise_pano.height)
                assert np.all(x >= 0) and np.all(x < noise_pano.width)
                assert np.all(y >= 0) and np.all(y <= noise_pano.height)

    def test_cube_map_oracle_equivalence_small(self, noise_pano):
        cfg = PrismMapConfig(4, 90.0, 16)
        for k in range(4):
            ox, oy = naive_cubemap_source_coords(16, k, noise_pano.width, noise_pano.height)
            x, y = face_source_coords(cfg, k, noise_pano.width, noise_pano.height)
            np.testing.assert_allclose(np.mod(x, noise_pano.width), ox, atol=1e-6)
            np.testing.assert_allclose(y, oy, atol=1e-6)

    def test_cyclic_shift_equivariance_one_config(self, rng):
        w, h = 288, 144
        img = validate_photosphere(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))
        cfg = PrismMapConfig(6, 60.0, 32, sampling="nearest")
        shifted = validate_photosphere(np.roll(img.pixels, -w // 6, axis=1))
        for k in range(6):
            np.testing.assert_array_equal(
                render_face(shifted, cfg, k), render_face(img, cfg, (k + 1) % 6)
            )


class TestRenderPrismMap:
    @pytest.mark.parametrize("n,fov", [(3, 120.0), (8, 52.0)])
    def test_face_count(self, noise_pano, n, fov):
        pmap = render_prism_map(noise_pano, PrismMapConfig(n, fov, 16))
        assert len(pmap.faces) == n

    def test_deterministic(self, noise_pano):
        cfg = PrismMapConfig(6, 60.0, 32)
        a = render_prism_map(noise_pano, cfg)
        b = render_prism_map(noise_pano, cfg)
        for fa, fb in zip(a.faces, b.faces):
            np.testing.assert_array_equal(fa, fb)

    def test_parallel_matches_serial(self, noise_pano):
        cfg = PrismMapConfig(8, 52.0, 32)
        serial = render_prism_map(noise_pano, cfg, jobs=1)
        parallel = render_prism_map(noise_pano, cfg, jobs=4)
        for fa, fb in zip(serial.faces, parallel.faces):
            np.testing.assert_array_equal(fa, fb)

    def test_source_id_is_content_hash(self, noise_pano):
        pmap = render_prism_map(noise_pano, PrismMapConfig(3, 120.0, 16))
        assert pmap.source_id == content_id(noise_pano.pixels)

    def test_prism_map_validates_face_count(self, noise_pano):
        cfg = PrismMapConfig(4, 90.0, 16)
        faces = tuple(render_face(noise_pano, cfg, k) for k in range(3))
        with pytest.raises(ValueError):
            PrismMap(cfg, faces, "x")


class TestOutputFiles:
    def test_filenames(self):
        cfg = PrismMapConfig(8, 52.0, 64)
        assert face_filename("pano", cfg, 3) == "pano_n8_fov52_f3.png"
        assert face_filename("pano", cfg, 3, "jpeg") == "pano_n8_fov52_f3.jpg"
        assert manifest_filename("pano", cfg) == "pano_n8_fov52.manifest.json"
        assert manifest_sample_id("pano_n8_fov52.manifest.json") == "pano"

    def test_manifest_fields(self, tmp_path, noise_pano):
        cfg = PrismMapConfig(6, 60.0, 16)
        pmap = render_prism_map(noise_pano, cfg)
        manifest_path = write_prism_map(pmap, tmp_path, "pano")
        manifest = read_manifest(manifest_path)
        assert list(manifest) == ["source_id", "n", "fov_deg", "face_size", "sampling", "faces"]
        assert manifest["source_id"] == noise_pano.content_id
        assert manifest["n"] == 6
        assert manifest["fov_deg"] == 60.0
        assert manifest["face_size"] == 16
        assert manifest["sampling"] == "bilinear"
        assert [f["index"] for f in manifest["faces"]] == list(range(6))
        assert [f["heading_deg"] for f in manifest["faces"]] == [0.0, 60.0, 120.0, 180.0, 240.0, 300.0]
        assert list(manifest["faces"][0]) == ["index", "heading_deg", "file"]
        for entry in manifest["faces"]:
            face_path = tmp_path / entry["file"]
            assert face_path.exists()
            np.testing.assert_array_equal(
                np.asarray(Image.open(face_path)), pmap.faces[entry["index"]]
            )

    def test_no_temp_leftovers(self, tmp_path, noise_pano):
        pmap = render_prism_map(noise_pano, PrismMapConfig(3, 120.0, 16))
        write_prism_map(pmap, tmp_path, "pano")
        names = {p.name for p in tmp_path.iterdir()}
        assert names == {f"pano_n3_fov120_f{k}.png" for k in range(3)} | {
            "pano_n3_fov120.manifest.json"
        }

    def test_jpeg_output(self, tmp_path, noise_pano):
        pmap = render_prism_map(noise_pano, PrismMapConfig(3, 120.0, 16))
        manifest_path = write_prism_map(pmap, tmp_path, "pano", image_format="jpeg")
        manifest = read_manifest(manifest_path)
        assert manifest["faces"][0]["file"].endswith(".jpg")
        assert (tmp_path / manifest["faces"][0]["file"]).exists()


class TestGoldenHexagonalMap:
    """Frozen render of the hexagonal map of a synthetic dotted panorama."""

    def fixture_pano(self):
        image = synth.gradient_photosphere(512, 256)
        synth.paint_disk(image, 0.0, 0.0, 3.0, (250, 250, 250))
        synth.paint_disk(image, 70.0, 20.0, 3.0, (20, 20, 20))
        synth.paint_disk(image, -120.0, -15.0, 3.0, (200, 40, 200))
        return image

    def test_matches_goldens(self):
        pmap = render_prism_map(self.fixture_pano(), PrismMapConfig(6, 60.0, 64))
        for k, face in enumerate(pmap.faces):
            golden = np.asarray(Image.open(GOLDEN_DIR / f"face{k}.png"))
            assert np.abs(face.astype(int) - golden.astype(int)).max() <= 1

    def test_dots_land_where_projection_says(self):
        pmap = render_prism_map(self.fixture_pano(), PrismMapConfig(6, 60.0, 64))
        t = math.tan(math.radians(30.0))

        def px_of(lon_deg, lat_deg, heading_deg, n=64):
            delta = math.radians(lon_deg - heading_deg)
            a = math.tan(delta)
            b = math.tan(math.radians(lat_deg)) / math.cos(delta)
            return round((a / t + 1) * n / 2 - 0.5), round((1 - b / t) * n / 2 - 0.5)

        i, j = px_of(0, 0, 0)
        np.testing.assert_array_equal(pmap.faces[0][j, i], [250, 250, 250])
        i, j = px_of(70, 20, 60)
        np.testing.assert_array_equal(pmap.faces[1][j, i], [20, 20, 20])
        i, j = px_of(-120, -15, 240)
        np.testing.assert_array_equal(pmap.faces[4][j, i], [200, 40, 200])
