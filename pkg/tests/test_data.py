import logging

import numpy as np
import pytest
from PIL import Image

from affectlite import data


def write_manifest(path, rows):
    header = ",".join(data.MANIFEST_COLUMNS)
    path.write_text("\n".join([header] + rows) + "\n")


def save_png(path, arr):
    Image.fromarray(arr).save(path)


class TestManifest:
    def test_uncertain_emotion_dropped_for_classification(self, tmp_path):
        p = tmp_path / "m.csv"
        write_manifest(
            p,
            [
                "a.png,,,,,9,0.1,0.2",
                "b.png,,,,,1,0.1,0.2",
            ],
        )
        manifest = data.load_manifest(p, data.TASK_CLASSIFICATION)
        assert len(manifest) == 1
        assert manifest.dropped == 1
        assert manifest.samples[0].emotion == 1

    def test_all_invalid_ids_dropped(self, tmp_path):
        p = tmp_path / "m.csv"
        write_manifest(p, [f"x.png,,,,,{e},0,0" for e in (8, 9, 10, 0, 7)])
        manifest = data.load_manifest(p, data.TASK_CLASSIFICATION)
        assert len(manifest) == 2 and manifest.dropped == 3

    def test_missing_va_dropped_for_regression(self, tmp_path):
        p = tmp_path / "m.csv"
        write_manifest(
            p,
            [
                "a.png,,,,,1,-2,0.2",
                "b.png,,,,,1,0.3,-2",
                "c.png,,,,,1,0.3,0.2",
            ],
        )
        manifest = data.load_manifest(p, data.TASK_REGRESSION)
        assert len(manifest) == 1
        assert manifest.dropped == 2

    def test_classification_keeps_missing_va(self, tmp_path):
        p = tmp_path / "m.csv"
        write_manifest(p, ["a.png,,,,,2,-2,-2"])
        manifest = data.load_manifest(p, data.TASK_CLASSIFICATION)
        assert len(manifest) == 1

    def test_empty_file_warns(self, tmp_path, caplog):
        p = tmp_path / "m.csv"
        write_manifest(p, [])
        with caplog.at_level(logging.WARNING):
            manifest = data.load_manifest(p, data.TASK_CLASSIFICATION)
        assert len(manifest) == 0
        assert any("no usable samples" in r.message for r in caplog.records)

    def test_malformed_row_reports_line_number(self, tmp_path):
        p = tmp_path / "m.csv"
        write_manifest(p, ["a.png,,,,,1,0,0", "b.png,,,,,eleven,0,0"])
        with pytest.raises(data.ManifestError, match="line 3"):
            data.load_manifest(p, data.TASK_CLASSIFICATION)

    def test_out_of_range_values_rejected(self, tmp_path):
        p = tmp_path / "m.csv"
        write_manifest(p, ["a.png,,,,,1,1.5,0"])
        with pytest.raises(data.ManifestError, match="valence"):
            data.load_manifest(p, data.TASK_REGRESSION)
        write_manifest(p, ["a.png,,,,,11,0,0"])
        with pytest.raises(data.ManifestError, match="emotion"):
            data.load_manifest(p, data.TASK_REGRESSION)

    def test_partial_bbox_rejected(self, tmp_path):
        p = tmp_path / "m.csv"
        write_manifest(p, ["a.png,10,,20,20,1,0,0"])
        with pytest.raises(data.ManifestError, match="bbox"):
            data.load_manifest(p, data.TASK_CLASSIFICATION)

    def test_bbox_parsed(self, tmp_path):
        p = tmp_path / "m.csv"
        write_manifest(p, ["a.png,10,20,30,40,1,0,0"])
        manifest = data.load_manifest(p, data.TASK_CLASSIFICATION)
        assert manifest.samples[0].bbox == (10.0, 20.0, 30.0, 40.0)

    def test_missing_columns_rejected(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("path,emotion\na.png,1\n")
        with pytest.raises(data.ManifestError, match="columns"):
            data.load_manifest(p, data.TASK_CLASSIFICATION)

    def test_unknown_task(self, tmp_path):
        p = tmp_path / "m.csv"
        write_manifest(p, [])
        with pytest.raises(data.ManifestError, match="task"):
            data.load_manifest(p, "detection")

    def test_filtering_never_mutates_kept_rows(self, tmp_path):
        p = tmp_path / "m.csv"
        write_manifest(p, ["a.png,1,2,3,4,6,-0.25,0.75", "b.png,,,,,9,0,0"])
        manifest = data.load_manifest(p, data.TASK_CLASSIFICATION)
        s = manifest.samples[0]
        assert (s.image_path, s.bbox, s.emotion, s.valence, s.arousal) == (
            "a.png",
            (1.0, 2.0, 3.0, 4.0),
            6,
            -0.25,
            0.75,
        )


class TestPreprocess:
    def test_full_frame_identity_geometry(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, (128, 128, 3), dtype=np.uint8)
        out = data.preprocess(img, bbox=(0, 0, 128, 128)).array
        np.testing.assert_allclose(out, img.astype(np.float32) / 255.0, atol=1e-7)

    def test_crop_and_resize_contract(self):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, (480, 640, 3), dtype=np.uint8)
        out = data.preprocess(img, bbox=(100, 50, 300, 300)).array
        assert out.shape == (128, 128, 3)
        assert out.min() >= 0.0 and out.max() <= 1.0
        assert out.dtype == np.float32

    def test_constant_gray_value(self):
        img = np.full((64, 64, 3), 200, dtype=np.uint8)
        out = data.preprocess(img).array
        np.testing.assert_allclose(out, 200.0 / 255.0, atol=1e-6)

    def test_centered_square_without_bbox(self):
        img = np.zeros((100, 200, 3), dtype=np.uint8)
        img[:, 50:150] = 255  # centre band
        out = data.preprocess(img).array
        np.testing.assert_allclose(out, 1.0, atol=1e-6)

    def test_bbox_clamped_to_bounds(self):
        img = np.full((50, 50, 3), 128, dtype=np.uint8)
        out = data.preprocess(img, bbox=(-10, -10, 40, 40)).array
        assert out.shape == (128, 128, 3)

    def test_bbox_outside_image_rejected(self):
        img = np.zeros((50, 50, 3), dtype=np.uint8)
        with pytest.raises(data.DataError, match="outside"):
            data.preprocess(img, bbox=(60, 60, 10, 10))

    def test_non_rgb_rejected(self):
        with pytest.raises(data.DataError, match="RGB"):
            data.preprocess(np.zeros((10, 10), dtype=np.uint8))

    def test_range_property(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            h, w = rng.integers(20, 300, 2)
            img = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
            out = data.preprocess(img).array
            assert out.shape == (128, 128, 3)
            assert out.min() >= 0.0 and out.max() <= 1.0


class TestBilinear:
    def test_resize_identity_when_same_size(self):
        rng = np.random.default_rng(3)
        img = rng.random((17, 23, 3)).astype(np.float32)
        np.testing.assert_array_equal(data.bilinear_resize(img, 17, 23), img)

    def test_resize_preserves_constant(self):
        img = np.full((10, 8, 3), 0.625, dtype=np.float32)
        np.testing.assert_allclose(data.bilinear_resize(img, 7, 13), 0.625, atol=1e-7)

    def test_upscale_linear_ramp(self):
        # A linear ramp stays linear under bilinear interpolation (interior).
        ramp = np.linspace(0, 1, 8, dtype=np.float32)[None, :, None].repeat(4, axis=0)
        out = data.bilinear_resize(ramp, 4, 16)
        inner = out[0, 2:-2, 0]
        diffs = np.diff(inner)
        np.testing.assert_allclose(diffs, diffs[0], atol=1e-6)

    def test_edge_replication_sampling(self):
        img = np.arange(4, dtype=np.float32).reshape(2, 2)[..., None].repeat(3, axis=2)
        out = data.bilinear_sample(img, np.array([-5.0]), np.array([-5.0]))
        np.testing.assert_allclose(out[0], img[0, 0])


class TestImages:
    def test_decode_roundtrip(self, tmp_path):
        rng = np.random.default_rng(4)
        arr = rng.integers(0, 256, (30, 40, 3), dtype=np.uint8)
        p = tmp_path / "img.png"
        save_png(p, arr)
        loaded = data.load_image(p)
        np.testing.assert_array_equal(loaded, arr)

    def test_grayscale_converted_to_rgb(self, tmp_path):
        arr = np.random.default_rng(5).integers(0, 256, (20, 20), dtype=np.uint8)
        p = tmp_path / "gray.png"
        save_png(p, arr)
        loaded = data.load_image(p)
        assert loaded.shape == (20, 20, 3)

    def test_undecodable_bytes_rejected(self):
        with pytest.raises(data.DataError, match="decode"):
            data.decode_image_bytes(b"not an image at all")

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(data.DataError, match="cannot read"):
            data.load_image(tmp_path / "absent.png")


class TestStats:
    def test_balanced_counts(self, tmp_path):
        p = tmp_path / "m.csv"
        rows = [f"img{e}_{i}.png,,,,,{e},0.5,0.1" for e in range(8) for i in range(3)]
        write_manifest(p, rows)
        stats = data.dataset_stats(data.load_manifest(p, data.TASK_CLASSIFICATION))
        assert all(c == 3 for c in stats.class_counts.values())
        assert stats.n == 24

    def test_single_sample_mean(self, tmp_path):
        p = tmp_path / "m.csv"
        write_manifest(p, ["a.png,,,,,1,0.5,0.25"])
        stats = data.dataset_stats(data.load_manifest(p, data.TASK_REGRESSION))
        assert stats.valence_mean == pytest.approx(0.5)
        assert stats.arousal_mean == pytest.approx(0.25)

    def test_synthetic_tally_matches_brute_force(self, tmp_path):
        rng = np.random.default_rng(6)
        emotions = rng.integers(0, 8, 40)
        valences = rng.uniform(-1, 1, 40).round(3)
        rows = [f"i{i}.png,,,,,{e},{v},0.0" for i, (e, v) in enumerate(zip(emotions, valences))]
        p = tmp_path / "m.csv"
        write_manifest(p, rows)
        stats = data.dataset_stats(data.load_manifest(p, data.TASK_CLASSIFICATION))
        for e in range(8):
            assert stats.class_counts[data.EMOTIONS[e]] == int((emotions == e).sum())
        assert stats.valence_mean == pytest.approx(float(np.mean(valences)), abs=1e-9)


class TestLoadArrays:
    def test_end_to_end(self, tmp_path):
        rng = np.random.default_rng(7)
        rows = []
        for i in range(4):
            arr = rng.integers(0, 256, (64, 64, 3), dtype=np.uint8)
            save_png(tmp_path / f"img{i}.png", arr)
            rows.append(f"img{i}.png,,,,,{i},0.1,-0.2")
        p = tmp_path / "m.csv"
        write_manifest(p, rows)
        manifest = data.load_manifest(p, data.TASK_CLASSIFICATION)
        x, y = data.load_arrays(manifest, root=tmp_path)
        assert x.shape == (4, 128, 128, 3) and x.dtype == np.float32
        np.testing.assert_array_equal(y, [0, 1, 2, 3])

    def test_regression_targets(self, tmp_path):
        arr = np.zeros((32, 32, 3), dtype=np.uint8)
        save_png(tmp_path / "a.png", arr)
        p = tmp_path / "m.csv"
        write_manifest(p, ["a.png,,,,,1,0.5,-0.5"])
        manifest = data.load_manifest(p, data.TASK_REGRESSION)
        x, y = data.load_arrays(manifest, root=tmp_path)
        assert y.shape == (1, 2)
        np.testing.assert_allclose(y[0], [0.5, -0.5])
