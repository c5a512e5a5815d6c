"""Tests for image decoding, preprocessing, and dataset handling."""

import io
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from svdclassify.errors import DatasetError, DecodeError, UnsupportedFormatError
from svdclassify.imgio import (
    GRAY_WEIGHTS,
    DatasetItem,
    LabeledDataset,
    RawImage,
    decode_image,
    load_dataset,
    resize_bilinear,
    split_dataset,
    to_grayscale,
)

from _oracles import bilinear_reference, pgm_bytes


def png_bytes(pixels: np.ndarray, mode: str = "RGB") -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def jpeg_bytes(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="RGB").save(buf, format="JPEG")
    return buf.getvalue()


class TestDecode:
    def test_pgm_direct_header(self):
        raw = decode_image(pgm_bytes(2, 2, [0, 128, 255, 64]))
        assert (raw.width, raw.height, raw.channels) == (2, 2, 1)
        assert raw.data.tolist() == [0, 128, 255, 64]

    def test_pgm_with_comments(self):
        data = b"P5\n# a comment line\n2 1\n# another\n255\n" + bytes([7, 9])
        raw = decode_image(data)
        assert (raw.width, raw.height) == (2, 1)
        assert raw.data.tolist() == [7, 9]

    def test_pgm_truncated_raster(self):
        with pytest.raises(DecodeError, match="truncated"):
            decode_image(pgm_bytes(2, 2, [0, 128, 255]))

    def test_pgm_16bit_rejected(self):
        with pytest.raises(DecodeError, match="maxval"):
            decode_image(b"P5\n1 1\n65535\n\x00\x01")

    def test_single_pixel_png(self):
        raw = decode_image(png_bytes(np.array([[[255, 0, 0]]], dtype=np.uint8)))
        assert (raw.width, raw.height, raw.channels) == (1, 1, 3)
        assert raw.data.tolist() == [255, 0, 0]

    def test_truncated_jpeg(self):
        rng = np.random.default_rng(0)
        full = jpeg_bytes(rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8))
        with pytest.raises(DecodeError):
            decode_image(full[: len(full) // 2])

    def test_jpeg_roundtrip_dimensions(self):
        rng = np.random.default_rng(1)
        raw = decode_image(jpeg_bytes(rng.integers(0, 256, size=(10, 12, 3), dtype=np.uint8)))
        assert (raw.width, raw.height, raw.channels) == (12, 10, 3)

    def test_unsupported_format_is_distinct(self):
        with pytest.raises(UnsupportedFormatError):
            decode_image(b"GIF89a" + b"\x00" * 32)
        assert not issubclass(UnsupportedFormatError, DecodeError)

    def test_rgba_png(self):
        pixels = np.zeros((2, 2, 4), dtype=np.uint8)
        pixels[..., 3] = 255
        raw = decode_image(png_bytes(pixels, mode="RGBA"))
        assert raw.channels == 4

    def test_raw_image_validates_sample_count(self):
        with pytest.raises(ValueError):
            RawImage(2, 2, 1, np.zeros(3, dtype=np.uint8))
        with pytest.raises(ValueError):
            RawImage(2, 2, 2, np.zeros(8, dtype=np.uint8))


class TestGrayscale:
    def test_white_maps_to_one(self):
        raw = RawImage(1, 1, 3, np.array([255, 255, 255], dtype=np.uint8))
        assert to_grayscale(raw)[0, 0] == 1.0

    def test_pure_red_uses_first_weight(self):
        raw = RawImage(1, 1, 3, np.array([255, 0, 0], dtype=np.uint8))
        assert to_grayscale(raw)[0, 0] == pytest.approx(0.2125, abs=1e-15)

    def test_single_channel_passthrough(self):
        raw = RawImage(1, 1, 1, np.array([128], dtype=np.uint8))
        assert to_grayscale(raw)[0, 0] == pytest.approx(128 / 255)

    def test_alpha_ignored(self):
        opaque = RawImage(1, 1, 4, np.array([10, 20, 30, 255], dtype=np.uint8))
        clear = RawImage(1, 1, 4, np.array([10, 20, 30, 0], dtype=np.uint8))
        assert to_grayscale(opaque)[0, 0] == to_grayscale(clear)[0, 0]

    def test_weights_sum_exactly_one(self):
        assert GRAY_WEIGHTS == (0.2125, 0.7154, 0.0721)
        assert sum(GRAY_WEIGHTS) == 1.0

    def test_constant_color_maps_to_constant(self):
        for value in (0, 51, 100, 200, 255):
            raw = RawImage(2, 3, 3, np.full(18, value, dtype=np.uint8))
            gray = to_grayscale(raw)
            assert np.allclose(gray, value / 255.0, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=2**31 - 1))
    def test_output_always_in_unit_interval(self, seed):
        rng = np.random.default_rng(seed)
        w, h = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        channels = int(rng.choice([1, 3, 4]))
        raw = RawImage(w, h, channels, rng.integers(0, 256, size=w * h * channels, dtype=np.uint8))
        gray = to_grayscale(raw)
        assert gray.shape == (h, w)
        assert gray.min() >= 0.0 and gray.max() <= 1.0


class TestResize:
    def test_constant_preserved(self):
        out = resize_bilinear(np.full((5, 9), 0.5), 64)
        assert out.shape == (64, 64)
        assert np.all(out == 0.5)

    def test_ramp_rows_match_reference(self):
        src = np.array([[0.0, 1.0], [0.0, 1.0]])
        out = resize_bilinear(src, 64)
        expected = bilinear_reference(src, 64)
        assert np.allclose(out, expected, atol=1e-12)
        assert np.allclose(out, out[0][None, :])  # every row identical
        assert np.all(np.diff(out[0]) >= 0)
        assert out[0, 0] == 0.0 and out[0, -1] == 1.0

    def test_random_matches_reference(self):
        rng = np.random.default_rng(2)
        src = rng.random((7, 5))
        assert np.allclose(resize_bilinear(src, 11), bilinear_reference(src, 11), atol=1e-12)

    def test_identity_resize(self):
        rng = np.random.default_rng(3)
        src = rng.random((64, 64))
        assert np.array_equal(resize_bilinear(src, 64), src)

    def test_zero_target_rejected(self):
        with pytest.raises(ValueError):
            resize_bilinear(np.ones((2, 2)), 0)

    @settings(max_examples=30, deadline=None)
    @given(
        st.integers(min_value=1, max_value=10),
        st.integers(min_value=1, max_value=10),
        st.integers(min_value=1, max_value=30),
        st.integers(min_value=0, max_value=2**31 - 1),
    )
    def test_convex_combination_bounds(self, rows, cols, target, seed):
        src = np.random.default_rng(seed).random((rows, cols))
        out = resize_bilinear(src, target)
        assert out.min() >= src.min() - 1e-12
        assert out.max() <= src.max() + 1e-12


def write_pgm_tree(root, spec: dict):
    """spec: {class_name: number_of_images or list of byte blobs}."""
    rng = np.random.default_rng(123)
    for label, content in spec.items():
        class_dir = root / label
        class_dir.mkdir(parents=True)
        blobs = (
            content
            if isinstance(content, list)
            else [
                pgm_bytes(4, 4, rng.integers(0, 256, size=16).tolist())
                for _ in range(content)
            ]
        )
        for i, blob in enumerate(blobs):
            (class_dir / f"img_{i:02d}.pgm").write_bytes(blob)


class TestLoadDataset:
    def test_counts_and_labels(self, tmp_path):
        write_pgm_tree(tmp_path, {"boxer": 3, "persian": 2})
        ds = load_dataset(tmp_path, size=8)
        assert ds.labels == ("boxer", "persian")
        assert ds.counts() == {"boxer": 3, "persian": 2}
        assert all(it.matrix.shape == (8, 8) for it in ds.items)
        assert all(0.0 <= it.matrix.min() and it.matrix.max() <= 1.0 for it in ds.items)
        assert ds.items[0].name == "boxer/img_00.pgm"

    def test_single_class_rejected(self, tmp_path):
        write_pgm_tree(tmp_path, {"boxer": 2})
        with pytest.raises(DatasetError, match="two class"):
            load_dataset(tmp_path)

    def test_three_classes_rejected(self, tmp_path):
        write_pgm_tree(tmp_path, {"a": 1, "b": 1, "c": 1})
        with pytest.raises(DatasetError):
            load_dataset(tmp_path)

    def test_corrupt_file_skipped_with_warning(self, tmp_path, caplog):
        good = pgm_bytes(2, 2, [1, 2, 3, 4])
        write_pgm_tree(tmp_path, {"boxer": [good, b"P5\n2 2\n255\n\x00", good], "persian": [good]})
        with caplog.at_level(logging.WARNING):
            ds = load_dataset(tmp_path, size=4)
        assert ds.counts() == {"boxer": 2, "persian": 1}
        assert any("skipping" in rec.message for rec in caplog.records)

    def test_class_of_only_corrupt_files_rejected(self, tmp_path):
        good = pgm_bytes(2, 2, [1, 2, 3, 4])
        write_pgm_tree(tmp_path, {"boxer": [b"P5\nbroken"], "persian": [good]})
        with pytest.raises(DatasetError, match="no decodable images"):
            load_dataset(tmp_path)

    def test_missing_root(self, tmp_path):
        with pytest.raises(DatasetError):
            load_dataset(tmp_path / "nowhere")

    def test_workers_give_same_result(self, tmp_path):
        write_pgm_tree(tmp_path, {"boxer": 4, "persian": 4})
        serial = load_dataset(tmp_path, size=8, workers=1)
        threaded = load_dataset(tmp_path, size=8, workers=4)
        assert [it.name for it in serial.items] == [it.name for it in threaded.items]
        for a, b in zip(serial.items, threaded.items):
            assert np.array_equal(a.matrix, b.matrix)


def make_dataset(n_a: int, n_b: int, labels=("a", "b")) -> LabeledDataset:
    rng = np.random.default_rng(7)
    items = [
        DatasetItem(rng.random((2, 2)), labels[0], f"{labels[0]}/{i}") for i in range(n_a)
    ] + [
        DatasetItem(rng.random((2, 2)), labels[1], f"{labels[1]}/{i}") for i in range(n_b)
    ]
    return LabeledDataset(items=items, labels=labels)


class TestSplit:
    def test_counts(self):
        train, test = split_dataset(make_dataset(10, 10), 0.8, seed=42)
        assert train.counts() == {"a": 8, "b": 8}
        assert test.counts() == {"a": 2, "b": 2}

    def test_deterministic(self):
        ds = make_dataset(9, 7)
        first = split_dataset(ds, 0.6, seed=5)
        second = split_dataset(ds, 0.6, seed=5)
        assert [it.name for it in first[0].items] == [it.name for it in second[0].items]
        assert [it.name for it in first[1].items] == [it.name for it in second[1].items]

    def test_half_split_of_170(self):
        train, test = split_dataset(make_dataset(170, 170), 0.5, seed=0)
        assert train.counts() == {"a": 85, "b": 85}
        assert test.counts() == {"a": 85, "b": 85}

    def test_partition_property(self):
        ds = make_dataset(11, 6)
        train, test = split_dataset(ds, 0.7, seed=3)
        all_names = sorted(it.name for it in ds.items)
        split_names = sorted(it.name for it in train.items + test.items)
        assert all_names == split_names
        assert not set(it.name for it in train.items) & set(it.name for it in test.items)

    def test_small_class_rejected(self):
        with pytest.raises(DatasetError):
            split_dataset(make_dataset(1, 5), 0.8, seed=0)

    def test_bad_fraction_rejected(self):
        ds = make_dataset(4, 4)
        for frac in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ValueError):
                split_dataset(ds, frac, seed=0)

    @settings(max_examples=25, deadline=None)
    @given(
        st.integers(min_value=2, max_value=30),
        st.integers(min_value=2, max_value=30),
        st.floats(min_value=0.05, max_value=0.95),
        st.integers(min_value=0, max_value=2**31 - 1),
    )
    def test_sizes_follow_ceil_rule(self, n_a, n_b, frac, seed):
        import math

        train, test = split_dataset(make_dataset(n_a, n_b), frac, seed=seed)
        assert train.counts() == {"a": math.ceil(frac * n_a), "b": math.ceil(frac * n_b)}
        assert test.counts() == {"a": n_a - math.ceil(frac * n_a), "b": n_b - math.ceil(frac * n_b)}
