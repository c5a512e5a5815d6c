"""Image decoding, grayscale conversion, resizing, and dataset loading.

Images enter the pipeline as JPEG, PNG, or binary PGM bytes and leave as
square float64 matrices with entries in [0, 1].  Datasets follow the
two-class directory layout ``<root>/<class_a>/*.jpg``,
``<root>/<class_b>/*.png`` (and so on); class order is the lexicographic
order of the subdirectory names so "first class" is stable across
platforms.
"""

from __future__ import annotations

import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DatasetError, DecodeError, UnsupportedFormatError

logger = logging.getLogger(__name__)

# Luminance weights applied to [0,1]-scaled R, G, B channels.  They sum
# to exactly 1.0 in float64, so constant-color pixels map to that
# constant gray level.
GRAY_WEIGHTS = (0.2125, 0.7154, 0.0721)

IMAGE_EXTENSIONS = {".jpg", ".jpeg", ".png", ".pgm"}

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_JPEG_MAGIC = b"\xff\xd8\xff"


@dataclass
class RawImage:
    """A decoded image before grayscale conversion.

    ``data`` holds row-major, channel-interleaved 8-bit samples.
    """

    width: int
    height: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        if self.channels not in (1, 3, 4):
            raise ValueError(f"unsupported channel count: {self.channels}")
        self.data = np.asarray(self.data, dtype=np.uint8).reshape(-1)
        expected = self.width * self.height * self.channels
        if self.data.size != expected:
            raise ValueError(
                f"sample count {self.data.size} does not match "
                f"{self.width}x{self.height}x{self.channels}={expected}"
            )


@dataclass
class DatasetItem:
    """One preprocessed image with its class label and source name."""

    matrix: np.ndarray
    label: str
    name: str = ""


@dataclass
class LabeledDataset:
    """Preprocessed two-class image collection.

    ``labels`` is the lexicographically ordered pair of class names;
    splits inherit it from the parent dataset even if one side of the
    split ends up without items of some class.
    """

    items: list[DatasetItem] = field(default_factory=list)
    labels: tuple[str, str] = ("", "")

    def class_items(self, label: str) -> list[DatasetItem]:
        return [it for it in self.items if it.label == label]

    def class_matrices(self, label: str) -> list[np.ndarray]:
        return [it.matrix for it in self.items if it.label == label]

    def counts(self) -> dict[str, int]:
        return {label: len(self.class_items(label)) for label in self.labels}

    def __len__(self) -> int:
        return len(self.items)


def decode_image(data: bytes) -> RawImage:
    """Decode JPEG, PNG, or binary PGM bytes into a :class:`RawImage`.

    Raises :class:`DecodeError` for malformed streams of a recognized
    format and :class:`UnsupportedFormatError` for everything else.
    """
    if data[:2] == b"P5":
        return _decode_pgm(data)
    if data[:8] == _PNG_MAGIC or data[:3] == _JPEG_MAGIC:
        return _decode_with_pillow(data)
    raise UnsupportedFormatError(
        "unrecognized image signature (supported formats: JPEG, PNG, binary PGM)"
    )


def _decode_pgm(data: bytes) -> RawImage:
    # Binary "P5" PGM: three ASCII header tokens (width, height, maxval)
    # separated by whitespace or # comments, one whitespace byte, raster.
    pos = 2
    tokens: list[bytes] = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise DecodeError(f"pgm: header ended prematurely at byte {pos}")
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise DecodeError(f"pgm: non-numeric header token near byte {pos}") from None
    if width < 1 or height < 1:
        raise DecodeError(f"pgm: invalid dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise DecodeError(f"pgm: unsupported maxval {maxval} (only 8-bit supported)")
    need = width * height
    raster = data[pos : pos + need]
    if len(raster) < need:
        raise DecodeError(
            f"pgm: raster truncated at byte {pos + len(raster)} "
            f"(expected {need} samples, got {len(raster)})"
        )
    return RawImage(width, height, 1, np.frombuffer(raster, dtype=np.uint8).copy())


def _decode_with_pillow(data: bytes) -> RawImage:
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"image decode failed: {exc}") from exc
    if img.mode not in ("L", "RGB", "RGBA"):
        if img.mode in ("LA", "PA") or (img.mode == "P" and "transparency" in img.info):
            img = img.convert("RGBA")
        else:
            img = img.convert("RGB")
    arr = np.asarray(img, dtype=np.uint8)
    channels = 1 if arr.ndim == 2 else arr.shape[2]
    return RawImage(img.width, img.height, channels, arr.reshape(-1))


def to_grayscale(img: RawImage) -> np.ndarray:
    """Convert a decoded image to a float64 gray matrix in [0, 1].

    Three- and four-channel images use the fixed luminance weights on
    [0,1]-scaled channels (alpha is ignored); single-channel images are
    scaled by 1/255.
    """
    if img.channels == 1:
        gray = img.data.reshape(img.height, img.width) / 255.0
    elif img.channels in (3, 4):
        pixels = img.data.reshape(img.height, img.width, img.channels)
        scaled = pixels[:, :, :3] / 255.0
        gray = scaled @ np.asarray(GRAY_WEIGHTS)
    else:
        raise ValueError(f"unsupported channel count: {img.channels}")
    return np.clip(gray, 0.0, 1.0)


def _sample_axis(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Half-pixel-center mapping: output center i+0.5 lands at input
    # coordinate (i+0.5)*scale - 0.5, clamped to the valid range.
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    lo = np.floor(src).astype(int)
    lo = np.minimum(lo, n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def resize_bilinear(matrix, target: int) -> np.ndarray:
    """Resize a 2-D matrix to ``target`` x ``target`` bilinearly.

    Sampling uses half-pixel centers with edge clamping, so constants are
    preserved and every output value is a convex combination of inputs.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("expected a nonempty 2-D matrix")
    if target < 1:
        raise ValueError(f"target size must be >= 1, got {target}")
    rows, cols = m.shape
    if rows == target and cols == target:
        return m.copy()
    y0, y1, ty = _sample_axis(rows, target)
    x0, x1, tx = _sample_axis(cols, target)
    top = m[y0][:, x0] * (1.0 - tx) + m[y0][:, x1] * tx
    bottom = m[y1][:, x0] * (1.0 - tx) + m[y1][:, x1] * tx
    return top * (1.0 - ty)[:, None] + bottom * ty[:, None]


def preprocess_image(data: bytes, size: int = 64) -> np.ndarray:
    """Decode bytes and produce the working ``size`` x ``size`` gray matrix."""
    gray = to_grayscale(decode_image(data))
    return np.clip(resize_bilinear(gray, size), 0.0, 1.0)


def _map_ordered(fn: Callable, values: Sequence, workers: int) -> list:
    wrapped = lambda v: _trap(fn, v)
    if workers > 1 and len(values) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(wrapped, values))
    return [wrapped(v) for v in values]


def _trap(fn: Callable, value):
    try:
        return fn(value)
    except Exception as exc:  # noqa: BLE001 - reported per file by the caller
        return exc


def load_dataset(root, size: int = 64, workers: int = 1) -> LabeledDataset:
    """Load a two-class dataset from ``<root>/<class>/<image>`` files.

    Every image is decoded, converted to grayscale, and resized to
    ``size`` x ``size``.  Files that fail to decode are skipped with a
    warning; a class with no decodable image at all is an error, as is a
    root with anything other than exactly two class subdirectories.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if len(class_dirs) != 2:
        raise DatasetError(
            f"expected exactly two class subdirectories under {root}, "
            f"found {len(class_dirs)}"
        )
    labels = (class_dirs[0].name, class_dirs[1].name)
    items: list[DatasetItem] = []
    for class_dir in class_dirs:
        files = sorted(
            p for p in class_dir.iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
        )
        results = _map_ordered(lambda p: preprocess_image(p.read_bytes(), size), files, workers)
        kept = 0
        for path, result in zip(files, results):
            if isinstance(result, Exception):
                logger.warning("skipping %s: %s", path, result)
                continue
            items.append(DatasetItem(result, class_dir.name, f"{class_dir.name}/{path.name}"))
            kept += 1
        if kept == 0:
            raise DatasetError(f"class '{class_dir.name}' has no decodable images")
    return LabeledDataset(items=items, labels=labels)


def split_dataset(
    dataset: LabeledDataset, train_fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Stratified train/test split, deterministic for a fixed seed.

    Each class is shuffled with the seeded generator; the first
    ``ceil(train_fraction * N)`` items go to train, the rest to test.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train_items: list[DatasetItem] = []
    test_items: list[DatasetItem] = []
    for label in dataset.labels:
        class_items = dataset.class_items(label)
        if len(class_items) < 2:
            raise DatasetError(
                f"class '{label}' has {len(class_items)} item(s); need at least 2 to split"
            )
        order = rng.permutation(len(class_items))
        n_train = math.ceil(train_fraction * len(class_items))
        train_items.extend(class_items[i] for i in order[:n_train])
        test_items.extend(class_items[i] for i in order[n_train:])
    return (
        LabeledDataset(items=train_items, labels=dataset.labels),
        LabeledDataset(items=test_items, labels=dataset.labels),
    )
