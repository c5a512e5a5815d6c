"""Seeded synthetic two-class datasets (bright vs dark intensity).

Each image is its class's base intensity plus a few smooth Gaussian
bumps and per-pixel uniform noise, clipped to [0, 1].  Generation is
deterministic per seed, with one spawned child seed per image so images
are independent of how many preceded them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DatasetError
from .imgio import DatasetItem, LabeledDataset

logger = logging.getLogger(__name__)


@dataclass
class SynthSpec:
    """Parameters of a synthetic two-class dataset."""

    means: tuple[float, float] = (0.2, 0.9)
    labels: tuple[str, str] = ("dark", "light")
    noise: float = 0.05
    blob_count: tuple[int, int] = (2, 5)
    blob_radius: tuple[float, float] = (4.0, 12.0)
    blob_amplitude: float = 0.15
    images_per_class: int = 40
    size: int = 64
    seed: int = 0

    def validate(self) -> None:
        if self.size < 1:
            raise ValueError(f"image size must be >= 1, got {self.size}")
        if self.images_per_class < 1:
            raise ValueError("need at least one image per class")
        if self.noise < 0:
            raise ValueError("noise amplitude must be >= 0")
        if len(self.labels) != 2 or self.labels[0] == self.labels[1]:
            raise ValueError("labels must be two distinct strings")
        for mean in self.means:
            if not 0.0 <= mean <= 1.0:
                raise ValueError(f"class mean {mean} outside [0, 1]")
        if self.blob_count[0] > self.blob_count[1] or self.blob_count[0] < 0:
            raise ValueError(f"invalid blob count range {self.blob_count}")
        if self.blob_radius[0] > self.blob_radius[1] or self.blob_radius[0] <= 0:
            raise ValueError(f"invalid blob radius range {self.blob_radius}")
        if self.means[0] == self.means[1] and self.noise == 0.0:
            logger.warning(
                "degenerate spec: equal class means with zero noise make the "
                "classes indistinguishable"
            )


def _render_image(spec: SynthSpec, mean: float, child_seed: np.random.SeedSequence) -> np.ndarray:
    rng = np.random.default_rng(child_seed)
    size = spec.size
    image = np.full((size, size), mean)
    n_blobs = int(rng.integers(spec.blob_count[0], spec.blob_count[1] + 1))
    if n_blobs > 0:
        ys = np.arange(size)[:, None]
        xs = np.arange(size)[None, :]
        for _ in range(n_blobs):
            cy, cx = rng.uniform(0.0, size, size=2)
            ry, rx = rng.uniform(spec.blob_radius[0], spec.blob_radius[1], size=2)
            amp = rng.uniform(-spec.blob_amplitude, spec.blob_amplitude)
            image += amp * np.exp(-(((ys - cy) / ry) ** 2 + ((xs - cx) / rx) ** 2) / 2.0)
    if spec.noise > 0.0:
        image += rng.uniform(-spec.noise, spec.noise, size=(size, size))
    return np.clip(image, 0.0, 1.0)


def generate(spec: SynthSpec) -> LabeledDataset:
    """Generate the dataset described by ``spec`` (deterministic per seed)."""
    spec.validate()
    children = np.random.SeedSequence(spec.seed).spawn(2 * spec.images_per_class)
    items: list[DatasetItem] = []
    labels = tuple(sorted(spec.labels))
    mean_of = dict(zip(spec.labels, spec.means))
    child_iter = iter(children)
    for label in spec.labels:
        for idx in range(spec.images_per_class):
            matrix = _render_image(spec, mean_of[label], next(child_iter))
            items.append(DatasetItem(matrix, label, f"{label}/{label}_{idx:03d}.pgm"))
    return LabeledDataset(items=items, labels=(labels[0], labels[1]))


def write_dataset(dataset: LabeledDataset, root) -> None:
    """Write a dataset as binary PGM files in the two-class layout.

    Pixels are quantized to 8 bits, so a round-trip through
    :func:`svdclassify.imgio.load_dataset` at the same size reproduces
    each matrix within 1/255 per entry.
    """
    if not dataset.items:
        raise DatasetError("refusing to write an empty dataset")
    root = Path(root)
    for index, item in enumerate(dataset.items):
        filename = Path(item.name).name if item.name else f"img_{index:05d}.pgm"
        if not filename.endswith(".pgm"):
            filename += ".pgm"
        class_dir = root / item.label
        class_dir.mkdir(parents=True, exist_ok=True)
        (class_dir / filename).write_bytes(_encode_pgm(item.matrix))


def _encode_pgm(matrix: np.ndarray) -> bytes:
    m = np.asarray(matrix, dtype=np.float64)
    raster = np.rint(np.clip(m, 0.0, 1.0) * 255.0).astype(np.uint8)
    header = f"P5\n{m.shape[1]} {m.shape[0]}\n255\n".encode("ascii")
    return header + raster.tobytes()
