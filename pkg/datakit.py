"""
Dataset preparation for the Geoseg toolkit.

This module turns large image/mask rasters into fixed-size tiles, filters
tiles with low building coverage, splits them into training, validation and
testing sets, and reads/writes the on-disk ``dataset/`` layout. A synthetic
rectangle corpus stands in for real aerial imagery at desk scale.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from errors import GeosegError

logger = logging.getLogger(__name__)

DEFAULT_TILE_SIZE = 224
DEFAULT_MIN_COVERAGE = 0.05
# Validation share of the training region (11,952 of 39,864 tiles at full scale)
DEFAULT_VAL_FRACTION = 0.3
MANIFEST_NAME = "manifest.csv"
MANIFEST_FIELDS = ["split", "id", "row", "col", "coverage"]
SPLIT_NAMES = ("train", "val", "test")
IMAGE_EXT = ".png"


@dataclass(frozen=True)
class RasterPair:
    """An RGB raster paired with its binary building mask."""

    image: np.ndarray
    mask: np.ndarray
    id: str

    def __post_init__(self):
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise GeosegError("shape-mismatch", f"image of {self.id} must be HxWx3, got {self.image.shape}")
        if self.image.shape[:2] != self.mask.shape:
            raise GeosegError(
                "shape-mismatch",
                f"image {self.image.shape[:2]} and mask {self.mask.shape} of {self.id} differ",
            )
        if not np.isin(self.mask, (0, 1)).all():
            raise GeosegError("non-binary-mask", f"mask of {self.id} has values outside {{0, 1}}")


@dataclass(frozen=True)
class TileSample:
    """One tile cut from a raster, with its provenance and building coverage."""

    image: np.ndarray
    mask: np.ndarray
    source_id: str
    offset: Tuple[int, int]
    coverage: float

    @property
    def key(self) -> Tuple[str, Tuple[int, int]]:
        return (self.source_id, self.offset)

    @property
    def name(self) -> str:
        """File stem ``<id>_<row>_<col>``."""
        return f"{self.source_id}_{self.offset[0]}_{self.offset[1]}"


@dataclass
class DatasetSplit:
    """Training, validation and testing tiles."""

    train: List[TileSample] = field(default_factory=list)
    val: List[TileSample] = field(default_factory=list)
    test: List[TileSample] = field(default_factory=list)
    seed: int = 0

    def parts(self) -> Dict[str, List[TileSample]]:
        return {"train": self.train, "val": self.val, "test": self.test}

    def counts(self) -> Dict[str, int]:
        return {name: len(tiles) for name, tiles in self.parts().items()}


def _coverage(mask: np.ndarray) -> float:
    return int(np.count_nonzero(mask)) / mask.size


def tile(pair: RasterPair, size: int = DEFAULT_TILE_SIZE, stride: Optional[int] = None) -> List[TileSample]:
    """
    Cut a raster into square tiles with a sliding window.

    Partial windows at the right and bottom edges are dropped.

    Args:
        pair: The raster to tile
        size: Tile edge length in pixels
        stride: Window step in pixels; defaults to ``size`` (no overlap)

    Returns:
        Tiles in row-major order of their offsets
    """
    stride = size if stride is None else stride
    if size < 32:
        raise GeosegError("invalid-size", f"tile size must be >= 32, got {size}")
    if stride < 1:
        raise GeosegError("invalid-stride", f"stride must be >= 1, got {stride}")

    height, width = pair.mask.shape
    if height < size or width < size:
        raise GeosegError(
            "raster-too-small",
            f"raster {pair.id} is {height}x{width}, smaller than one {size}x{size} window",
        )

    tiles = []
    for row in range(0, height - size + 1, stride):
        for col in range(0, width - size + 1, stride):
            mask = pair.mask[row:row + size, col:col + size].copy()
            tiles.append(TileSample(
                image=pair.image[row:row + size, col:col + size].copy(),
                mask=mask,
                source_id=pair.id,
                offset=(row, col),
                coverage=_coverage(mask),
            ))

    logger.debug(f"Cut {len(tiles)} tiles of {size}x{size} from {pair.id}")
    return tiles


def filter_by_coverage(tiles: Sequence[TileSample], min_coverage: float = DEFAULT_MIN_COVERAGE) -> List[TileSample]:
    """
    Keep the tiles whose building coverage reaches a threshold.

    Args:
        tiles: Candidate tiles
        min_coverage: Minimum building fraction in [0, 1]

    Returns:
        The kept tiles, in input order
    """
    if not 0.0 <= min_coverage <= 1.0:
        raise GeosegError("invalid-config", f"min_coverage must be in [0, 1], got {min_coverage}")
    kept = [t for t in tiles if t.coverage >= min_coverage]
    logger.debug(f"Coverage filter {min_coverage} kept {len(kept)} of {len(tiles)} tiles")
    return kept


def synth_corpus(n: int, size: int, seed: int) -> List[RasterPair]:
    """
    Generate a synthetic corpus of rectangle "buildings" over textured noise.

    Args:
        n: Number of rasters
        size: Raster edge length; a multiple of 32
        seed: Random seed; equal seeds give bit-identical corpora

    Returns:
        The generated raster pairs
    """
    if n < 1:
        raise GeosegError("invalid-config", f"corpus size must be >= 1, got {n}")
    if size < 32 or size % 32 != 0:
        raise GeosegError("invalid-size", f"size must be a positive multiple of 32, got {size}")

    rng = np.random.default_rng(seed)
    rows = np.arange(size)[:, None]
    cols = np.arange(size)[None, :]
    pairs = []
    for index in range(n):
        # Dark background with a soft gradient and per-pixel grain
        base = rng.uniform(40.0, 100.0)
        tint = rng.uniform(-12.0, 12.0, size=3)
        slope = rng.uniform(-20.0, 20.0, size=2) / size
        background = base + slope[0] * rows + slope[1] * cols
        image = background[:, :, None] + tint[None, None, :] + rng.normal(0.0, 10.0, size=(size, size, 3))

        mask = np.zeros((size, size), dtype=np.uint8)
        count = int(rng.integers(1, 5))
        brightness = rng.choice(np.arange(150, 250, 12), size=count, replace=False)
        for level in brightness:
            h = int(rng.integers(size // 8, size // 3 + 1))
            w = int(rng.integers(size // 8, size // 3 + 1))
            top = int(rng.integers(0, size - h + 1))
            left = int(rng.integers(0, size - w + 1))
            image[top:top + h, left:left + w, :] = level + rng.normal(0.0, 5.0, size=(h, w, 3))
            mask[top:top + h, left:left + w] = 1

        pairs.append(RasterPair(
            image=np.clip(np.rint(image), 0, 255).astype(np.uint8),
            mask=mask,
            id=f"synth{seed}_{index:04d}",
        ))

    logger.info(f"Generated {n} synthetic rasters of {size}x{size} (seed {seed})")
    return pairs


def _floor_count(n: int, fraction: float) -> int:
    return int(math.floor(n * fraction + 1e-9))


def split(tiles: Sequence[TileSample], fractions: Tuple[float, float, float], seed: int) -> DatasetSplit:
    """
    Shuffle tiles deterministically and partition them three ways.

    Validation and testing sizes are floor(n * fraction); the remainder goes
    to training.

    Args:
        tiles: Tiles to split; keys (source_id, offset) must be unique
        fractions: (train, val, test) fractions summing to 1
        seed: Shuffle seed

    Returns:
        The split
    """
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise GeosegError("invalid-fractions", f"need three nonnegative fractions, got {tuple(fractions)}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise GeosegError("invalid-fractions", f"fractions must sum to 1, got {sum(fractions)}")

    keys = {t.key for t in tiles}
    if len(keys) != len(tiles):
        raise GeosegError("duplicate-tiles", "tiles must be unique by (source_id, offset)")

    n = len(tiles)
    order = np.random.default_rng(seed).permutation(n)
    n_val = _floor_count(n, fractions[1])
    n_test = _floor_count(n, fractions[2])
    n_train = n - n_val - n_test

    shuffled = [tiles[i] for i in order]
    return DatasetSplit(
        train=shuffled[:n_train],
        val=shuffled[n_train:n_train + n_val],
        test=shuffled[n_train + n_val:],
        seed=seed,
    )


def prepare(
    pairs: Sequence[RasterPair],
    size: int = DEFAULT_TILE_SIZE,
    stride: Optional[int] = None,
    min_coverage: float = DEFAULT_MIN_COVERAGE,
    val_fraction: float = DEFAULT_VAL_FRACTION,
    seed: int = 0,
    test_ids: Optional[Iterable[str]] = None,
) -> DatasetSplit:
    """
    Run the full tiling protocol over a set of rasters.

    Rasters are divided into a training region and a testing region. Testing
    tiles are kept unfiltered; training-region tiles are coverage-filtered and
    then divided into training and validation tiles.

    Args:
        pairs: Source rasters
        size: Tile size in pixels
        stride: Window step; defaults to ``size``
        min_coverage: Coverage threshold for training-region tiles
        val_fraction: Share of filtered training-region tiles used for validation
        seed: Shuffle seed
        test_ids: Raster ids forming the testing region. If None, the second
            half of the sorted ids is used.

    Returns:
        The prepared split
    """
    if not 0.0 <= val_fraction <= 1.0:
        raise GeosegError("invalid-fractions", f"val_fraction must be in [0, 1], got {val_fraction}")

    ids = sorted(pair.id for pair in pairs)
    if test_ids is None:
        test_set = set(ids[(len(ids) + 1) // 2:])
    else:
        test_set = set(test_ids)
        unknown = sorted(test_set - set(ids))
        if unknown:
            raise GeosegError("unknown-ids", f"test ids not among the rasters: {', '.join(unknown)}")

    region_tiles: List[TileSample] = []
    test_tiles: List[TileSample] = []
    for pair in sorted(pairs, key=lambda p: p.id):
        tiles = tile(pair, size, stride)
        if pair.id in test_set:
            test_tiles.extend(tiles)
        else:
            region_tiles.extend(tiles)

    kept = filter_by_coverage(region_tiles, min_coverage)
    result = split(kept, (1.0 - val_fraction, val_fraction, 0.0), seed)
    result.test = test_tiles

    logger.info(
        f"Prepared {len(result.train)} train / {len(result.val)} val / {len(result.test)} test tiles "
        f"({len(region_tiles) - len(kept)} dropped by coverage < {min_coverage})"
    )
    return result


def _read_image(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def _read_mask(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return (np.asarray(img.convert("L")) >= 128).astype(np.uint8)


def _write_image(array: np.ndarray, path: Path) -> None:
    Image.fromarray(array).save(path)


def _write_mask(mask: np.ndarray, path: Path) -> None:
    Image.fromarray((mask * 255).astype(np.uint8)).save(path)


def load_pairs(directory: Union[str, Path]) -> List[RasterPair]:
    """
    Load raster pairs from ``<directory>/img/<id>.png`` and ``<directory>/msk/<id>.png``.

    Args:
        directory: Directory holding ``img/`` and ``msk/``

    Returns:
        Pairs sorted by id
    """
    directory = Path(directory)
    images = {p.stem: p for p in sorted((directory / "img").glob(f"*{IMAGE_EXT}"))}
    masks = {p.stem: p for p in sorted((directory / "msk").glob(f"*{IMAGE_EXT}"))}
    if not images and not masks:
        raise GeosegError("empty-dataset", f"no image/mask files under {directory}")

    unpaired = sorted(set(images) ^ set(masks))
    if unpaired:
        raise GeosegError("unpaired-files", f"ids without a matching image or mask: {', '.join(unpaired)}")

    pairs = [RasterPair(image=_read_image(images[i]), mask=_read_mask(masks[i]), id=i) for i in sorted(images)]
    logger.info(f"Loaded {len(pairs)} raster pairs from {directory}")
    return pairs


def save_pairs(pairs: Iterable[RasterPair], directory: Union[str, Path]) -> None:
    """Write raster pairs in the layout read by load_pairs."""
    directory = Path(directory)
    (directory / "img").mkdir(parents=True, exist_ok=True)
    (directory / "msk").mkdir(parents=True, exist_ok=True)
    for pair in pairs:
        _write_image(pair.image, directory / "img" / f"{pair.id}{IMAGE_EXT}")
        _write_mask(pair.mask, directory / "msk" / f"{pair.id}{IMAGE_EXT}")


def write_split(dataset: DatasetSplit, root: Union[str, Path]) -> Path:
    """
    Write a split as ``<root>/{train,val,test}/{img,msk}/`` plus a manifest.

    Args:
        dataset: The split to write
        root: Dataset root directory

    Returns:
        Path of the manifest file
    """
    root = Path(root)
    rows = []
    for split_name, tiles in dataset.parts().items():
        img_dir = root / split_name / "img"
        msk_dir = root / split_name / "msk"
        img_dir.mkdir(parents=True, exist_ok=True)
        msk_dir.mkdir(parents=True, exist_ok=True)
        for t in tiles:
            _write_image(t.image, img_dir / f"{t.name}{IMAGE_EXT}")
            _write_mask(t.mask, msk_dir / f"{t.name}{IMAGE_EXT}")
            rows.append({
                "split": split_name,
                "id": t.source_id,
                "row": t.offset[0],
                "col": t.offset[1],
                "coverage": repr(t.coverage),
            })

    manifest = root / MANIFEST_NAME
    with open(manifest, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=MANIFEST_FIELDS)
        writer.writeheader()
        writer.writerows(rows)

    logger.info(f"Wrote {len(rows)} tiles and manifest to {root}")
    return manifest


def read_split(root: Union[str, Path], seed: int = 0) -> DatasetSplit:
    """
    Read a split written by write_split.

    Args:
        root: Dataset root directory containing the manifest
        seed: Seed recorded on the returned split

    Returns:
        The split with tiles in manifest order
    """
    root = Path(root)
    manifest = root / MANIFEST_NAME
    if not manifest.exists():
        raise GeosegError("empty-dataset", f"no {MANIFEST_NAME} under {root}")

    dataset = DatasetSplit(seed=seed)
    parts = dataset.parts()
    with open(manifest, newline="") as f:
        for record in csv.DictReader(f):
            if record["split"] not in parts:
                raise GeosegError("bad-manifest", f"unknown split {record['split']!r}")
            offset = (int(record["row"]), int(record["col"]))
            stem = f"{record['id']}_{offset[0]}_{offset[1]}"
            mask = _read_mask(root / record["split"] / "msk" / f"{stem}{IMAGE_EXT}")
            parts[record["split"]].append(TileSample(
                image=_read_image(root / record["split"] / "img" / f"{stem}{IMAGE_EXT}"),
                mask=mask,
                source_id=record["id"],
                offset=offset,
                coverage=_coverage(mask),
            ))

    logger.info(f"Read dataset from {root}: {dataset.counts()}")
    return dataset


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    corpus = synth_corpus(4, 448, seed=0)
    prepared = prepare(corpus, size=224)
    print(prepared.counts())
