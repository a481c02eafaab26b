"""Exact-duplicate detection between a train and a test image set.

Images live in packed binary record files (fixed-size raw pixel records,
no codec involved) described by a tiny TOML manifest. Every test image's
pixel bytes are hashed into a lookup table; the train set is then scanned
in batches, and any train image whose digest appears in the table is
recorded as a duplicate while the rest keep their indices. Hashing is
sha256 over the exact byte sequence in row-major, channel-interleaved
layout, so equal pixel content always collides and nothing else does in
practice. Batch size never changes the outcome.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import RangeError, TruncationError

logger = logging.getLogger(__name__)

DIGEST_BYTES = 32


@dataclass(frozen=True)
class ImageHash:
    digest: bytes

    def __post_init__(self):
        if len(self.digest) != DIGEST_BYTES:
            raise ValueError(f"digest must be {DIGEST_BYTES} bytes, got {len(self.digest)}")

    @property
    def hex(self) -> str:
        return self.digest.hex()


@dataclass(frozen=True)
class ImageManifest:
    """Geometry shared by both record files plus each file's image count."""

    width: int
    height: int
    channels: int
    train_count: int
    test_count: int

    @property
    def record_size(self) -> int:
        return self.width * self.height * self.channels


@dataclass(frozen=True)
class TestIndex:
    """digest -> smallest test index holding it, plus intra-test collisions."""

    by_digest: dict[bytes, int]
    intra_test_duplicates: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class DedupReport:
    """duplicates: (train index, test index, digest hex) triples;
    valid_indices: every other train index, ascending. The two always
    partition the scanned train range."""

    duplicates: tuple[tuple[int, int, str], ...]
    valid_indices: tuple[int, ...]


def hash_image(pixels: bytes, width: int, height: int, channels: int) -> ImageHash:
    """sha256 of the raw pixel buffer; rejects buffers of the wrong length."""
    expected = width * height * channels
    if len(pixels) != expected:
        raise ValueError(
            f"pixel buffer has {len(pixels)} bytes, expected {expected} "
            f"({width}x{height}x{channels})"
        )
    return ImageHash(hashlib.sha256(pixels).digest())


def read_manifest(path) -> ImageManifest:
    path = Path(path)
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    try:
        manifest = ImageManifest(
            width=int(data["width"]),
            height=int(data["height"]),
            channels=int(data["channels"]),
            train_count=int(data["train"]["count"]),
            test_count=int(data["test"]["count"]),
        )
    except KeyError as exc:
        raise KeyError(f"{path}: manifest is missing key {exc}") from exc
    for name, value in (
        ("width", manifest.width),
        ("height", manifest.height),
        ("channels", manifest.channels),
    ):
        if value < 1:
            raise RangeError(f"{path}: {name} must be >= 1, got {value}")
    if manifest.train_count < 0 or manifest.test_count < 0:
        raise RangeError(f"{path}: image counts must be >= 0")
    return manifest


def iter_image_batches(
    path, count: int, record_size: int, batch_size: int
) -> Iterator[list[bytes]]:
    """Yield lists of raw pixel records; validates the file size up front."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    path = Path(path)
    actual = path.stat().st_size
    if actual != count * record_size:
        raise TruncationError(
            f"{path}: expected {count} records of {record_size} bytes "
            f"({count * record_size} total), file has {actual}"
        )
    with open(path, "rb") as fh:
        remaining = count
        while remaining > 0:
            take = min(batch_size, remaining)
            blob = fh.read(take * record_size)
            if len(blob) != take * record_size:
                raise TruncationError(f"{path}: short read at record {count - remaining}")
            yield [blob[i * record_size : (i + 1) * record_size] for i in range(take)]
            remaining -= take


def build_test_index(test_images: Iterable[bytes], width: int, height: int, channels: int) -> TestIndex:
    """Hash every test image; intra-test duplicates keep the smallest index."""
    by_digest: dict[bytes, int] = {}
    collisions: list[tuple[int, int]] = []
    for index, pixels in enumerate(test_images):
        digest = hash_image(pixels, width, height, channels).digest
        if digest in by_digest:
            collisions.append((by_digest[digest], index))
        else:
            by_digest[digest] = index
    if collisions:
        logger.info("test set contains %d internal duplicate(s)", len(collisions))
    return TestIndex(by_digest=by_digest, intra_test_duplicates=tuple(collisions))


def scan_train(
    train_batches: Iterable[Sequence[bytes]],
    index: TestIndex,
    width: int,
    height: int,
    channels: int,
) -> DedupReport:
    """Classify every train image as duplicate-of-test or valid."""
    duplicates: list[tuple[int, int, str]] = []
    valid: list[int] = []
    position = 0
    for batch in train_batches:
        for pixels in batch:
            h = hash_image(pixels, width, height, channels)
            test_idx = index.by_digest.get(h.digest)
            if test_idx is None:
                valid.append(position)
            else:
                duplicates.append((position, test_idx, h.hex))
            position += 1
    return DedupReport(duplicates=tuple(duplicates), valid_indices=tuple(valid))


def write_report(report: DedupReport, path) -> bool:
    """Write the duplicate CSV; skipped entirely when there are none.

    Returns True iff a file was written.
    """
    if not report.duplicates:
        logger.info("no duplicates found; report %s not written", path)
        return False
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("train_index,test_index,hash\n")
        for train_idx, test_idx, digest_hex in report.duplicates:
            fh.write(f"{train_idx},{test_idx},{digest_hex}\n")
    return True


def write_valid_indices(report: DedupReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for idx in report.valid_indices:
            fh.write(f"{idx}\n")


def run_dedup(train_path, test_path, manifest_path, batch_size: int = 1000) -> DedupReport:
    """End-to-end scan of two packed record files under one manifest."""
    manifest = read_manifest(manifest_path)
    record = manifest.record_size
    test_images = (
        img
        for batch in iter_image_batches(test_path, manifest.test_count, record, batch_size)
        for img in batch
    )
    index = build_test_index(test_images, manifest.width, manifest.height, manifest.channels)
    train_batches = iter_image_batches(train_path, manifest.train_count, record, batch_size)
    report = scan_train(train_batches, index, manifest.width, manifest.height, manifest.channels)
    logger.info(
        "dedup: %d duplicates, %d valid of %d train images",
        len(report.duplicates),
        len(report.valid_indices),
        manifest.train_count,
    )
    return report
