"""Feature-matrix and label file I/O.

Feature files are little-endian binary: 4-byte magic ``SOFB``, u32 format
version, u32 row count n, u32 column count d, then n*d float32 values in
row-major order. Labels are plain CSV (``index,class`` with a header line)
so fixtures stay hand-editable. Class ids are 1-based on every external
surface.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CapacityError, DataError, FormatError, RangeError, TruncationError

FEATURE_MAGIC = b"SOFB"
FEATURE_VERSION = 1
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class FeatureMatrix:
    """n x d matrix of feature vectors.

    Values are stored as float32 (matching the on-disk payload); use
    :meth:`as64` to get the float64 view all numerical code works on.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float32, order="C")
        if arr.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"feature matrix must be at least 1x1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise DataError("feature matrix contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def as64(self) -> np.ndarray:
        return self.values.astype(np.float64)

    def rows(self, indices) -> np.ndarray:
        """float64 copy of the selected rows (possibly empty)."""
        idx = np.asarray(indices, dtype=np.intp)
        return self.values[idx].astype(np.float64).reshape(len(idx), self.d)


@dataclass(frozen=True)
class LabelSet:
    """Partial map sample-index -> class-id in {1..K}.

    Unlisted indices are unlabeled. K is the maximum observed class id;
    n is the number of rows in the matrix the labels refer to.
    """

    assignments: dict[int, int]
    n: int
    n_classes: int = field(init=False)

    def __post_init__(self):
        k = 0
        for idx, cls in self.assignments.items():
            if not 0 <= idx < self.n:
                raise RangeError(f"label index {idx} outside [0, {self.n})")
            if cls < 1:
                raise RangeError(f"class id {cls} below 1 at index {idx}")
            k = max(k, cls)
        object.__setattr__(self, "assignments", dict(self.assignments))
        object.__setattr__(self, "n_classes", k)

    def __len__(self) -> int:
        return len(self.assignments)


def write_features(m: FeatureMatrix, path) -> None:
    """Write ``m`` to ``path``; round-trips bit-exactly through read_features."""
    path = Path(path)
    header = _HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, m.n, m.d)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(m.values.tobytes(order="C"))
    except OSError as exc:
        raise OSError(f"cannot write feature file {path}: {exc}") from exc


def read_features(path) -> FeatureMatrix:
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise TruncationError(f"{path}: file shorter than header ({len(raw)} bytes)")
    magic, version, n, d = _HEADER.unpack_from(raw)
    if magic != FEATURE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {FEATURE_MAGIC!r}")
    if version != FEATURE_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if n < 1 or d < 1:
        raise FormatError(f"{path}: header declares empty matrix ({n}x{d})")
    expected = _HEADER.size + 4 * n * d
    if len(raw) != expected:
        raise TruncationError(
            f"{path}: header declares {n}x{d} ({expected} bytes) but file has {len(raw)}"
        )
    values = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(n, d)
    if not np.isfinite(values).all():
        raise DataError(f"{path}: payload contains non-finite values")
    return FeatureMatrix(values)


def read_labels(path, n: int) -> LabelSet:
    """Parse an ``index,class`` CSV into a LabelSet over n samples.

    An empty file (or a bare header) yields a fully-unlabeled set.
    """
    path = Path(path)
    assignments: dict[int, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (lineno == 1 and row[0].strip().lower() == "index"):
                continue
            if len(row) != 2:
                raise FormatError(f"{path}:{lineno}: expected 'index,class', got {row!r}")
            try:
                idx, cls = int(row[0]), int(row[1])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-integer field: {exc}") from exc
            if idx in assignments:
                raise FormatError(f"{path}:{lineno}: duplicate index {idx}")
            if not 0 <= idx < n:
                raise RangeError(f"{path}:{lineno}: index {idx} outside [0, {n})")
            if cls < 1:
                raise RangeError(f"{path}:{lineno}: class id {cls} below 1")
            assignments[idx] = cls
    return LabelSet(assignments, n)


def write_labels(labels: LabelSet, path) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "class"])
        for idx in sorted(labels.assignments):
            writer.writerow([idx, labels.assignments[idx]])


def split_labeled(
    m: FeatureMatrix, labels: LabelSet, per_class: int, seed: int
) -> tuple[list[int], list[int]]:
    """Pick per_class labeled indices per class, uniformly without replacement.

    Returns (labeled, unlabeled): the labeled list holds the selected indices
    (sorted); everything else, including labeled-but-unselected samples whose
    labels are deliberately dropped, lands in the unlabeled list. Together
    they partition [0, n). Deterministic in ``seed`` (PCG64).
    """
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    if labels.n != m.n:
        raise ValueError(f"label set covers {labels.n} samples, matrix has {m.n}")
    by_class: dict[int, list[int]] = {}
    for idx in sorted(labels.assignments):
        by_class.setdefault(labels.assignments[idx], []).append(idx)

    rng = np.random.default_rng(seed)
    chosen: list[int] = []
    for cls in range(1, labels.n_classes + 1):
        candidates = by_class.get(cls, [])
        if len(candidates) < per_class:
            raise CapacityError(
                f"class {cls} has {len(candidates)} labeled candidates, need {per_class}"
            )
        picked = rng.choice(len(candidates), size=per_class, replace=False)
        chosen.extend(candidates[i] for i in picked)

    chosen_set = set(chosen)
    unlabeled = [i for i in range(m.n) if i not in chosen_set]
    return sorted(chosen), unlabeled
