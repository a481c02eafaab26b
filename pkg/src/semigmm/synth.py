"""Isotropic Gaussian blob generator for offline runs and tests.

Produces train/test feature files plus full label CSVs in the package's
own formats, so every pipeline path can be exercised without any real
dataset. Class means are drawn from a centered Gaussian and re-drawn at
growing radius until all pairwise distances reach ``separation * sigma``;
everything is deterministic under the seed (PCG64).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import FeatureMatrix, LabelSet, write_features, write_labels

_MEAN_DRAW_ATTEMPTS = 200


@dataclass(frozen=True)
class BlobSpec:
    n_classes: int = 3
    dim: int = 10
    train_per_class: int = 500
    test_per_class: int = 100
    sigma: float = 1.0
    separation: float = 8.0
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 1 or self.dim < 1:
            raise ValueError("n_classes and dim must be >= 1")
        if self.train_per_class < 1 or self.test_per_class < 0:
            raise ValueError("train_per_class must be >= 1, test_per_class >= 0")
        if self.sigma <= 0 or self.separation <= 0:
            raise ValueError("sigma and separation must be positive")


def _draw_means(spec: BlobSpec, rng: np.random.Generator) -> np.ndarray:
    min_dist = spec.separation * spec.sigma
    radius = 2.0 * min_dist
    for _ in range(_MEAN_DRAW_ATTEMPTS):
        means = rng.normal(scale=radius, size=(spec.n_classes, spec.dim))
        ok = True
        for a in range(spec.n_classes):
            for b in range(a + 1, spec.n_classes):
                if np.linalg.norm(means[a] - means[b]) < min_dist:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return means
        radius *= 1.5
    raise RuntimeError("could not place blob means at the requested separation")


def make_blobs(spec: BlobSpec) -> tuple[FeatureMatrix, LabelSet, FeatureMatrix, LabelSet]:
    """(train features, train labels, test features, test labels); every
    sample is labeled, rows shuffled within each split."""
    rng = np.random.default_rng(spec.seed)
    means = _draw_means(spec, rng)

    def sample_split(per_class: int) -> tuple[FeatureMatrix, LabelSet]:
        points = []
        classes = []
        for cls in range(spec.n_classes):
            points.append(
                rng.normal(scale=spec.sigma, size=(per_class, spec.dim)) + means[cls]
            )
            classes.extend([cls + 1] * per_class)
        x = np.vstack(points)
        y = np.asarray(classes)
        order = rng.permutation(x.shape[0])
        x, y = x[order], y[order]
        labels = LabelSet({i: int(y[i]) for i in range(len(y))}, len(y))
        return FeatureMatrix(x), labels

    train_x, train_y = sample_split(spec.train_per_class)
    test_x, test_y = sample_split(spec.test_per_class) if spec.test_per_class else (None, None)
    return train_x, train_y, test_x, test_y


def write_blob_dataset(spec: BlobSpec, out_dir) -> dict[str, Path]:
    """Emit train/test feature and label files; returns the path map."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_x, train_y, test_x, test_y = make_blobs(spec)
    paths = {
        "features": out / "train.sofb",
        "labels": out / "train_labels.csv",
        "test_features": out / "test.sofb",
        "test_labels": out / "test_labels.csv",
    }
    write_features(train_x, paths["features"])
    write_labels(train_y, paths["labels"])
    if test_x is not None:
        write_features(test_x, paths["test_features"])
        write_labels(test_y, paths["test_labels"])
    return paths
