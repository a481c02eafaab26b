"""Dataset-scale checks that need real extracted features or the real image
archives; they are skipped unless the corresponding environment variables
point at the files. The offline suite never depends on these.

Expected variables:

  SEMIGMM_CIFAR10_DIR    directory with train.sofb/train_labels.csv and
                         test.sofb/test_labels.csv extracted from CIFAR-10
  SEMIGMM_CIFAR100_DIR   same layout for CIFAR-100
  SEMIGMM_STL10_DIR      directory with train.bin/test.bin/manifest.toml
                         holding the raw packed image records
"""

import logging
import os
from pathlib import Path

import pytest

from semigmm import dataio, dedup, pca, pipeline, sgmm


def _dataset_dir(var):
    value = os.environ.get(var)
    if not value:
        pytest.skip(f"{var} not set; dataset-scale check skipped")
    return Path(value)


def _run_config(root, out, components, pca_dim, per_class):
    return pipeline.RunConfig(
        features=root / "train.sofb",
        labels=root / "train_labels.csv",
        test_features=root / "test.sofb",
        test_labels=root / "test_labels.csv",
        out_dir=out,
        per_class=per_class,
        n_components=components,
        pca_dim=pca_dim,
        phase1=sgmm.EmConfig(max_iter=200, tol=1.0),
        phase2=sgmm.EmConfig(max_iter=200, tol=1.0),
    )


def test_cifar10_40_labels(tmp_path):
    root = _dataset_dir("SEMIGMM_CIFAR10_DIR")
    cfg = _run_config(root, tmp_path, components=10, pca_dim=60, per_class=4)
    result = pipeline.run_repeated(cfg, [0, 1, 2])
    assert abs(result.mean_error - 0.0351) <= 0.010


def test_cifar10_explained_variance(tmp_path):
    root = _dataset_dir("SEMIGMM_CIFAR10_DIR")
    train = dataio.read_features(root / "train.sofb")
    model = pca.fit_pca(train, 60)
    _, cumulative = pca.explained_variance_report(model)
    assert cumulative[-1] >= 0.60


def test_cifar100_400_labels(tmp_path):
    root = _dataset_dir("SEMIGMM_CIFAR100_DIR")
    cfg = _run_config(root, tmp_path, components=100, pca_dim=60, per_class=4)
    result = pipeline.run_repeated(cfg, [0, 1, 2])
    assert abs(result.mean_error - 0.2659) <= 0.025


def test_stl10_duplicate_scan(tmp_path, caplog):
    root = _dataset_dir("SEMIGMM_STL10_DIR")
    report = dedup.run_dedup(
        root / "train.bin", root / "test.bin", root / "manifest.toml"
    )
    # the CleanSTL-10 release names 7,545 removed samples, yet its stated
    # remaining count (90,455 of 100,000) implies 9,545; accept either and log
    count = len(report.duplicates)
    logging.getLogger(__name__).warning(
        "stl10 duplicate count %d (release notes imply 7545 or 9545)", count
    )
    assert count in (7545, 9545) or 7000 <= count <= 10000
