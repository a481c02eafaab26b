"""PCA reduction with explained-variance reporting.

Fit once on the union of labeled and unlabeled training features; test
data is always transformed by the training-fit model, never refit. The
covariance uses the unbiased 1/(n-1) estimator, and each principal
direction's sign is fixed so its largest-magnitude entry is positive,
which makes repeated fits on identical input bit-identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import FeatureMatrix
from .errors import DegenerateDataError, FormatError, TruncationError

PCA_MAGIC = b"SOPC"
PCA_VERSION = 1
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class PcaModel:
    """Mean vector plus the top-k eigenpairs of the sample covariance.

    ``basis`` rows are principal directions in descending eigenvalue
    order; ``explained_variance_ratio[j]`` is eigenvalue j divided by the
    total variance (sum of all input-space eigenvalues, retained or not).
    """

    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    explained_variance_ratio: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.basis.shape[1]

    @property
    def target_dim(self) -> int:
        return self.basis.shape[0]


def fit_pca(m: FeatureMatrix, target_dim: int) -> PcaModel:
    """Fit PCA on ``m``, keeping the top ``target_dim`` eigenpairs.

    Requires 1 <= target_dim <= min(n-1, d); raises DegenerateDataError
    when the data has zero variance in every direction.
    """
    n, d = m.n, m.d
    limit = min(n - 1, d)
    if not 1 <= target_dim <= limit:
        raise ValueError(
            f"target_dim must be in [1, {limit}] for a {n}x{d} matrix, got {target_dim}"
        )
    x = m.as64()
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)

    eigvals, eigvecs = np.linalg.eigh(cov)
    # eigh returns ascending order; stable sort keeps original axis order on ties
    order = np.argsort(-eigvals, kind="stable")
    eigvals = np.clip(eigvals[order], 0.0, None)
    total = eigvals.sum()
    if total <= 0.0:
        raise DegenerateDataError("input has zero variance; PCA is undefined")

    basis = eigvecs[:, order[:target_dim]].T.copy()
    for row in basis:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    retained = eigvals[:target_dim]
    return PcaModel(
        mean=mean,
        basis=basis,
        eigenvalues=retained,
        explained_variance_ratio=retained / total,
    )


def transform(model: PcaModel, m: FeatureMatrix) -> FeatureMatrix:
    """Project ``m`` onto the model's basis after centering."""
    if m.d != model.input_dim:
        raise ValueError(f"matrix has d={m.d}, model expects {model.input_dim}")
    projected = (m.as64() - model.mean) @ model.basis.T
    return FeatureMatrix(projected)


def explained_variance_report(model: PcaModel) -> tuple[list[float], list[float]]:
    """Per-dimension explained-variance ratios and their running cumulative sum."""
    ratios = [float(r) for r in model.explained_variance_ratio]
    cumulative = [float(c) for c in np.cumsum(model.explained_variance_ratio)]
    return ratios, cumulative


def write_pca(model: PcaModel, path) -> None:
    """Persist the model: SOPC header, then mean, eigenvalues, ratios, basis as f64."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(PCA_MAGIC, PCA_VERSION, model.input_dim, model.target_dim))
        fh.write(np.ascontiguousarray(model.mean, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.eigenvalues, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.explained_variance_ratio, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.basis, dtype="<f8").tobytes())


def read_pca(path) -> PcaModel:
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise TruncationError(f"{path}: file shorter than header")
    magic, version, input_dim, target_dim = _HEADER.unpack_from(raw)
    if magic != PCA_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {PCA_MAGIC!r}")
    if version != PCA_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 8 * (input_dim + 2 * target_dim + target_dim * input_dim)
    if len(raw) != expected:
        raise TruncationError(f"{path}: expected {expected} bytes, found {len(raw)}")
    offset = _HEADER.size
    mean = np.frombuffer(raw, dtype="<f8", count=input_dim, offset=offset).copy()
    offset += 8 * input_dim
    eigenvalues = np.frombuffer(raw, dtype="<f8", count=target_dim, offset=offset).copy()
    offset += 8 * target_dim
    ratios = np.frombuffer(raw, dtype="<f8", count=target_dim, offset=offset).copy()
    offset += 8 * target_dim
    basis = (
        np.frombuffer(raw, dtype="<f8", count=target_dim * input_dim, offset=offset)
        .reshape(target_dim, input_dim)
        .copy()
    )
    return PcaModel(mean=mean, basis=basis, eigenvalues=eigenvalues, explained_variance_ratio=ratios)
