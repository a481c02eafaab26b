"""Semi-supervised Gaussian mixture model with component-class association.

The model is a mixture of L full-covariance Gaussians whose joint
log-likelihood sums two terms: unlabeled samples contribute the usual
mixture density, labeled samples contribute the mixture density with each
component's weight multiplied by P(class | component). Multiple components
may serve one class, so L >= K is allowed but not required.

EM alternates:

* E-step: posterior component memberships (responsibilities). For a
  labeled sample the posterior is additionally tilted by its class's
  column of the component-class table. All of it runs in log space with
  log-sum-exp, never touching raw densities.
* M-step: responsibility-weighted means, covariances and mixing weights
  over the union of both sample sets; the component-class table is
  re-estimated from labeled responsibilities alone, Laplace-smoothed so no
  class ever has exactly zero probability under a component.

Covariances get a scale-relative ridge eps * (trace/d) * I after every
M-step to keep them safely positive definite. All randomness (K-means++
seeding) flows from a single integer seed through numpy's PCG64 generator
(``np.random.default_rng``), so runs reproduce across platforms.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .dataio import FeatureMatrix, LabelSet
from .errors import (
    CapacityError,
    FormatError,
    InconsistentLabelError,
    NumericalFailureError,
    RangeError,
    TruncationError,
)

MODEL_MAGIC = b"SOGM"
MODEL_VERSION = 1
_HEADER = struct.Struct("<4sIIIId")

_LOG_2PI = np.log(2.0 * np.pi)

DEFAULT_REG_EPSILON = 1e-6
CLASS_TABLE_SMOOTHING = 1e-6
COLLAPSE_THRESHOLD = 1e-12
_LLOYD_MAX_ITER = 100


def _as_matrix(x, d: int | None = None, name: str = "features") -> np.ndarray:
    """Coerce a FeatureMatrix, array, or None (empty) to a float64 n x d array."""
    if x is None:
        if d is None:
            raise ValueError(f"{name}: cannot infer dimension for empty input")
        return np.zeros((0, d))
    arr = x.as64() if isinstance(x, FeatureMatrix) else np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if d is not None and arr.shape[1] != d:
        raise ValueError(f"{name} has dimension {arr.shape[1]}, expected {d}")
    return arr


def _as_labels(labels_l, n_l: int, n_classes: int) -> np.ndarray:
    if labels_l is None:
        labels = np.zeros(0, dtype=np.intp)
    else:
        labels = np.asarray(labels_l, dtype=np.intp)
    if labels.shape != (n_l,):
        raise ValueError(f"expected {n_l} class ids, got shape {labels.shape}")
    if n_l and (labels.min() < 1 or labels.max() > n_classes):
        raise RangeError(f"class ids must lie in [1, {n_classes}]")
    return labels


@dataclass(frozen=True)
class SgmmModel:
    """Mixture parameters plus the component-class table.

    weights: (L,) mixing coefficients, sum to 1.
    means: (L, d).
    covariances: (L, d, d), symmetric positive definite.
    class_given_component: (L, K) row-stochastic table P(class | component).
    reg_epsilon: dimensionless covariance ridge, applied as
        reg_epsilon * (trace/d) * I after every M-step.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    class_given_component: np.ndarray
    reg_epsilon: float = DEFAULT_REG_EPSILON

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def n_classes(self) -> int:
        return self.class_given_component.shape[1]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def validate(self) -> None:
        """Raise if any structural invariant is violated."""
        L, d = self.n_components, self.dim
        if self.weights.shape != (L,):
            raise ValueError(f"weights shape {self.weights.shape}, expected ({L},)")
        if self.covariances.shape != (L, d, d):
            raise ValueError("covariances shape does not match means")
        if self.class_given_component.shape[0] != L:
            raise ValueError("class table must have one row per component")
        if abs(self.weights.sum() - 1.0) > 1e-9 or (self.weights < 0).any():
            raise ValueError("mixing weights must be non-negative and sum to 1")
        rows = self.class_given_component.sum(axis=1)
        if (np.abs(rows - 1.0) > 1e-9).any() or (self.class_given_component < 0).any():
            raise ValueError("class table rows must be non-negative and sum to 1")
        for l in range(L):
            cov = self.covariances[l]
            if np.abs(cov - cov.T).max() > 1e-10:
                raise ValueError(f"covariance {l} is not symmetric")
            try:
                linalg.cholesky(cov, lower=True)
            except linalg.LinAlgError as exc:
                raise ValueError(f"covariance {l} is not positive definite") from exc


@dataclass(frozen=True)
class Responsibilities:
    """Per-sample, per-component posteriors; labeled rows are class-tilted."""

    unlabeled: np.ndarray
    labeled: np.ndarray

    def validate(self) -> None:
        for name, block in (("unlabeled", self.unlabeled), ("labeled", self.labeled)):
            if block.size == 0:
                continue
            if (block < 0).any() or (block > 1).any():
                raise ValueError(f"{name} responsibilities outside [0, 1]")
            if np.abs(block.sum(axis=1) - 1.0).max() > 1e-9:
                raise ValueError(f"{name} responsibility rows must sum to 1")


@dataclass(frozen=True)
class EmConfig:
    """EM stopping rule: cap on iterations plus an absolute log-likelihood
    improvement threshold."""

    max_iter: int = 200
    tol: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.tol < 0:
            raise ValueError(f"tol must be >= 0, got {self.tol}")


def _component_log_densities(x: np.ndarray, means: np.ndarray, covariances: np.ndarray) -> np.ndarray:
    """(n, L) matrix of per-component Gaussian log densities via Cholesky."""
    n, d = x.shape
    L = means.shape[0]
    out = np.empty((n, L))
    if n == 0:
        return out
    for l in range(L):
        chol = linalg.cholesky(covariances[l], lower=True)
        sol = linalg.solve_triangular(chol, (x - means[l]).T, lower=True)
        maha = np.einsum("ij,ij->j", sol, sol)
        log_det = 2.0 * np.log(np.diag(chol)).sum()
        out[:, l] = -0.5 * (d * _LOG_2PI + log_det + maha)
    return out


def _log_joint(model: SgmmModel, x: np.ndarray, class_column: np.ndarray | None = None) -> np.ndarray:
    """log[pi_l * density], optionally including log P(c_i | l) per row."""
    with np.errstate(divide="ignore"):
        lj = _component_log_densities(x, model.means, model.covariances) + np.log(model.weights)
        if class_column is not None and len(class_column):
            lj = lj + np.log(model.class_given_component[:, class_column - 1]).T
    return lj


def _normalize_log_rows(log_joint: np.ndarray, labeled: bool) -> tuple[np.ndarray, np.ndarray]:
    """(posteriors, per-row log normalizers) for one block."""
    if log_joint.shape[0] == 0:
        return np.zeros_like(log_joint), np.zeros((0, 1))
    norm = logsumexp(log_joint, axis=1, keepdims=True)
    if np.isneginf(norm).any():
        if labeled:
            bad = int(np.flatnonzero(np.isneginf(norm.ravel()))[0])
            raise InconsistentLabelError(
                f"labeled sample {bad} has zero posterior mass under every component"
            )
        raise NumericalFailureError("a sample has zero density under every component")
    return np.exp(log_joint - norm), norm


def _posteriors_and_ll(
    model: SgmmModel, xu: np.ndarray, xl: np.ndarray, labels: np.ndarray
) -> tuple[Responsibilities, float]:
    """One density pass yielding both the responsibilities and the joint
    log-likelihood (the row normalizers are exactly its per-sample terms)."""
    gamma_u, norm_u = _normalize_log_rows(_log_joint(model, xu), labeled=False)
    gamma_l, norm_l = _normalize_log_rows(_log_joint(model, xl, labels), labeled=True)
    ll = float(norm_u.sum() + norm_l.sum())
    return Responsibilities(unlabeled=gamma_u, labeled=gamma_l), ll


def e_step(model: SgmmModel, features_u, features_l, labels_l) -> Responsibilities:
    """Posterior component memberships for unlabeled and labeled samples."""
    d = model.dim
    xu = _as_matrix(features_u, d, "features_u")
    xl = _as_matrix(features_l, d, "features_l")
    labels = _as_labels(labels_l, xl.shape[0], model.n_classes)
    return _posteriors_and_ll(model, xu, xl, labels)[0]


def log_likelihood(model: SgmmModel, features_u, features_l, labels_l) -> float:
    """Joint log-likelihood: mixture term over unlabeled samples plus the
    class-weighted mixture term over labeled samples."""
    d = model.dim
    xu = _as_matrix(features_u, d, "features_u")
    xl = _as_matrix(features_l, d, "features_l")
    labels = _as_labels(labels_l, xl.shape[0], model.n_classes)
    total = 0.0
    if xu.shape[0]:
        total += logsumexp(_log_joint(model, xu), axis=1).sum()
    if xl.shape[0]:
        total += logsumexp(_log_joint(model, xl, labels), axis=1).sum()
    return float(total)


def _ridge(cov: np.ndarray, reg_epsilon: float) -> np.ndarray:
    """Scale-relative ridge; a component concentrated on one exact point has
    zero scatter, so fall back to a ridged identity to stay invertible."""
    d = cov.shape[0]
    scale = np.trace(cov) / d
    if scale <= 0.0:
        return np.eye(d) * (1.0 + reg_epsilon)
    return cov + reg_epsilon * scale * np.eye(d)


def m_step(
    resp: Responsibilities,
    features_u,
    features_l,
    labels_l,
    n_classes: int,
    *,
    reg_epsilon: float = DEFAULT_REG_EPSILON,
    prev_means: np.ndarray | None = None,
) -> SgmmModel:
    """Responsibility-weighted parameter update over both sample sets.

    Covariances are computed around the freshly updated means; passing
    ``prev_means`` switches to the variant that keeps the previous means
    in the scatter term (compatibility mode, sacrifices the monotonic
    likelihood guarantee).

    Components whose total responsibility falls below ``COLLAPSE_THRESHOLD``
    are rebuilt deterministically: mean at the sample the current model
    explains worst, covariance set to the global data covariance, weight
    1/N, with weights renormalized afterwards.
    """
    gamma_u = np.asarray(resp.unlabeled, dtype=np.float64)
    gamma_l = np.asarray(resp.labeled, dtype=np.float64)
    xu = _as_matrix(features_u) if features_u is not None else None
    xl = _as_matrix(features_l) if features_l is not None else None
    if xu is None and xl is None:
        raise ValueError("m_step needs at least one sample")
    d = (xu if xu is not None else xl).shape[1]
    xu = np.zeros((0, d)) if xu is None else xu
    xl = np.zeros((0, d)) if xl is None else xl
    if xl.shape[1] != d:
        raise ValueError(f"labeled features have dimension {xl.shape[1]}, expected {d}")
    labels = _as_labels(labels_l, xl.shape[0], n_classes)
    n_total = xu.shape[0] + xl.shape[0]
    if n_total == 0:
        raise ValueError("m_step needs at least one sample")
    if gamma_u.shape[0] != xu.shape[0] or gamma_l.shape[0] != xl.shape[0]:
        raise ValueError("responsibility blocks do not match the sample counts")
    L = gamma_u.shape[1] if gamma_u.shape[0] else gamma_l.shape[1]
    gamma_u = gamma_u.reshape(xu.shape[0], L)
    gamma_l = gamma_l.reshape(xl.shape[0], L)

    totals = gamma_u.sum(axis=0) + gamma_l.sum(axis=0)  # (L,)
    collapsed = np.flatnonzero(totals < COLLAPSE_THRESHOLD)
    safe_totals = np.where(totals < COLLAPSE_THRESHOLD, 1.0, totals)

    weighted_sum = gamma_u.T @ xu + gamma_l.T @ xl
    means = weighted_sum / safe_totals[:, None]

    centers = prev_means if prev_means is not None else means
    covariances = np.empty((L, d, d))
    for l in range(L):
        scatter = np.zeros((d, d))
        for x, gamma in ((xu, gamma_u), (xl, gamma_l)):
            if x.shape[0]:
                diff = x - centers[l]
                scatter += diff.T @ (diff * gamma[:, l : l + 1])
        cov = scatter / safe_totals[l]
        cov = 0.5 * (cov + cov.T)
        covariances[l] = _ridge(cov, reg_epsilon)

    weights = totals / n_total

    # class table from labeled responsibilities only, Laplace-smoothed
    counts = np.zeros((L, n_classes))
    if xl.shape[0]:
        one_hot = np.zeros((xl.shape[0], n_classes))
        one_hot[np.arange(xl.shape[0]), labels - 1] = 1.0
        counts = gamma_l.T @ one_hot
    class_table = (counts + CLASS_TABLE_SMOOTHING) / (
        counts.sum(axis=1, keepdims=True) + n_classes * CLASS_TABLE_SMOOTHING
    )

    if collapsed.size:
        x_all = np.vstack([xu, xl])
        gamma_all = np.vstack([gamma_u, gamma_l])
        global_mean = x_all.mean(axis=0)
        centered = x_all - global_mean
        global_cov = _ridge(centered.T @ centered / n_total, reg_epsilon)
        worst = int(np.argmin(gamma_all.max(axis=1)))
        for l in collapsed:
            means[l] = x_all[worst]
            covariances[l] = global_cov
            weights[l] = 1.0 / n_total
            class_table[l] = 1.0 / n_classes
        weights = weights / weights.sum()

    if not (
        np.isfinite(means).all()
        and np.isfinite(covariances).all()
        and np.isfinite(weights).all()
        and np.isfinite(class_table).all()
    ):
        raise NumericalFailureError("non-finite parameter produced by the M-step")

    return SgmmModel(
        weights=weights,
        means=means,
        covariances=covariances,
        class_given_component=class_table,
        reg_epsilon=reg_epsilon,
    )


def fit_em(
    model: SgmmModel,
    features_u,
    features_l,
    labels_l,
    cfg: EmConfig,
    *,
    literal_covariance: bool = False,
) -> tuple[SgmmModel, list[float]]:
    """Alternate E/M steps until the log-likelihood improvement drops below
    cfg.tol or cfg.max_iter updates have run.

    Returns the refined model and the log-likelihood trace (initial value
    first, one entry per update). ``literal_covariance`` selects the
    compatibility covariance update around the previous means.
    """
    d = model.dim
    xu = _as_matrix(features_u, d, "features_u")
    xl = _as_matrix(features_l, d, "features_l")
    labels = _as_labels(labels_l, xl.shape[0], model.n_classes)

    # each density pass serves double duty: posteriors for the next update
    # and the likelihood entry for the trace
    resp, ll = _posteriors_and_ll(model, xu, xl, labels)
    trace = [ll]
    for iteration in range(1, cfg.max_iter + 1):
        try:
            model = m_step(
                resp,
                xu,
                xl,
                labels,
                model.n_classes,
                reg_epsilon=model.reg_epsilon,
                prev_means=model.means if literal_covariance else None,
            )
        except NumericalFailureError as exc:
            raise NumericalFailureError(str(exc), iteration=iteration) from exc
        resp, ll_new = _posteriors_and_ll(model, xu, xl, labels)
        if not np.isfinite(ll_new):
            raise NumericalFailureError(
                f"log-likelihood became non-finite at iteration {iteration}",
                iteration=iteration,
            )
        trace.append(ll_new)
        if ll_new - ll < cfg.tol:
            break
        ll = ll_new
    return model, trace


def _kmeanspp_seed(x: np.ndarray, L: int, rng: np.random.Generator) -> np.ndarray:
    """Squared-distance-weighted seeding; degenerate all-zero distances fall
    back to the smallest unchosen index."""
    n = x.shape[0]
    centers = np.empty((L, x.shape[1]))
    chosen = np.zeros(n, dtype=bool)
    first = int(rng.integers(n))
    centers[0] = x[first]
    chosen[first] = True
    min_d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, L):
        total = min_d2.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=min_d2 / total))
        else:
            idx = int(np.flatnonzero(~chosen)[0])
        centers[j] = x[idx]
        chosen[idx] = True
        min_d2 = np.minimum(min_d2, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def _pairwise_sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        (x**2).sum(axis=1)[:, None]
        - 2.0 * x @ centers.T
        + (centers**2).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _lloyd(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Lloyd iterations to a stable assignment; empty clusters grab the point
    currently farthest from its own center."""
    n, L = x.shape[0], centers.shape[0]
    assign = np.full(n, -1)
    for _ in range(_LLOYD_MAX_ITER):
        d2 = _pairwise_sq_dists(x, centers)
        new_assign = d2.argmin(axis=1)
        own = d2[np.arange(n), new_assign]
        for l in range(L):
            if not (new_assign == l).any():
                far = int(np.argmax(own))
                new_assign[far] = l
                own[far] = -1.0
        if (new_assign == assign).all():
            break
        assign = new_assign
        for l in range(L):
            members = x[assign == l]
            if members.shape[0]:
                centers[l] = members.mean(axis=0)
    return assign


def kmeanspp_init(features, labels: LabelSet, L: int, seed: int, n_classes: int | None = None) -> SgmmModel:
    """Build a starting model from K-means++ plus Lloyd refinement.

    Component means are the cluster centroids, covariances the within-cluster
    scatter (ridged; degenerate single-point clusters fall back to a ridged
    identity), mixing weights the cluster-size fractions, and the class table
    the Laplace-smoothed class frequencies of each cluster's labeled members
    (uniform when a cluster has none).
    """
    x = _as_matrix(features, None, "features")
    n = x.shape[0]
    if n < L:
        raise CapacityError(f"cannot place {L} components on {n} samples")
    K = labels.n_classes if n_classes is None else n_classes
    if K < 1:
        raise ValueError("n_classes must be >= 1 (no labels seen and none given)")

    rng = np.random.default_rng(seed)
    centers = _kmeanspp_seed(x, L, rng)
    assign = _lloyd(x, centers)

    d = x.shape[1]
    weights = np.empty(L)
    means = np.empty((L, d))
    covariances = np.empty((L, d, d))
    counts = np.zeros((L, K))
    for idx, cls in labels.assignments.items():
        counts[assign[idx], cls - 1] += 1.0

    for l in range(L):
        members = x[assign == l]
        weights[l] = members.shape[0] / n
        means[l] = members.mean(axis=0)
        diff = members - means[l]
        scatter = diff.T @ diff / members.shape[0]
        covariances[l] = _ridge(0.5 * (scatter + scatter.T), DEFAULT_REG_EPSILON)

    class_table = (counts + CLASS_TABLE_SMOOTHING) / (
        counts.sum(axis=1, keepdims=True) + K * CLASS_TABLE_SMOOTHING
    )
    return SgmmModel(
        weights=weights,
        means=means,
        covariances=covariances,
        class_given_component=class_table,
    )


def predict_proba(model: SgmmModel, features) -> np.ndarray:
    """(n, K) row-stochastic class probabilities: responsibilities (mixture
    posterior, no label tilt) pushed through the component-class table."""
    x = _as_matrix(features, model.dim, "features")
    gamma, _ = _normalize_log_rows(_log_joint(model, x), labeled=False)
    return gamma @ model.class_given_component


def predict(model: SgmmModel, features) -> np.ndarray:
    """1-based class ids; ties resolve to the smallest class id."""
    return predict_proba(model, features).argmax(axis=1) + 1


def write_model(model: SgmmModel, path) -> None:
    """Persist as SOGM: header (L, K, d, ridge), then weights, means,
    covariances and the class table as little-endian float64."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                MODEL_MAGIC,
                MODEL_VERSION,
                model.n_components,
                model.n_classes,
                model.dim,
                model.reg_epsilon,
            )
        )
        for arr in (model.weights, model.means, model.covariances, model.class_given_component):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_model(path) -> SgmmModel:
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise TruncationError(f"{path}: file shorter than header")
    magic, version, L, K, d, reg_epsilon = _HEADER.unpack_from(raw)
    if magic != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MODEL_MAGIC!r}")
    if version != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    counts = (L, L * d, L * d * d, L * K)
    expected = _HEADER.size + 8 * sum(counts)
    if len(raw) != expected:
        raise TruncationError(f"{path}: expected {expected} bytes, found {len(raw)}")
    offset = _HEADER.size
    blocks = []
    for count in counts:
        blocks.append(np.frombuffer(raw, dtype="<f8", count=count, offset=offset).copy())
        offset += 8 * count
    return SgmmModel(
        weights=blocks[0],
        means=blocks[1].reshape(L, d),
        covariances=blocks[2].reshape(L, d, d),
        class_given_component=blocks[3].reshape(L, K),
        reg_epsilon=reg_epsilon,
    )
