"""Semi-supervised softmax-head baseline for ablation runs.

A single linear layer over the (already reduced) features. Labeled samples
contribute standard cross-entropy; unlabeled samples contribute a
confidence-gated self-training term: each sample's pseudo-class is its
current argmax, it counts only when its confidence strictly exceeds tau,
and the mean divides by the full unlabeled count, confident or not. The
unsupervised term is scaled by a weight that ramps linearly from zero to
lambda_max over t_ramp steps. Training is plain minibatch gradient descent
with analytic gradients; pseudo-classes are recomputed from the current
parameters at every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailureError
from .sgmm import _as_matrix


@dataclass(frozen=True)
class SoftmaxHead:
    """Affine scorer: weight_matrix (K, d) and bias (K,)."""

    weight_matrix: np.ndarray
    bias: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.weight_matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.weight_matrix.shape[1]


@dataclass(frozen=True)
class BaselineConfig:
    lambda_max: float = 1.0
    t_ramp: int | None = None  # None -> half the total step count
    tau: float = 0.95
    learning_rate: float = 0.1
    epochs: int = 100
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.lambda_max < 0:
            raise ValueError(f"lambda_max must be >= 0, got {self.lambda_max}")
        if self.t_ramp is not None and self.t_ramp < 1:
            raise ValueError(f"t_ramp must be >= 1, got {self.t_ramp}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


def _log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _scores(head: SoftmaxHead, x: np.ndarray) -> np.ndarray:
    return x @ head.weight_matrix.T + head.bias


def head_proba(head: SoftmaxHead, features) -> np.ndarray:
    """Row-stochastic softmax of the affine scores (max-shift stabilized)."""
    x = _as_matrix(features, head.dim)
    return np.exp(_log_softmax(_scores(head, x)))


def supervised_loss(head: SoftmaxHead, features_l, labels_l) -> float:
    """Mean negative log-probability of the true classes."""
    x = _as_matrix(features_l, head.dim)
    if x.shape[0] == 0:
        raise ValueError("supervised loss needs a non-empty labeled set")
    labels = np.asarray(labels_l, dtype=np.intp)
    logp = _log_softmax(_scores(head, x))
    return float(-logp[np.arange(x.shape[0]), labels - 1].mean())


def supervised_grad(head: SoftmaxHead, features_l, labels_l) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of supervised_loss w.r.t. (weight_matrix, bias)."""
    x = _as_matrix(features_l, head.dim)
    labels = np.asarray(labels_l, dtype=np.intp)
    p = np.exp(_log_softmax(_scores(head, x)))
    p[np.arange(x.shape[0]), labels - 1] -= 1.0
    p /= x.shape[0]
    return p.T @ x, p.sum(axis=0)


def unsupervised_loss(head: SoftmaxHead, features_u, tau: float) -> float:
    """Confidence-gated self-training loss, averaged over ALL unlabeled
    samples (the denominator ignores how many passed the gate)."""
    x = _as_matrix(features_u, head.dim)
    if x.shape[0] == 0:
        return 0.0
    logp = _log_softmax(_scores(head, x))
    best = logp.argmax(axis=1)
    top = logp[np.arange(x.shape[0]), best]
    confident = np.exp(top) > tau
    return float(-(top * confident).sum() / x.shape[0])


def unsupervised_grad(head: SoftmaxHead, features_u, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of unsupervised_loss; the gate and the pseudo-class are
    treated as constants of the current parameters."""
    x = _as_matrix(features_u, head.dim)
    if x.shape[0] == 0:
        zeros = np.zeros_like(head.weight_matrix)
        return zeros, np.zeros_like(head.bias)
    logp = _log_softmax(_scores(head, x))
    best = logp.argmax(axis=1)
    confident = np.exp(logp[np.arange(x.shape[0]), best]) > tau
    ds = np.exp(logp)
    ds[np.arange(x.shape[0]), best] -= 1.0
    ds *= confident[:, None]
    ds /= x.shape[0]
    return ds.T @ x, ds.sum(axis=0)


def ramp_weight(t: int, cfg: BaselineConfig, t_ramp: int | None = None) -> float:
    """lambda(t) = lambda_max * min(1, t / t_ramp); zero at t = 0."""
    ramp = cfg.t_ramp if t_ramp is None else t_ramp
    if ramp is None:
        raise ValueError("t_ramp unresolved; pass it explicitly or set it in the config")
    return cfg.lambda_max * min(1.0, t / ramp)


def train_baseline(
    features_l, labels_l, features_u, cfg: BaselineConfig
) -> tuple[SoftmaxHead, list[float]]:
    """Minibatch gradient descent on the combined loss.

    Returns the final head and the per-epoch trace of the full-data total
    loss. Deterministic under cfg.seed: labeled and unlabeled shuffles draw
    from independent child generators, so the unlabeled stream never
    perturbs the labeled one (lambda_max = 0 reproduces supervised-only
    training exactly).
    """
    xl = _as_matrix(features_l)
    labels = np.asarray(labels_l, dtype=np.intp)
    if xl.shape[0] == 0:
        raise ValueError("training needs a non-empty labeled set")
    xu = _as_matrix(features_u) if features_u is not None else np.zeros((0, xl.shape[1]))
    n_l, d = xl.shape
    n_u = xu.shape[0]
    n_classes = int(labels.max())

    seq_l, seq_u = np.random.SeedSequence(cfg.seed).spawn(2)
    rng_l, rng_u = np.random.default_rng(seq_l), np.random.default_rng(seq_u)

    steps_per_epoch = -(-n_l // cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    t_ramp = cfg.t_ramp if cfg.t_ramp is not None else max(1, total_steps // 2)

    weights = np.zeros((n_classes, d))
    bias = np.zeros(n_classes)
    step = 0
    trace: list[float] = []
    for _ in range(cfg.epochs):
        order_l = rng_l.permutation(n_l)
        order_u = rng_u.permutation(n_u) if n_u else np.zeros(0, dtype=np.intp)
        for s in range(steps_per_epoch):
            head = SoftmaxHead(weight_matrix=weights, bias=bias)
            batch_l = order_l[s * cfg.batch_size : (s + 1) * cfg.batch_size]
            dw, db = supervised_grad(head, xl[batch_l], labels[batch_l])
            lam = ramp_weight(step, cfg, t_ramp)
            if lam > 0.0 and n_u:
                start = (s * cfg.batch_size) % n_u
                batch_u = np.take(order_u, range(start, start + min(cfg.batch_size, n_u)), mode="wrap")
                dwu, dbu = unsupervised_grad(head, xu[batch_u], cfg.tau)
                dw = dw + lam * dwu
                db = db + lam * dbu
            weights = weights - cfg.learning_rate * dw
            bias = bias - cfg.learning_rate * db
            step += 1
        head = SoftmaxHead(weight_matrix=weights, bias=bias)
        lam = ramp_weight(step, cfg, t_ramp)
        loss = supervised_loss(head, xl, labels)
        if lam > 0.0 and n_u:
            loss += lam * unsupervised_loss(head, xu, cfg.tau)
        if not np.isfinite(loss):
            raise NumericalFailureError(
                f"non-finite loss after step {step}", iteration=step
            )
        trace.append(loss)
    return SoftmaxHead(weight_matrix=weights, bias=bias), trace
