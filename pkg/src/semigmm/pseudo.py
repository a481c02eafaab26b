"""One-shot pseudo-label generation.

After the first EM phase converges, unlabeled samples are scored once:
class probabilities come from the fitted mixture, confidence is the row
maximum. Samples above the confidence threshold enter per-class candidate
lists sorted by confidence, and proportional sampling caps every class at
the same count (the minimum of floor(alpha * |candidates|) across classes)
so the augmentation set stays balanced. There is no second round; the
pipeline enforces that this runs exactly once per run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ConsistencyError
from .sgmm import SgmmModel, predict_proba


@dataclass(frozen=True)
class PseudoConfig:
    """tau: confidence threshold in (0, 1); alpha: sampling ratio in (0, 1]
    (1 keeps every candidate, i.e. disables subsampling)."""

    tau: float = 0.95
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")


@dataclass(frozen=True)
class ScoreTable:
    """Per-sample class probabilities and their row maxima."""

    proba: np.ndarray
    confidence: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.proba.shape[1]


@dataclass(frozen=True)
class PseudoLabel:
    index: int
    assigned_class: int
    confidence: float


@dataclass(frozen=True)
class PseudoLabelSet:
    """Balanced augmentation set: exactly per_class_count entries per class."""

    entries: tuple[PseudoLabel, ...]
    per_class_count: int
    warning: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        indices = [e.index for e in self.entries]
        if len(set(indices)) != len(indices):
            raise ValueError("pseudo-label set contains a duplicate sample index")
        per_class: dict[int, int] = {}
        for e in self.entries:
            per_class[e.assigned_class] = per_class.get(e.assigned_class, 0) + 1
        if any(count != self.per_class_count for count in per_class.values()):
            raise ValueError("pseudo-label set is not class-balanced")

    def __len__(self) -> int:
        return len(self.entries)


def score_unlabeled(model: SgmmModel, features_u) -> ScoreTable:
    """Class-probability rows and confidences for every unlabeled sample."""
    proba = predict_proba(model, features_u)
    return ScoreTable(proba=proba, confidence=proba.max(axis=1))


def build_candidates(
    scores: ScoreTable, cfg: PseudoConfig, n_classes: int
) -> list[list[tuple[int, float]]]:
    """Per-class candidate lists of (sample index, confidence).

    A sample lands in the list of its argmax class (ties to the smallest
    class id) iff its confidence strictly exceeds tau. Lists are sorted by
    confidence descending, equal confidences by ascending sample index.
    """
    if scores.n_classes != n_classes:
        raise ValueError(f"score table has {scores.n_classes} classes, expected {n_classes}")
    best = scores.proba.argmax(axis=1)
    candidates: list[list[tuple[int, float]]] = [[] for _ in range(n_classes)]
    for i in range(scores.proba.shape[0]):
        xi = float(scores.confidence[i])
        if xi > cfg.tau:
            candidates[int(best[i])].append((i, xi))
    for bucket in candidates:
        bucket.sort(key=lambda entry: (-entry[1], entry[0]))
    return candidates


def proportional_sample(
    candidates: Sequence[Sequence[tuple[int, float]]], cfg: PseudoConfig
) -> PseudoLabelSet:
    """Take the top min_k floor(alpha * |candidates_k|) of every class list.

    An empty result (some class produced no usable candidates) is a warning,
    not an error: the caller proceeds with plain continued EM.
    """
    n_final = min(math.floor(cfg.alpha * len(bucket)) for bucket in candidates)
    if n_final <= 0:
        return PseudoLabelSet(
            entries=(),
            per_class_count=0,
            warning="no pseudo-labels: at least one class has no usable candidates",
        )
    entries = [
        PseudoLabel(index=index, assigned_class=cls + 1, confidence=confidence)
        for cls, bucket in enumerate(candidates)
        for index, confidence in bucket[:n_final]
    ]
    return PseudoLabelSet(entries=tuple(entries), per_class_count=n_final)


def augment(
    labeled: Mapping[int, int], unlabeled: Sequence[int], dp: PseudoLabelSet
) -> tuple[dict[int, int], list[int]]:
    """Merge the pseudo-labels into the labeled map and drop them from the
    unlabeled list, so no sample is counted in both likelihood terms.

    Raises ConsistencyError if an entry collides with an existing label or
    does not refer to a currently unlabeled sample (re-running augment with
    the same set therefore fails instead of double-counting).
    """
    new_labeled = dict(labeled)
    available = set(unlabeled)
    for entry in dp.entries:
        if entry.index in new_labeled:
            raise ConsistencyError(f"sample {entry.index} already carries a label")
        if entry.index not in available:
            raise ConsistencyError(f"sample {entry.index} is not in the unlabeled set")
        new_labeled[entry.index] = entry.assigned_class
        available.remove(entry.index)
    new_unlabeled = [i for i in unlabeled if i in available]
    return new_labeled, new_unlabeled


def write_pseudo_csv(dp: PseudoLabelSet, path) -> None:
    """Audit dump: one ``index,class,confidence`` row per pseudo-label."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("index,class,confidence\n")
        for e in dp.entries:
            fh.write(f"{e.index},{e.assigned_class},{e.confidence!r}\n")
