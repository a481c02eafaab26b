"""End-to-end orchestration: ingest features, reduce, initialize, run the
two EM phases with the single pseudo-labeling round between them, and
evaluate on held-out features.

Stages run strictly in order and each failure aborts the run with the
stage name attached; artifacts written before the failure are removed.
Metrics serialize to JSON deterministically (timings go to a separate
file precisely so two identical runs produce byte-identical metrics).
"""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataio, pca, pseudo, sgmm
from .dataio import FeatureMatrix, LabelSet
from .errors import StageError

logger = logging.getLogger(__name__)

SWEEP_AXES = ("per_class", "pca_dim", "L")


@dataclass(frozen=True)
class RunConfig:
    features: Path
    labels: Path
    test_features: Path
    test_labels: Path
    out_dir: Path
    per_class: int = 4
    n_components: int = 10
    pca_dim: int = 60
    tau: float = 0.95
    alpha: float = 0.5
    phase1: sgmm.EmConfig = field(default_factory=sgmm.EmConfig)
    phase2: sgmm.EmConfig = field(default_factory=sgmm.EmConfig)
    seed: int = 0

    def echo(self) -> dict:
        """Every resolved hyperparameter, defaults included."""
        return {
            "features": str(self.features),
            "labels": str(self.labels),
            "test_features": str(self.test_features),
            "test_labels": str(self.test_labels),
            "out_dir": str(self.out_dir),
            "per_class": self.per_class,
            "n_components": self.n_components,
            "pca_dim": self.pca_dim,
            "tau": self.tau,
            "alpha": self.alpha,
            "phase1": {"max_iter": self.phase1.max_iter, "tol": self.phase1.tol},
            "phase2": {"max_iter": self.phase2.max_iter, "tol": self.phase2.tol},
            "seed": self.seed,
            "reg_epsilon": sgmm.DEFAULT_REG_EPSILON,
            "class_table_smoothing": sgmm.CLASS_TABLE_SMOOTHING,
        }


@dataclass(frozen=True)
class RunMetrics:
    accuracy: float
    error_rate: float
    phase1_log_likelihood: list[float]
    phase2_log_likelihood: list[float]
    pseudo_label_count: int
    pseudo_per_class: int
    pseudo_rounds: int
    pseudo_warning: str | None
    n_train: int
    n_test: int
    n_labeled_initial: int
    n_labeled_final: int
    stage_seconds: dict[str, float]
    config: dict

    def to_json(self) -> str:
        payload = dataclasses.asdict(self)
        del payload["stage_seconds"]  # wall-clock varies run to run
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _dense_labels(labels: LabelSet, n: int, what: str) -> np.ndarray:
    if len(labels) != n:
        raise ValueError(f"{what}: {len(labels)} labels for {n} samples; need one per row")
    return np.asarray([labels.assignments[i] for i in range(n)])


def evaluate(model: sgmm.SgmmModel, pca_model: pca.PcaModel, test_features, test_labels) -> float:
    """Fraction of correct predictions on PCA-transformed test features."""
    reduced = pca.transform(pca_model, test_features)
    truth = np.asarray(test_labels)
    if truth.shape != (reduced.n,):
        raise ValueError(f"{truth.shape[0] if truth.ndim else 0} labels for {reduced.n} test rows")
    predictions = sgmm.predict(model, reduced)
    return float((predictions == truth).mean())


def run(cfg: RunConfig) -> RunMetrics:
    """Execute the full two-phase pipeline once, deterministically in cfg.seed."""
    written: list[Path] = []
    stage_seconds: dict[str, float] = {}
    stage = "setup"
    t0 = time.perf_counter()

    def mark(name: str) -> None:
        nonlocal stage, t0
        now = time.perf_counter()
        stage_seconds[stage] = now - t0
        stage, t0 = name, now

    try:
        for path in (cfg.features, cfg.labels, cfg.test_features, cfg.test_labels):
            if not Path(path).exists():
                raise FileNotFoundError(f"input path does not exist: {path}")
        seed_split, seed_init = (
            int(s) for s in np.random.SeedSequence(cfg.seed).generate_state(2, dtype=np.uint64)
        )

        mark("load")
        train = dataio.read_features(cfg.features)
        labels = dataio.read_labels(cfg.labels, train.n)
        test = dataio.read_features(cfg.test_features)
        test_labels = _dense_labels(
            dataio.read_labels(cfg.test_labels, test.n), test.n, "test labels"
        )
        n_classes = labels.n_classes
        if n_classes < 1:
            raise ValueError("training label file names no classes")
        if cfg.n_components < n_classes:
            # legal (a sweep may scan through small L) but usually a bad fit
            logger.warning(
                "fewer components (%d) than classes (%d); some classes cannot win",
                cfg.n_components,
                n_classes,
            )

        mark("pca")
        reducer = pca.fit_pca(train, cfg.pca_dim)
        reduced = pca.transform(reducer, train)

        mark("split")
        labeled_idx, unlabeled_idx = dataio.split_labeled(train, labels, cfg.per_class, seed_split)
        labeled_map = {i: labels.assignments[i] for i in labeled_idx}
        n_labeled_initial = len(labeled_idx)

        mark("init")
        model = sgmm.kmeanspp_init(
            reduced,
            LabelSet(labeled_map, train.n),
            cfg.n_components,
            seed_init,
            n_classes=n_classes,
        )

        mark("phase1")
        xu = reduced.rows(unlabeled_idx)
        xl = reduced.rows(labeled_idx)
        yl = np.asarray([labeled_map[i] for i in labeled_idx])
        model, trace1 = sgmm.fit_em(model, xu, xl, yl, cfg.phase1)

        mark("pseudo")
        pseudo_rounds = 0
        pcfg = pseudo.PseudoConfig(tau=cfg.tau, alpha=cfg.alpha)
        scores = pseudo.score_unlabeled(model, xu)
        candidates = pseudo.build_candidates(scores, pcfg, n_classes)
        dp_local = pseudo.proportional_sample(candidates, pcfg)
        pseudo_rounds += 1
        # candidate indices are rows of the unlabeled block; lift to dataset indices
        dp = pseudo.PseudoLabelSet(
            entries=tuple(
                pseudo.PseudoLabel(unlabeled_idx[e.index], e.assigned_class, e.confidence)
                for e in dp_local.entries
            ),
            per_class_count=dp_local.per_class_count,
            warning=dp_local.warning,
        )
        labeled_map, unlabeled_idx = pseudo.augment(labeled_map, unlabeled_idx, dp)
        if pseudo_rounds != 1:
            raise RuntimeError(f"pseudo-labeling ran {pseudo_rounds} times; must run exactly once")

        mark("phase2")
        labeled_idx = sorted(labeled_map)
        xu = reduced.rows(unlabeled_idx)
        xl = reduced.rows(labeled_idx)
        yl = np.asarray([labeled_map[i] for i in labeled_idx])
        model, trace2 = sgmm.fit_em(model, xu, xl, yl, cfg.phase2)

        mark("evaluate")
        accuracy = evaluate(model, reducer, test, test_labels)

        mark("write")
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        metrics = RunMetrics(
            accuracy=accuracy,
            error_rate=1.0 - accuracy,
            phase1_log_likelihood=[float(v) for v in trace1],
            phase2_log_likelihood=[float(v) for v in trace2],
            pseudo_label_count=len(dp),
            pseudo_per_class=dp.per_class_count,
            pseudo_rounds=pseudo_rounds,
            pseudo_warning=dp.warning,
            n_train=train.n,
            n_test=test.n,
            n_labeled_initial=n_labeled_initial,
            n_labeled_final=len(labeled_map),
            stage_seconds=stage_seconds,
            config=cfg.echo(),
        )
        for name, writer in (
            ("model.sogm", lambda p: sgmm.write_model(model, p)),
            ("pca.sopc", lambda p: pca.write_pca(reducer, p)),
            ("metrics.json", lambda p: p.write_text(metrics.to_json(), encoding="utf-8")),
        ):
            target = out / name
            written.append(target)
            writer(target)
        if len(dp):
            target = out / "pseudo_labels.csv"
            written.append(target)
            pseudo.write_pseudo_csv(dp, target)
        mark("done")
        stage_seconds = dict(stage_seconds)
        (out / "timings.json").write_text(
            json.dumps(stage_seconds, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        return metrics
    except Exception as exc:
        for path in written:
            try:
                path.unlink(missing_ok=True)
            except OSError:
                pass
        if isinstance(exc, StageError):
            raise
        raise StageError(stage, exc) from exc


@dataclass(frozen=True)
class RepeatedResult:
    mean_error: float
    std_error: float
    per_seed: dict[int, float]


DEFAULT_SEEDS = (0, 1, 2)


def run_repeated(cfg: RunConfig, seeds: list[int] | None = None) -> RepeatedResult:
    """Aggregate run() across seeds: mean and sample standard deviation of
    the error rate (std is 0 for a single seed). Defaults to three seeds,
    matching the usual mean +/- std reporting convention."""
    if seeds is None:
        seeds = list(DEFAULT_SEEDS)
    if not seeds:
        raise ValueError("need at least one seed")
    errors: dict[int, float] = {}
    for seed in seeds:
        sub = dataclasses.replace(
            cfg, seed=seed, out_dir=Path(cfg.out_dir) / f"seed_{seed}"
        )
        try:
            errors[seed] = run(sub).error_rate
        except StageError as exc:
            raise StageError(f"{exc.stage} (seed {seed})", exc.cause) from exc
    values = np.asarray(list(errors.values()))
    std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return RepeatedResult(mean_error=float(values.mean()), std_error=std, per_seed=errors)


def sweep(
    cfg: RunConfig, axis: str, values: list, seeds: list[int] | None = None
) -> list[tuple[object, float, float]]:
    """One run_repeated per axis value with everything else fixed; returns
    (value, mean error, std) rows in input order."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    field_name = {"per_class": "per_class", "pca_dim": "pca_dim", "L": "n_components"}[axis]
    rows = []
    for value in values:
        sub = dataclasses.replace(
            cfg,
            **{field_name: value},
            out_dir=Path(cfg.out_dir) / f"sweep_{axis}_{value}",
        )
        result = run_repeated(sub, seeds)
        rows.append((value, result.mean_error, result.std_error))
    return rows


def write_sweep_csv(rows, axis: str, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{axis},mean_error,std_error\n")
        for value, mean_error, std_error in rows:
            fh.write(f"{value},{mean_error!r},{std_error!r}\n")
