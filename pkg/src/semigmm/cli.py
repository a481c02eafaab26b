"""Command-line entry points.

Subcommands: train, sweep, eval, baseline, dedup, synth. Options can come
from a TOML file (--config); values typed on the command line win over the
file, and --preset fills dataset-specific defaults before explicit flags
are applied.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import baseline, dataio, dedup, pca, pipeline, sgmm, synth
from .errors import StageError

PRESETS = {
    "cifar10": {"components": 10, "pca_dim": 60},
    "cifar100": {"components": 100, "pca_dim": 60},
    "stl10": {"components": 15, "pca_dim": 45, "phase1_tol": 1.0, "phase2_tol": 1.0},
}


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    flat = {}
    for key, value in data.items():
        if key in ("phase1", "phase2") and isinstance(value, dict):
            for sub, v in value.items():
                flat[f"{key}_{sub}"] = v
        else:
            flat[key] = value
    return flat


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < TOML < preset < explicit flags."""
    resolved = dict(defaults)
    file_values = _load_config_file(getattr(args, "config", None))
    unknown = set(file_values) - set(defaults) - {"preset"}
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    resolved.update(file_values)
    preset = getattr(args, "preset", None) or resolved.pop("preset", None)
    if preset:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        resolved.update(PRESETS[preset])
    for key in defaults:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            resolved[key] = flag_value
    missing = [k for k, v in resolved.items() if v is None]
    if missing:
        raise ValueError(f"missing required option(s): {', '.join(sorted(missing))}")
    return resolved


_RUN_DEFAULTS = {
    "features": None,
    "labels": None,
    "test_features": None,
    "test_labels": None,
    "out": None,
    "per_class": 4,
    "components": 10,
    "pca_dim": 60,
    "tau": 0.95,
    "alpha": 0.5,
    "seed": 0,
    "phase1_max_iter": 200,
    "phase1_tol": 1e-3,
    "phase2_max_iter": 200,
    "phase2_tol": 1e-3,
}


def _run_config(resolved: dict) -> pipeline.RunConfig:
    return pipeline.RunConfig(
        features=Path(resolved["features"]),
        labels=Path(resolved["labels"]),
        test_features=Path(resolved["test_features"]),
        test_labels=Path(resolved["test_labels"]),
        out_dir=Path(resolved["out"]),
        per_class=int(resolved["per_class"]),
        n_components=int(resolved["components"]),
        pca_dim=int(resolved["pca_dim"]),
        tau=float(resolved["tau"]),
        alpha=float(resolved["alpha"]),
        phase1=sgmm.EmConfig(
            max_iter=int(resolved["phase1_max_iter"]),
            tol=float(resolved["phase1_tol"]),
            seed=int(resolved["seed"]),
        ),
        phase2=sgmm.EmConfig(
            max_iter=int(resolved["phase2_max_iter"]),
            tol=float(resolved["phase2_tol"]),
            seed=int(resolved["seed"]),
        ),
        seed=int(resolved["seed"]),
    )


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML file with any of the option names below")
    p.add_argument("--preset", choices=sorted(PRESETS), help="dataset defaults")
    p.add_argument("--features", help="training feature file (SOFB)")
    p.add_argument("--labels", help="training label CSV")
    p.add_argument("--test-features", dest="test_features", help="test feature file")
    p.add_argument("--test-labels", dest="test_labels", help="test label CSV")
    p.add_argument("--out", help="output directory")
    p.add_argument("--per-class", dest="per_class", type=int, help="labels kept per class")
    p.add_argument("--components", type=int, help="Gaussian component count")
    p.add_argument("--pca-dim", dest="pca_dim", type=int)
    p.add_argument("--tau", type=float, help="pseudo-label confidence threshold")
    p.add_argument("--alpha", type=float, help="pseudo-label sampling ratio")
    p.add_argument("--seed", type=int)
    p.add_argument("--phase1-max-iter", dest="phase1_max_iter", type=int)
    p.add_argument("--phase1-tol", dest="phase1_tol", type=float)
    p.add_argument("--phase2-max-iter", dest="phase2_max_iter", type=int)
    p.add_argument("--phase2-tol", dest="phase2_tol", type=float)


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip() != ""]


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = _run_config(_resolve(args, _RUN_DEFAULTS))
    if args.seeds:
        result = pipeline.run_repeated(cfg, _int_list(args.seeds))
        print(json.dumps(
            {
                "mean_error": result.mean_error,
                "std_error": result.std_error,
                "per_seed": {str(k): v for k, v in result.per_seed.items()},
            },
            sort_keys=True,
            indent=2,
        ))
    else:
        metrics = pipeline.run(cfg)
        print(metrics.to_json(), end="")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _run_config(_resolve(args, _RUN_DEFAULTS))
    values = _int_list(args.values)
    seeds = _int_list(args.seeds) if args.seeds else None
    rows = pipeline.sweep(cfg, args.axis, values, seeds)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pipeline.write_sweep_csv(rows, args.axis, out / "sweep.csv")
    for value, mean_error, std_error in rows:
        print(f"{args.axis}={value}: error {mean_error:.4f} +/- {std_error:.4f}")
    return 0


def _dense_labels(labels: dataio.LabelSet, n: int, what: str) -> np.ndarray:
    if len(labels) != n:
        raise ValueError(f"{what}: {len(labels)} labels for {n} samples; need one per row")
    return np.asarray([labels.assignments[i] for i in range(n)])


def _cmd_eval(args: argparse.Namespace) -> int:
    model = sgmm.read_model(args.model)
    reducer = pca.read_pca(args.pca)
    features = dataio.read_features(args.features)
    truth = _dense_labels(dataio.read_labels(args.labels, features.n), features.n, "labels")
    accuracy = pipeline.evaluate(model, reducer, features, truth)
    print(json.dumps({"accuracy": accuracy, "error_rate": 1.0 - accuracy}, indent=2))
    return 0


def _cmd_baseline(args: argparse.Namespace) -> int:
    defaults = dict(_RUN_DEFAULTS)
    defaults.update(
        {
            "lambda_max": 1.0,
            "t_ramp": 0,  # 0 -> half the total steps
            "learning_rate": 0.1,
            "epochs": 100,
            "batch_size": 256,
        }
    )
    resolved = _resolve(args, defaults)
    seed = int(resolved["seed"])
    seed_split = int(np.random.SeedSequence(seed).generate_state(1, dtype=np.uint64)[0])

    train = dataio.read_features(resolved["features"])
    labels = dataio.read_labels(resolved["labels"], train.n)
    test = dataio.read_features(resolved["test_features"])
    truth = _dense_labels(
        dataio.read_labels(resolved["test_labels"], test.n), test.n, "test labels"
    )

    reducer = pca.fit_pca(train, int(resolved["pca_dim"]))
    reduced = pca.transform(reducer, train)
    labeled_idx, unlabeled_idx = dataio.split_labeled(
        train, labels, int(resolved["per_class"]), seed_split
    )
    cfg = baseline.BaselineConfig(
        lambda_max=float(resolved["lambda_max"]),
        t_ramp=int(resolved["t_ramp"]) or None,
        tau=float(resolved["tau"]),
        learning_rate=float(resolved["learning_rate"]),
        epochs=int(resolved["epochs"]),
        batch_size=int(resolved["batch_size"]),
        seed=seed,
    )
    yl = np.asarray([labels.assignments[i] for i in labeled_idx])
    head, trace = baseline.train_baseline(
        reduced.rows(labeled_idx), yl, reduced.rows(unlabeled_idx), cfg
    )
    predictions = baseline.head_proba(head, pca.transform(reducer, test)).argmax(axis=1) + 1
    accuracy = float((predictions == truth).mean())

    out = Path(resolved["out"])
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "accuracy": accuracy,
        "error_rate": 1.0 - accuracy,
        "loss_trace": [float(v) for v in trace],
        "n_train": train.n,
        "n_test": test.n,
        "n_labeled_initial": len(labeled_idx),
        "config": {
            "features": str(resolved["features"]),
            "labels": str(resolved["labels"]),
            "test_features": str(resolved["test_features"]),
            "test_labels": str(resolved["test_labels"]),
            "out_dir": str(resolved["out"]),
            "per_class": int(resolved["per_class"]),
            "pca_dim": int(resolved["pca_dim"]),
            "lambda_max": cfg.lambda_max,
            "t_ramp": cfg.t_ramp,
            "tau": cfg.tau,
            "learning_rate": cfg.learning_rate,
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "seed": cfg.seed,
        },
    }
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    (out / "metrics.json").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def _cmd_dedup(args: argparse.Namespace) -> int:
    report = dedup.run_dedup(args.train, args.test, args.manifest, args.batch_size)
    written = dedup.write_report(report, args.report)
    dedup.write_valid_indices(report, args.valid_out)
    print(
        json.dumps(
            {
                "duplicates": len(report.duplicates),
                "valid": len(report.valid_indices),
                "report_written": written,
            },
            indent=2,
        )
    )
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = synth.BlobSpec(
        n_classes=args.classes,
        dim=args.dim,
        train_per_class=args.train_per_class,
        test_per_class=args.test_per_class,
        sigma=args.sigma,
        separation=args.separation,
        seed=args.seed,
    )
    paths = synth.write_blob_dataset(spec, args.out)
    print(json.dumps({k: str(v) for k, v in paths.items()}, sort_keys=True, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semigmm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the full two-phase pipeline")
    _add_run_options(p_train)
    p_train.add_argument("--seeds", help="comma-separated seeds for a repeated run")
    p_train.set_defaults(func=_cmd_train)

    p_sweep = sub.add_parser("sweep", help="repeat training along one hyperparameter axis")
    _add_run_options(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=pipeline.SWEEP_AXES)
    p_sweep.add_argument("--values", required=True, help="comma-separated axis values")
    p_sweep.add_argument("--seeds", help="comma-separated seeds per cell")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_eval = sub.add_parser("eval", help="evaluate a saved model on a feature file")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--pca", required=True)
    p_eval.add_argument("--features", required=True)
    p_eval.add_argument("--labels", required=True)
    p_eval.set_defaults(func=_cmd_eval)

    p_base = sub.add_parser("baseline", help="softmax-head ablation on the same splits")
    _add_run_options(p_base)
    p_base.add_argument("--lambda-max", dest="lambda_max", type=float)
    p_base.add_argument("--t-ramp", dest="t_ramp", type=int)
    p_base.add_argument("--learning-rate", dest="learning_rate", type=float)
    p_base.add_argument("--epochs", type=int)
    p_base.add_argument("--batch-size", dest="batch_size", type=int)
    p_base.set_defaults(func=_cmd_baseline)

    p_dedup = sub.add_parser("dedup", help="hash-based train/test duplicate scan")
    p_dedup.add_argument("--train", required=True)
    p_dedup.add_argument("--test", required=True)
    p_dedup.add_argument("--manifest", required=True)
    p_dedup.add_argument("--report", required=True)
    p_dedup.add_argument("--valid-out", dest="valid_out", required=True)
    p_dedup.add_argument("--batch-size", dest="batch_size", type=int, default=1000)
    p_dedup.set_defaults(func=_cmd_dedup)

    p_synth = sub.add_parser("synth", help="generate a Gaussian-blob dataset")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--classes", type=int, default=3)
    p_synth.add_argument("--dim", type=int, default=10)
    p_synth.add_argument("--train-per-class", dest="train_per_class", type=int, default=500)
    p_synth.add_argument("--test-per-class", dest="test_per_class", type=int, default=100)
    p_synth.add_argument("--sigma", type=float, default=1.0)
    p_synth.add_argument("--separation", type=float, default=8.0)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.set_defaults(func=_cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"semigmm: [{exc.stage}] {exc.cause}", file=sys.stderr)
        return 1
    except Exception as exc:  # argument/data errors: fail with a clean message
        print(f"semigmm: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
