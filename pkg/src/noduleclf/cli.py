"""Command-line pipeline: synth, extract, tune, train, eval, roc, predict.

Exit codes: 0 on success, 2 for input problems (bad files, bad flags), 3 for
broken internal contracts (schema mismatches, impossible states).

All stages that need randomness derive their stream from one --seed: the
train/test split uses seed+1, the CV folds seed+2, and model-internal
randomness seed+3. Running tune, train, and eval with the same --seed (and
the same split flags) therefore reproduces one consistent experiment.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .classifiers import (
    FAMILIES,
    ClassifierConfig,
    LabeledSet,
    TrainedClassifier,
    load_model,
    save_model,
)
from .dataset import load_manifest, load_manifest_entries
from .errors import ContractError, InputError, PipelineError
from .evaluation import RocCurve, auc, confusion, metrics, roc_curve
from .features import (
    GRAD_BINS_DEFAULT,
    GRAY_BINS_DEFAULT,
    FeatureTable,
    feature_names,
    nodule_features,
    read_feature_csv,
    write_feature_csv,
)
from .ioutil import atomic_write_text, dump_json
from .selection import default_grid, grid_search, render_cv_table, train_final
from .synthetic import generate_synthetic, write_synthetic_dataset

SEED_DEFAULT = 42
_SPLIT_OFFSET = 1
_FOLD_OFFSET = 2
_MODEL_OFFSET = 3

BEST_SCHEMA = 1


# ---------------------------------------------------------------------------
# Helpers shared by the split-aware subcommands.


def _resolve_split(table: FeatureTable, args) -> tuple[np.ndarray, np.ndarray]:
    from .dataset import split_train_test

    if not np.all(np.isin(table.labels, (-1, 1))):
        raise InputError(
            "feature CSV contains rows without a -1/+1 label; "
            "splitting needs labeled data"
        )
    subjects = None
    if args.split_level == "subject":
        if not args.manifest:
            raise InputError(
                "--split-level subject needs --manifest to map nodules to subjects"
            )
        by_id = {e.nodule_id: e.subject_id for e in load_manifest_entries(args.manifest)}
        missing = [i for i in table.ids if i not in by_id]
        if missing:
            shown = ", ".join(missing[:5])
            raise InputError(f"manifest has no subject for nodule ids: {shown}")
        subjects = [by_id[i] for i in table.ids]
    return split_train_test(
        table.labels,
        subjects,
        train_fraction=args.train_fraction,
        seed=args.seed + _SPLIT_OFFSET,
        level=args.split_level,
    )


def _render_roc_csv(roc: RocCurve, auc_value: float) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["threshold", "fpr", "tpr"])
    for thr, x, y in zip(roc.thresholds, roc.fpr, roc.tpr):
        writer.writerow([repr(float(thr)), repr(float(x)), repr(float(y))])
    writer.writerow(["auc", repr(float(auc_value)), ""])
    return buf.getvalue()


def _score_test_split(args) -> tuple[TrainedClassifier, np.ndarray, np.ndarray, int, int]:
    """Load features + model, rebuild the split, score the held-out part."""
    table = read_feature_csv(args.features)
    train_idx, test_idx = _resolve_split(table, args)
    clf = load_model(args.model)
    truth = table.labels[test_idx]
    scores = clf.scores(table.X[test_idx])
    return clf, truth, scores, int(train_idx.size), int(test_idx.size)


def _load_grid(args) -> list[ClassifierConfig]:
    model_seed = args.seed + _MODEL_OFFSET
    if args.grid:
        path = Path(args.grid)
        if not path.is_file():
            raise InputError(f"grid file not found: {args.grid}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"grid file is not valid JSON: {args.grid}: {exc}") from None
        if not isinstance(doc, list) or not doc:
            raise InputError(f"grid file must hold a non-empty JSON list: {args.grid}")
        configs = []
        for i, entry in enumerate(doc):
            if not isinstance(entry, dict):
                raise InputError(f"grid entry {i} must be an object")
            if "seed" not in entry:
                entry = {**entry, "seed": model_seed}
            try:
                configs.append(ClassifierConfig.from_dict(entry))
            except PipelineError as exc:
                raise InputError(f"grid entry {i}: {exc}") from None
        return configs
    if not args.family:
        raise InputError("tune needs either --family or --grid")
    return default_grid(args.family, seed=model_seed)


# ---------------------------------------------------------------------------
# Subcommand handlers.


def _cmd_synth(args) -> int:
    nodules = generate_synthetic(
        args.n_benign, args.n_malignant, image_size=args.image_size, seed=args.seed
    )
    manifest = write_synthetic_dataset(nodules, args.out)
    print(f"wrote {len(nodules)} nodules under {args.out} (manifest: {manifest})")
    return 0


def _cmd_extract(args) -> int:
    dataset = load_manifest(args.manifest)
    if dataset.dropped_unknown:
        print(f"dropped {dataset.dropped_unknown} entries with unknown diagnosis")
    if not dataset.samples:
        raise InputError("manifest holds no labeled nodules")
    ids: list[str] = []
    labels: list[int] = []
    rows: list[np.ndarray] = []
    for sample in dataset.samples:
        try:
            vec = nodule_features(
                sample.image,
                sample.polygons,
                margin=args.margin,
                gray_bins=args.gray_bins,
                grad_bins=args.grad_bins,
                label=sample.label,
            )
        except PipelineError as exc:
            raise InputError(f"nodule {sample.nodule_id}: {exc}") from None
        ids.append(sample.nodule_id)
        labels.append(sample.label)
        rows.append(vec.values)
    table = FeatureTable(
        ids=ids,
        labels=np.asarray(labels, dtype=np.int64),
        X=np.vstack(rows),
        names=feature_names(args.gray_bins, args.grad_bins),
    )
    write_feature_csv(args.out, table)
    print(f"wrote {len(ids)} feature rows ({table.X.shape[1]} columns) to {args.out}")
    return 0


def _cmd_tune(args) -> int:
    table = read_feature_csv(args.features)
    train_idx, _ = _resolve_split(table, args)
    data = LabeledSet(table.X[train_idx], table.labels[train_idx])
    grid = _load_grid(args)
    result = grid_search(grid, data, k=args.folds, seed=args.seed + _FOLD_OFFSET)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_dir / "cv_table.csv", render_cv_table(result))
    best = result.best
    atomic_write_text(
        out_dir / "best.json",
        dump_json(
            {
                "schema": BEST_SCHEMA,
                "config": best.config.to_dict(),
                "theta": best.theta,
                "mean_f": best.mean_f,
                "std_f": best.std_f,
                "folds": args.folds,
            }
        ),
    )
    print(
        f"best {best.config.family} candidate: mean F = {best.mean_f:.4f} "
        f"(theta = {best.theta:.6g}); wrote {out_dir / 'cv_table.csv'} and "
        f"{out_dir / 'best.json'}"
    )
    return 0


def _read_best(path: str) -> tuple[ClassifierConfig, float]:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"config file not found: {path}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"config file is not valid JSON: {path}: {exc}") from None
    if not isinstance(doc, dict) or doc.get("schema") != BEST_SCHEMA:
        raise ContractError(
            f"unsupported config schema {doc.get('schema')!r} in {path}"
        )
    if "theta" not in doc:
        raise ContractError(f"config file {path} has no threshold")
    return ClassifierConfig.from_dict(doc["config"]), float(doc["theta"])


def _cmd_train(args) -> int:
    table = read_feature_csv(args.features)
    train_idx, _ = _resolve_split(table, args)
    data = LabeledSet(table.X[train_idx], table.labels[train_idx])
    config, theta = _read_best(args.config)
    clf = train_final(config, theta, data)
    save_model(args.out, clf)
    print(
        f"trained {config.family} on {data.n} nodules "
        f"(theta = {theta:.6g}); wrote {args.out}"
    )
    return 0


def _cmd_eval(args) -> int:
    clf, truth, scores, n_train, n_test = _score_test_split(args)
    predicted = np.where(scores >= clf.theta, 1, -1)
    counts = confusion(truth, predicted)
    m = metrics(counts)
    roc = roc_curve(scores, truth)
    auc_value = auc(roc)
    report = {
        "schema": 1,
        "config": clf.config.to_dict(),
        "theta": clf.theta,
        "n_train": n_train,
        "n_test": n_test,
        "confusion": counts.to_dict(),
        "metrics": m.to_dict(),
        "auc": auc_value,
    }
    atomic_write_text(args.out, dump_json(report))
    if args.roc_out:
        atomic_write_text(args.roc_out, _render_roc_csv(roc, auc_value))
    print(
        f"test n={n_test}: Se={m.sensitivity:.4f} Sp={m.specificity:.4f} "
        f"Acc={m.accuracy:.4f} F={m.f_measure:.4f} AUC={auc_value:.4f}; "
        f"wrote {args.out}"
    )
    return 0


def _cmd_roc(args) -> int:
    _, truth, scores, _, n_test = _score_test_split(args)
    roc = roc_curve(scores, truth)
    auc_value = auc(roc)
    atomic_write_text(args.out, _render_roc_csv(roc, auc_value))
    print(f"test n={n_test}: AUC={auc_value:.4f}; wrote {args.out}")
    return 0


def _cmd_predict(args) -> int:
    table = read_feature_csv(args.features)
    clf = load_model(args.model)
    scores = clf.scores(table.X)
    predicted = np.where(scores >= clf.theta, 1, -1)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "score", "label"])
    for i, nodule_id in enumerate(table.ids):
        writer.writerow([nodule_id, repr(float(scores[i])), int(predicted[i])])
    atomic_write_text(args.out, buf.getvalue())
    positive = int(np.sum(predicted == 1))
    print(
        f"scored {len(table.ids)} nodules ({positive} predicted malignant); "
        f"wrote {args.out}"
    )
    return 0


# ---------------------------------------------------------------------------
# Parser assembly.


def _add_seed_flag(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--seed",
        type=int,
        default=SEED_DEFAULT,
        help=f"base seed for splits, folds, and models (default {SEED_DEFAULT})",
    )


def _add_split_flags(sub: argparse.ArgumentParser) -> None:
    _add_seed_flag(sub)
    sub.add_argument("--features", required=True, help="feature CSV from extract")
    sub.add_argument(
        "--train-fraction",
        type=float,
        default=0.65,
        help="fraction of each class assigned to training (default 0.65)",
    )
    sub.add_argument(
        "--split-level",
        choices=("slice", "subject"),
        default="slice",
        help="split independent nodules, or keep each subject on one side",
    )
    sub.add_argument(
        "--manifest",
        help="manifest path; required for --split-level subject",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noduleclf",
        description="Benign/malignant lung nodule classification pipeline",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a synthetic dataset")
    _add_seed_flag(synth)
    synth.add_argument("--out", required=True, help="output dataset directory")
    synth.add_argument("--n-benign", type=int, required=True)
    synth.add_argument("--n-malignant", type=int, required=True)
    synth.add_argument("--image-size", type=int, default=96)
    synth.set_defaults(func=_cmd_synth)

    extract = commands.add_parser("extract", help="extract feature vectors")
    extract.add_argument("--manifest", required=True, help="dataset manifest JSON")
    extract.add_argument("--out", required=True, help="output feature CSV")
    extract.add_argument("--margin", type=float, default=0.05)
    extract.add_argument("--gray-bins", type=int, default=GRAY_BINS_DEFAULT)
    extract.add_argument("--grad-bins", type=int, default=GRAD_BINS_DEFAULT)
    extract.set_defaults(func=_cmd_extract)

    tune = commands.add_parser("tune", help="cross-validated grid search")
    _add_split_flags(tune)
    tune.add_argument("--family", choices=FAMILIES, help="classifier family")
    tune.add_argument("--grid", help="JSON list of configs overriding the default grid")
    tune.add_argument("--folds", type=int, default=5)
    tune.add_argument("--out", required=True, help="output directory")
    tune.set_defaults(func=_cmd_tune)

    train = commands.add_parser("train", help="fit the final model")
    _add_split_flags(train)
    train.add_argument("--config", required=True, help="best.json from tune")
    train.add_argument("--out", required=True, help="output model JSON")
    train.set_defaults(func=_cmd_train)

    evaluate = commands.add_parser("eval", help="evaluate on the held-out split")
    _add_split_flags(evaluate)
    evaluate.add_argument("--model", required=True, help="model JSON from train")
    evaluate.add_argument("--out", required=True, help="output report JSON")
    evaluate.add_argument("--roc-out", help="optionally also write the ROC CSV here")
    evaluate.set_defaults(func=_cmd_eval)

    roc = commands.add_parser("roc", help="write the test-split ROC curve")
    _add_split_flags(roc)
    roc.add_argument("--model", required=True, help="model JSON from train")
    roc.add_argument("--out", required=True, help="output ROC CSV")
    roc.set_defaults(func=_cmd_roc)

    predict = commands.add_parser("predict", help="score every row of a feature CSV")
    predict.add_argument("--features", required=True, help="feature CSV")
    predict.add_argument("--model", required=True, help="model JSON from train")
    predict.add_argument("--out", required=True, help="output predictions CSV")
    predict.set_defaults(func=_cmd_predict)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
