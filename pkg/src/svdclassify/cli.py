"""Command-line interface: train, evaluate, predict, sweep, synth.

Every command is deterministic given its configuration and seed; report
files (JSON/CSV) are byte-identical across reruns.  Exit codes: 0 on
success, 2 for configuration errors, 3 for data errors, 4 for solver
non-convergence, 1 for anything unexpected.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import (
    ModelConfig,
    PredictionOutcome,
    classify,
    evaluate,
    select_from_sweeps,
    select_rank,
    sweep_norms,
)
from .errors import ConfigError, ConvergenceError, DataError, ModelFormatError
from .imgio import LabeledDataset, load_dataset, preprocess_image, split_dataset
from .linalg import NormKind, parse_norm_list
from .synth import SynthSpec, generate, write_dataset
from .template import ClassTemplate, make_template, optimized_template, uniform_template, weight_divergence
from . import report

logger = logging.getLogger(__name__)

MODEL_VERSION = "1"
EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4

DEFAULT_NORMS = ("1", "2", "inf", "fro")
_RANKS_RE = re.compile(r"^(\d+)(?:\.\.(\d+))?$")


def parse_ranks(text: str) -> tuple[int, int]:
    """Parse a rank range like ``1..64`` (or a single rank like ``10``)."""
    match = _RANKS_RE.match(text.strip())
    if not match:
        raise ConfigError(f"invalid rank range {text!r} (expected forms: '10' or '1..64')")
    lo = int(match.group(1))
    hi = int(match.group(2)) if match.group(2) else lo
    if lo < 1 or hi < lo:
        raise ConfigError(f"invalid rank range {text!r}: need 1 <= lo <= hi")
    return lo, hi


@dataclass
class RunConfig:
    """Validated snapshot of one training/sweep run's parameters."""

    data_root: str
    out_dir: str
    size: int = 64
    train_frac: float = 0.8
    seed: int = 0
    norms: tuple[str, ...] = DEFAULT_NORMS
    ranks: str = ""  # "" means the full 1..size range
    template_method: str = "optimized"

    def validate(self) -> None:
        if not self.data_root:
            raise ConfigError("--data is required")
        if self.size < 1:
            raise ConfigError(f"--size must be >= 1, got {self.size}")
        if not 0.0 < self.train_frac < 1.0:
            raise ConfigError(f"--train-frac must be in (0, 1), got {self.train_frac}")
        if self.template_method not in ("uniform", "optimized"):
            raise ConfigError(f"--template must be 'uniform' or 'optimized', got {self.template_method!r}")
        try:
            self.norm_kinds()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        lo, hi = parse_ranks(self.ranks) if self.ranks else (1, self.size)
        if hi > self.size:
            raise ConfigError(f"rank range {lo}..{hi} exceeds image size {self.size}")

    def norm_kinds(self) -> list[NormKind]:
        return parse_norm_list(",".join(self.norms))

    def rank_list(self) -> list[int]:
        lo, hi = parse_ranks(self.ranks) if self.ranks else (1, self.size)
        return list(range(lo, hi + 1))

    def to_dict(self) -> dict:
        return {
            "data": self.data_root,
            "out": self.out_dir,
            "size": self.size,
            "train_frac": self.train_frac,
            "seed": self.seed,
            "norms": list(self.norms),
            "ranks": self.ranks or f"1..{self.size}",
            "template": self.template_method,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RunConfig":
        try:
            return cls(
                data_root=payload["data"],
                out_dir=payload["out"],
                size=int(payload["size"]),
                train_frac=float(payload["train_frac"]),
                seed=int(payload["seed"]),
                norms=tuple(payload["norms"]),
                ranks=str(payload["ranks"]),
                template_method=payload["template"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"bad run-config block: {exc}") from exc


@dataclass
class ModelFile:
    """Everything needed to classify: config snapshot, templates, model."""

    config: RunConfig
    templates: dict[str, ClassTemplate]
    model: ModelConfig
    version: str = MODEL_VERSION


def save_model(path, model_file: ModelFile) -> Path:
    payload = {
        "version": model_file.version,
        "config": model_file.config.to_dict(),
        "model": {
            "norm": model_file.model.norm.value,
            "rank": model_file.model.rank,
            "class_labels": list(model_file.model.class_labels),
        },
        "templates": [
            {
                "label": t.label,
                "method": t.method,
                "rows": int(t.matrix.shape[0]),
                "cols": int(t.matrix.shape[1]),
                "values": [float(v) for v in t.matrix.ravel()],
                "weights": [float(w) for w in t.weights],
            }
            for t in model_file.templates.values()
        ],
    }
    return report.write_json(path, payload)


def load_model(path) -> ModelFile:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"model file {path} does not exist")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    version = payload.get("version")
    if version != MODEL_VERSION:
        raise ModelFormatError(
            f"model file version {version!r} not supported (expected {MODEL_VERSION!r})"
        )
    config = RunConfig.from_dict(payload.get("config", {}))
    try:
        model_block = payload["model"]
        labels = tuple(model_block["class_labels"])
        model = ModelConfig(
            norm=NormKind.parse(model_block["norm"]),
            rank=int(model_block["rank"]),
            class_labels=labels,  # type: ignore[arg-type]
        )
        raw_templates = payload["templates"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"bad model block in {path}: {exc}") from exc
    templates: dict[str, ClassTemplate] = {}
    for raw in raw_templates:
        try:
            rows, cols = int(raw["rows"]), int(raw["cols"])
            matrix = np.asarray(raw["values"], dtype=np.float64).reshape(rows, cols)
            templates[raw["label"]] = ClassTemplate(
                label=raw["label"],
                matrix=matrix,
                weights=np.asarray(raw["weights"], dtype=np.float64),
                method=raw["method"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"bad template block in {path}: {exc}") from exc
    if set(templates) != set(model.class_labels):
        raise ModelFormatError("template labels do not match the model's class labels")
    for t in templates.values():
        if t.matrix.shape != (config.size, config.size):
            raise ModelFormatError(
                f"template '{t.label}' is {t.matrix.shape}, expected "
                f"({config.size}, {config.size}) from the config snapshot"
            )
    if not 1 <= model.rank <= config.size:
        raise ModelFormatError(f"model rank {model.rank} outside [1, {config.size}]")
    return ModelFile(config=config, templates=templates, model=model)


def _build_both_templates(
    train: LabeledDataset,
) -> tuple[dict[str, ClassTemplate], dict[str, ClassTemplate], dict[str, dict[str, float]]]:
    """Uniform and optimized templates per class, plus their divergence."""
    uniform: dict[str, ClassTemplate] = {}
    optimized: dict[str, ClassTemplate] = {}
    divergence: dict[str, dict[str, float]] = {}
    for label in train.labels:
        images = train.class_matrices(label)
        if not images:
            raise DataError(f"class '{label}' has no training images")
        uniform[label] = uniform_template(images, label)
        optimized[label] = optimized_template(images, label)
        signed = weight_divergence(optimized[label].weights, uniform[label].weights)
        max_abs = float(np.max(np.abs(optimized[label].weights - uniform[label].weights)))
        divergence[label] = {"signed_sum": signed, "max_abs": max_abs}
        logger.info(
            "class %s: optimized vs uniform weights, signed sum %.3e, max abs %.3e",
            label, signed, max_abs,
        )
    return uniform, optimized, divergence


def _load_and_split(config: RunConfig, workers: int) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    dataset = load_dataset(config.data_root, config.size, workers)
    train, test = split_dataset(dataset, config.train_frac, config.seed)
    return dataset, train, test


def cmd_train(config: RunConfig, figure_format: str = "png", workers: int = 1) -> ModelFile:
    """Build templates, select rank and norm on the training split, save the model."""
    config.validate()
    _, train, test = _load_and_split(config, workers)
    uniform, optimized, divergence = _build_both_templates(train)
    chosen = optimized if config.template_method == "optimized" else uniform
    templates = [chosen[label] for label in train.labels]
    norms = config.norm_kinds()
    ranks = config.rank_list()
    sweeps = sweep_norms(train, templates, norms, ranks, workers)
    norm, rank, p_best = select_from_sweeps(sweeps)
    model = ModelConfig(norm=norm, rank=rank, class_labels=train.labels)
    logger.info("selected norm=%s rank=%d (avg prediction probability %.4f)", norm.value, rank, p_best)

    per_norm: dict[str, dict] = {}
    for kind in norms:
        best_rank = select_rank(sweeps[kind])
        train_report = evaluate(
            train, templates, ModelConfig(norm=kind, rank=best_rank, class_labels=train.labels)
        )
        per_norm[kind.value] = {
            "best_rank": best_rank,
            "avg_probability": float(np.max(sweeps[kind].p_avg)),
            "accuracy": train_report.accuracy,
            "recall": train_report.recall,
            "fp_rate": train_report.fp_rate,
        }

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_file = ModelFile(config=config, templates=chosen, model=model)
    save_model(out_dir / "model.json", model_file)
    report.write_sweep_csv(out_dir / "sweeps.csv", sweeps)
    report.write_json(
        out_dir / "training_report.json",
        {
            "class_labels": list(train.labels),
            "train_counts": train.counts(),
            "test_counts": test.counts(),
            "template_method": config.template_method,
            "template_divergence": divergence,
            "per_norm": per_norm,
            "selected": {"norm": norm.value, "rank": rank, "avg_probability": p_best},
            "config": config.to_dict(),
        },
    )
    report.plot_sweep_curves(out_dir / "sweep_curves", sweeps, figure_format)
    report.plot_norm_metrics(out_dir / "norm_metrics", per_norm, train.labels, figure_format)
    report.plot_templates(
        out_dir / "templates",
        {
            "uniform": {lab: t.matrix for lab, t in uniform.items()},
            "optimized": {lab: t.matrix for lab, t in optimized.items()},
        },
        figure_format,
    )
    print(
        f"trained on {len(train)} images: norm={norm.value} rank={rank} "
        f"(avg prediction probability {p_best:.4f}); model written to {out_dir / 'model.json'}"
    )
    return model_file


def cmd_evaluate(
    model_path,
    data_root: str | None = None,
    split: str = "test",
    out_dir: str | Path = "eval",
    figure_format: str = "png",
    workers: int = 1,
):
    """Evaluate a saved model on the held-out split (or train/all)."""
    if split not in ("test", "train", "all"):
        raise ConfigError(f"--split must be test, train, or all, got {split!r}")
    mf = load_model(model_path)
    root = data_root or mf.config.data_root
    dataset = load_dataset(root, mf.config.size, workers)
    if tuple(dataset.labels) != tuple(mf.model.class_labels):
        raise DataError(
            f"dataset classes {dataset.labels} do not match model classes {mf.model.class_labels}"
        )
    if split == "all":
        subset = dataset
    else:
        train, test = split_dataset(dataset, mf.config.train_frac, mf.config.seed)
        subset = train if split == "train" else test
    if not subset.items:
        raise DataError(f"the '{split}' split of {root} is empty")
    templates = [mf.templates[label] for label in mf.model.class_labels]
    result = evaluate(subset, templates, mf.model)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.write_json(
        out / "metrics.json",
        {
            "split": split,
            "count": len(subset),
            "model": {"norm": mf.model.norm.value, "rank": mf.model.rank},
            "class_labels": list(result.class_labels),
            "confusion": [[int(v) for v in row] for row in result.confusion],
            "accuracy": result.accuracy,
            "balanced_accuracy": result.balanced_accuracy,
            "recall": result.recall,
            "fp_rate": result.fp_rate,
        },
    )
    report.write_predictions_csv(out / "predictions.csv", result)
    report.plot_error_scatter(out / "error_scatter", result, figure_format)
    report.plot_confusion_matrix(out / "confusion_matrix", result, figure_format)
    report.plot_annotated_grid(out / "annotated_predictions", subset.items, result, figure_format)
    print(
        f"evaluated {len(subset)} images ({split} split): accuracy {result.accuracy:.4f}, "
        f"reports written to {out}"
    )
    return result


def cmd_predict(model_path, image_paths) -> list[PredictionOutcome]:
    """Classify individual image files and print label plus errors."""
    mf = load_model(model_path)
    templates = [mf.templates[label] for label in mf.model.class_labels]
    first, second = mf.model.class_labels
    outcomes = []
    for image_path in image_paths:
        p = Path(image_path)
        if not p.is_file():
            raise DataError(f"image file {p} does not exist")
        matrix = preprocess_image(p.read_bytes(), mf.config.size)
        outcome = classify(matrix, templates, mf.model)
        outcomes.append(outcome)
        print(
            f"{p}: {outcome.predicted} "
            f"({first} error {outcome.errors[first]:.6g}, "
            f"{second} error {outcome.errors[second]:.6g})"
        )
    return outcomes


def cmd_sweep(config: RunConfig, figure_format: str = "png", workers: int = 1) -> dict:
    """Run the rank sweeps and write curves without saving a model."""
    config.validate()
    _, train, _ = _load_and_split(config, workers)
    templates = [
        make_template(train.class_matrices(label), label, config.template_method)
        for label in train.labels
    ]
    sweeps = sweep_norms(train, templates, config.norm_kinds(), config.rank_list(), workers)
    norm, rank, p_best = select_from_sweeps(sweeps)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write_sweep_csv(out_dir / "sweeps.csv", sweeps)
    per_norm = {
        kind.value: {"best_rank": select_rank(sweeps[kind]), "avg_probability": float(np.max(sweeps[kind].p_avg))}
        for kind in sweeps
    }
    report.write_json(
        out_dir / "sweep_report.json",
        {
            "class_labels": list(train.labels),
            "per_norm": per_norm,
            "selected": {"norm": norm.value, "rank": rank, "avg_probability": p_best},
            "config": config.to_dict(),
        },
    )
    report.plot_sweep_curves(out_dir / "sweep_curves", sweeps, figure_format)
    print(f"sweep complete: best norm={norm.value} rank={rank} (p_avg {p_best:.4f})")
    return per_norm


def cmd_synth(spec: SynthSpec, out_root) -> None:
    """Generate a synthetic dataset and write it as PGM files."""
    try:
        spec.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    dataset = generate(spec)
    write_dataset(dataset, out_root)
    print(
        f"wrote {len(dataset)} images ({spec.images_per_class} per class, "
        f"labels {dataset.labels[0]}/{dataset.labels[1]}) to {out_root}"
    )


def _add_shared_run_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--data", required=True, help="dataset root with two class subdirectories")
    sub.add_argument("--out", required=True, help="output directory for reports")
    sub.add_argument("--size", type=int, default=64, help="working image size (default 64)")
    sub.add_argument("--train-frac", type=float, default=0.8, help="training fraction (default 0.8)")
    sub.add_argument("--seed", type=int, default=0, help="split/shuffle seed (default 0)")
    sub.add_argument("--norms", default=",".join(DEFAULT_NORMS), help="comma list of 1|2|inf|fro")
    sub.add_argument("--ranks", default="", help="rank range, e.g. 1..64 (default 1..size)")
    sub.add_argument(
        "--template", default="optimized", choices=("uniform", "optimized"),
        help="template construction method (default optimized)",
    )
    sub.add_argument("--svg", action="store_true", help="render figures as SVG instead of PNG")
    sub.add_argument("--workers", type=int, default=1, help="worker threads for decoding/sweeps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svdclassify",
        description="Two-class image classification from low-rank reconstruction errors",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="build templates, select rank/norm, save a model")
    _add_shared_run_flags(train)

    ev = commands.add_parser("evaluate", help="evaluate a saved model on a dataset split")
    ev.add_argument("--model", required=True, help="path to model.json")
    ev.add_argument("--data", default=None, help="dataset root (default: from the model's config)")
    ev.add_argument("--split", default="test", choices=("test", "train", "all"),
                    help="which part of the dataset to evaluate (default test)")
    ev.add_argument("--out", required=True, help="output directory for reports")
    ev.add_argument("--svg", action="store_true", help="render figures as SVG instead of PNG")
    ev.add_argument("--workers", type=int, default=1, help="worker threads for decoding")

    pred = commands.add_parser("predict", help="classify individual image files")
    pred.add_argument("--model", required=True, help="path to model.json")
    pred.add_argument("images", nargs="+", help="image files to classify")

    sweep = commands.add_parser("sweep", help="rank sweeps per norm without saving a model")
    _add_shared_run_flags(sweep)

    synth = commands.add_parser("synth", help="generate a synthetic two-class PGM dataset")
    synth.add_argument("--out", required=True, help="dataset root to create")
    synth.add_argument("--seed", type=int, default=0, help="generator seed (default 0)")
    synth.add_argument("--size", type=int, default=64, help="image size (default 64)")
    synth.add_argument("--count", type=int, default=40, help="images per class (default 40)")
    synth.add_argument("--means", default="0.2,0.9", help="per-class base intensities (default 0.2,0.9)")
    synth.add_argument("--noise", type=float, default=0.05, help="uniform noise amplitude (default 0.05)")
    synth.add_argument("--labels", default="dark,light", help="class labels (default dark,light)")
    return parser


def _run_config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        data_root=args.data,
        out_dir=args.out,
        size=args.size,
        train_frac=args.train_frac,
        seed=args.seed,
        norms=tuple(p.strip() for p in args.norms.split(",") if p.strip()),
        ranks=args.ranks,
        template_method=args.template,
    )


def _synth_spec_from_args(args: argparse.Namespace) -> SynthSpec:
    try:
        means = tuple(float(v) for v in args.means.split(","))
        labels = tuple(v.strip() for v in args.labels.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad synth parameters: {exc}") from None
    if len(means) != 2:
        raise ConfigError(f"--means needs exactly two values, got {args.means!r}")
    if len(labels) != 2:
        raise ConfigError(f"--labels needs exactly two values, got {args.labels!r}")
    return SynthSpec(
        means=means,  # type: ignore[arg-type]
        labels=labels,  # type: ignore[arg-type]
        noise=args.noise,
        images_per_class=args.count,
        size=args.size,
        seed=args.seed,
    )


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    args = build_parser().parse_args(argv)
    figure_format = "svg" if getattr(args, "svg", False) else "png"
    workers = max(1, getattr(args, "workers", 1))
    try:
        if args.command == "train":
            cmd_train(_run_config_from_args(args), figure_format, workers)
        elif args.command == "evaluate":
            cmd_evaluate(args.model, args.data, args.split, args.out, figure_format, workers)
        elif args.command == "predict":
            cmd_predict(args.model, args.images)
        elif args.command == "sweep":
            cmd_sweep(_run_config_from_args(args), figure_format, workers)
        elif args.command == "synth":
            cmd_synth(_synth_spec_from_args(args), args.out)
        else:  # pragma: no cover - argparse enforces the choices
            raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
