"""Classification by reconstruction error, rank sweeps, and evaluation.

A test image is truncated to rank k via its SVD and compared against the
full-rank template of each class under the configured norm; the class
with the smaller error wins, with ties going to the second class (the
else branch of the decision).  Rank and norm are selected on the
training split by maximizing the two-class average prediction
probability, i.e. balanced accuracy.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DatasetError
from .imgio import LabeledDataset
from .linalg import NormKind, SvdFactors, matrix_norm, matrix_norm_batch, svd, truncate_many
from .template import ClassTemplate

# Fixed tie-break priority when several norms reach the same average
# prediction probability.
NORM_PRIORITY = (NormKind.FRO, NormKind.TWO, NormKind.ONE, NormKind.INF)


@dataclass(frozen=True)
class ModelConfig:
    """Trained model parameters besides the templates themselves."""

    norm: NormKind
    rank: int
    class_labels: tuple[str, str]

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if len(self.class_labels) != 2 or self.class_labels[0] == self.class_labels[1]:
            raise ValueError("class_labels must be two distinct labels")


@dataclass
class PredictionOutcome:
    """Predicted label plus the per-class reconstruction errors."""

    predicted: str
    errors: dict[str, float]


@dataclass
class RankSweepResult:
    """Per-rank prediction probability for each class on one norm."""

    norm: NormKind
    class_labels: tuple[str, str]
    ranks: np.ndarray
    probabilities: np.ndarray  # shape (2, len(ranks)), row per class

    @property
    def p_avg(self) -> np.ndarray:
        return self.probabilities.mean(axis=0)


@dataclass
class EvalRecord:
    """Evaluation detail for a single test image."""

    name: str
    true_label: str
    predicted: str
    errors: dict[str, float]


@dataclass
class EvaluationReport:
    """Confusion matrix, summary metrics, and per-image error pairs."""

    class_labels: tuple[str, str]
    confusion: np.ndarray  # 2x2 counts, rows true class, cols predicted
    accuracy: float
    recall: dict[str, float]
    fp_rate: dict[str, float]
    records: list[EvalRecord] = field(default_factory=list)

    @property
    def balanced_accuracy(self) -> float:
        return float(np.mean(list(self.recall.values())))


def _template_matrices(
    templates: Sequence[ClassTemplate], class_labels: tuple[str, str]
) -> tuple[np.ndarray, np.ndarray]:
    by_label = {t.label: t for t in templates}
    if set(by_label) != set(class_labels):
        raise ValueError(
            f"template labels {sorted(by_label)} do not match classes {sorted(class_labels)}"
        )
    first = by_label[class_labels[0]].matrix
    second = by_label[class_labels[1]].matrix
    if first.shape != second.shape:
        raise ValueError("templates have mismatched dimensions")
    return first, second


def _check_ranks(ranks: Iterable[int], min_dim: int) -> np.ndarray:
    ks = np.asarray(sorted(set(int(k) for k in ranks)), dtype=int)
    if ks.size == 0:
        raise ValueError("rank set is empty")
    if ks[0] < 1 or ks[-1] > min_dim:
        raise ValueError(f"ranks must lie within [1, {min_dim}], got {ks[0]}..{ks[-1]}")
    return ks


def classify(
    test: np.ndarray, templates: Sequence[ClassTemplate], config: ModelConfig
) -> PredictionOutcome:
    """Predict the class of one image by rank-k reconstruction error.

    The truncation is computed once; the error against each full-rank
    template uses ``config.norm``.  Equal errors resolve to the second
    class label.
    """
    first_t, second_t = _template_matrices(templates, config.class_labels)
    test = np.asarray(test, dtype=np.float64)
    if test.shape != first_t.shape:
        raise ValueError(f"test image shape {test.shape} != template shape {first_t.shape}")
    min_dim = min(test.shape)
    if config.rank > min_dim:
        raise ValueError(f"rank {config.rank} exceeds min dimension {min_dim}")
    approx = truncate_many(svd(test), [config.rank])[0]
    first_err = matrix_norm(approx - first_t, config.norm)
    second_err = matrix_norm(approx - second_t, config.norm)
    first, second = config.class_labels
    predicted = first if first_err < second_err else second
    return PredictionOutcome(predicted, {first: float(first_err), second: float(second_err)})


def _second_class_flags(
    items: Sequence,
    first_t: np.ndarray,
    second_t: np.ndarray,
    norms: Sequence[NormKind],
    ranks: np.ndarray,
    workers: int = 1,
) -> dict[NormKind, np.ndarray]:
    """For every (item, rank, norm): True when the second class wins.

    The per-image SVD and truncation stack are shared across all norms;
    reduction order is fixed by the item order regardless of workers.
    """

    def per_image(matrix: np.ndarray) -> dict[NormKind, np.ndarray]:
        stack = truncate_many(svd(matrix), ranks)
        flags = {}
        for norm in norms:
            first_err = matrix_norm_batch(stack - first_t, norm)
            second_err = matrix_norm_batch(stack - second_t, norm)
            flags[norm] = second_err <= first_err  # tie goes to the second class
        return flags

    matrices = [it.matrix for it in items]
    if workers > 1 and len(matrices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_item = list(pool.map(per_image, matrices))
    else:
        per_item = [per_image(m) for m in matrices]
    return {
        norm: np.stack([flags[norm] for flags in per_item]) for norm in norms
    }


def sweep_norms(
    train: LabeledDataset,
    templates: Sequence[ClassTemplate],
    norms: Sequence[NormKind],
    ranks: Iterable[int],
    workers: int = 1,
) -> dict[NormKind, RankSweepResult]:
    """Rank sweep for several norms at once, reusing each image's SVD."""
    labels = train.labels
    first_t, second_t = _template_matrices(templates, labels)
    ks = _check_ranks(ranks, min(first_t.shape))
    items = train.items
    if not items:
        raise DatasetError("cannot sweep an empty dataset")
    is_second = np.array([it.label == labels[1] for it in items])
    if is_second.all() or not is_second.any():
        empty = labels[0] if is_second.all() else labels[1]
        raise DatasetError(f"class '{empty}' has no items in the sweep set")
    flag_table = _second_class_flags(items, first_t, second_t, norms, ks, workers)
    results = {}
    for norm in norms:
        flags = flag_table[norm]  # (n_items, K) True where second class predicted
        p_first = (~flags[~is_second]).mean(axis=0)
        p_second = flags[is_second].mean(axis=0)
        results[norm] = RankSweepResult(
            norm=norm,
            class_labels=labels,
            ranks=ks.copy(),
            probabilities=np.stack([p_first, p_second]),
        )
    return results


def rank_sweep(
    train: LabeledDataset,
    templates: Sequence[ClassTemplate],
    norm: NormKind,
    ranks: Iterable[int],
    workers: int = 1,
) -> RankSweepResult:
    """Per-class prediction probability at every rank for one norm."""
    return sweep_norms(train, templates, [norm], ranks, workers)[norm]


def select_rank(sweep: RankSweepResult) -> int:
    """Smallest rank attaining the maximum average prediction probability."""
    if sweep.ranks.size == 0:
        raise ValueError("empty sweep")
    return int(sweep.ranks[int(np.argmax(sweep.p_avg))])


def select_from_sweeps(
    sweeps: dict[NormKind, RankSweepResult],
) -> tuple[NormKind, int, float]:
    """Best (norm, rank) over sweep results, ties broken fro > 2 > 1 > inf."""
    if not sweeps:
        raise ValueError("no sweeps to select from")
    best: tuple[NormKind, int, float] | None = None
    for norm in NORM_PRIORITY:
        if norm not in sweeps:
            continue
        rank = select_rank(sweeps[norm])
        p = float(np.max(sweeps[norm].p_avg))
        if best is None or p > best[2]:
            best = (norm, rank, p)
    assert best is not None
    return best


def select_norm(
    train: LabeledDataset,
    templates: Sequence[ClassTemplate],
    ranks: Iterable[int],
    norms: Sequence[NormKind] = NORM_PRIORITY,
    workers: int = 1,
) -> tuple[NormKind, int]:
    """Sweep every candidate norm and return the winning (norm, rank)."""
    sweeps = sweep_norms(train, templates, list(norms), ranks, workers)
    norm, rank, _ = select_from_sweeps(sweeps)
    return norm, rank


def metrics_from_confusion(counts) -> tuple[float, list[float], list[float]]:
    """Accuracy, per-class recalls, and per-class false-positive rates.

    ``counts`` is the 2x2 confusion matrix with rows = true class and
    columns = predicted class.  The false-positive rate of a class is the
    fraction of the *other* class's images predicted as it.
    """
    c = np.asarray(counts, dtype=np.int64)
    if c.shape != (2, 2) or (c < 0).any():
        raise ValueError("confusion matrix must be 2x2 nonnegative counts")
    total = int(c.sum())
    if total == 0:
        raise ValueError("confusion matrix is empty")
    accuracy = float((c[0, 0] + c[1, 1]) / total)
    recalls = []
    fp_rates = []
    for i in (0, 1):
        row = c[i].sum()
        other = 1 - i
        other_row = c[other].sum()
        recalls.append(float(c[i, i] / row) if row else 0.0)
        fp_rates.append(float(c[other, i] / other_row) if other_row else 0.0)
    return accuracy, recalls, fp_rates


def evaluate(
    test: LabeledDataset, templates: Sequence[ClassTemplate], config: ModelConfig
) -> EvaluationReport:
    """Classify every item and assemble the full evaluation report."""
    if not test.items:
        raise DatasetError("cannot evaluate an empty dataset")
    labels = config.class_labels
    index = {labels[0]: 0, labels[1]: 1}
    confusion = np.zeros((2, 2), dtype=np.int64)
    records: list[EvalRecord] = []
    for item in test.items:
        if item.label not in index:
            raise DatasetError(f"item '{item.name}' has unknown label '{item.label}'")
        outcome = classify(item.matrix, templates, config)
        confusion[index[item.label], index[outcome.predicted]] += 1
        records.append(EvalRecord(item.name, item.label, outcome.predicted, outcome.errors))
    accuracy, recalls, fp_rates = metrics_from_confusion(confusion)
    return EvaluationReport(
        class_labels=labels,
        confusion=confusion,
        accuracy=accuracy,
        recall={labels[0]: recalls[0], labels[1]: recalls[1]},
        fp_rate={labels[0]: fp_rates[0], labels[1]: fp_rates[1]},
        records=records,
    )
