"""Dataset splitting, label-noise injection and metric computation.

Noise injection models mislabeled training corpora: an equal number of
samples from each class (a fraction of the class size) gets its label
swapped to the other class, which keeps the class balance intact.
Selection is keyed to the dataset's clean labels, so injecting the same
noise twice restores them; the clean labels ride along on the dataset
for audits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig, LengthMismatch, SingleClassData, TooSmall
from .rng import make_rng
from .vectorize import Dataset

_CLASSES = (1, -1)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.6
    validation_fraction: float = 0.2
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        fractions = (self.train_fraction, self.validation_fraction, self.test_fraction)
        if any(f <= 0 for f in fractions):
            raise InvalidConfig("split fractions must be positive")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise InvalidConfig("split fractions must sum to 1")


@dataclass(frozen=True)
class NoiseSpec:
    flip_fraction: float = 0.1
    seed: int = 0
    apply_to: tuple[str, ...] = ("train", "validation")

    def __post_init__(self):
        if not 0.0 <= self.flip_fraction <= 0.5:
            raise InvalidConfig("flip_fraction must be in [0, 0.5]")
        for part in self.apply_to:
            if part not in ("train", "validation"):
                raise InvalidConfig(
                    f"noise may target only train/validation, not {part!r}"
                )


def stratified_split_indices(
    labels, spec: SplitSpec
) -> tuple[list[int], list[int], list[int]]:
    """Index-level stratified split; rounding residue stays in train.

    Within each class the positions are shuffled by the seed, the floor
    of each fraction goes to validation and test, and the rest to train.
    Each part comes back in ascending original order.
    """
    labels = list(labels)
    if len(labels) < 5:
        raise TooSmall(f"need at least 5 samples, got {len(labels)}")
    if any(l is None for l in labels):
        raise ValueError("split requires labeled data")

    train_idx: list[int] = []
    val_idx: list[int] = []
    test_idx: list[int] = []
    for cls in _CLASSES:
        members = [i for i, l in enumerate(labels) if l == cls]
        if not members:
            continue
        rng = make_rng(spec.seed, "split", cls)
        shuffled = [members[j] for j in rng.permutation(len(members))]
        n_val = int(spec.validation_fraction * len(members))
        n_test = int(spec.test_fraction * len(members))
        val_idx += shuffled[:n_val]
        test_idx += shuffled[n_val : n_val + n_test]
        train_idx += shuffled[n_val + n_test :]
    return sorted(train_idx), sorted(val_idx), sorted(test_idx)


def split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Stratified three-way split of a dataset; see
    stratified_split_indices for the partition rule."""
    train_idx, val_idx, test_idx = stratified_split_indices(data.labels(), spec)
    return data.subset(train_idx), data.subset(val_idx), data.subset(test_idx)


def inject_label_noise(data: Dataset, spec: NoiseSpec) -> Dataset:
    """Swap labels of an equal count of samples from each class.

    The count is flip_fraction times the smaller class size, floored;
    on balanced data that is exactly the stated fraction per class.
    Selection is a deterministic function of (seed, clean labels), so a
    second application with the same spec is an involution.
    """
    base = data.clean_labels if data.clean_labels is not None else data.labels()
    if any(l is None for l in base):
        raise ValueError("noise injection requires labeled data")
    members = {cls: [i for i, l in enumerate(base) if l == cls] for cls in _CLASSES}
    if any(not m for m in members.values()):
        raise SingleClassData("noise injection needs both classes present")

    k = int(spec.flip_fraction * min(len(m) for m in members.values()))
    flip: set[int] = set()
    for cls in _CLASSES:
        rng = make_rng(spec.seed, "noise", cls)
        order = rng.permutation(len(members[cls]))
        flip.update(members[cls][j] for j in order[:k])

    current = data.labels()
    flipped = tuple(-l if i in flip else l for i, l in enumerate(current))
    return data.with_labels(flipped, clean_labels=tuple(base))


@dataclass(frozen=True)
class MetricsReport:
    """Confusion counts and derived rates, +1 taken as the positive class.

    Degenerate denominators (no predicted or no actual positives) score
    1.0 when there was nothing to find and nothing was claimed, 0.0
    otherwise, and always set the degenerate flag.
    """

    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    degenerate: bool

    def as_fields(self) -> str:
        return (
            f"accuracy={self.accuracy!r} precision={self.precision!r} "
            f"recall={self.recall!r} f1={self.f1!r} "
            f"tp={self.tp} fp={self.fp} tn={self.tn} fn={self.fn} "
            f"degenerate={int(self.degenerate)}"
        )


def metrics_from_counts(tp: int, fp: int, tn: int, fn: int) -> MetricsReport:
    total = tp + fp + tn + fn
    if total < 1:
        raise LengthMismatch("need at least one sample")
    nothing_anywhere = (tp + fp == 0) and (tp + fn == 0)
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision = 1.0 if nothing_anywhere else 0.0
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall = 1.0 if nothing_anywhere else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return MetricsReport(
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        accuracy=(tp + tn) / total,
        precision=precision,
        recall=recall,
        f1=f1,
        degenerate=(tp + fp == 0) or (tp + fn == 0),
    )


def compute_metrics(predictions, labels) -> MetricsReport:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.ndim != 1:
        raise LengthMismatch(
            f"predictions {predictions.shape} vs labels {labels.shape}"
        )
    if predictions.shape[0] < 1:
        raise LengthMismatch("need at least one sample")
    tp = int(np.sum((predictions == 1) & (labels == 1)))
    fp = int(np.sum((predictions == 1) & (labels == -1)))
    tn = int(np.sum((predictions == -1) & (labels == -1)))
    fn = int(np.sum((predictions == -1) & (labels == 1)))
    return metrics_from_counts(tp, fp, tn, fn)


METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


@dataclass(frozen=True)
class MetricSummary:
    worst: float
    best: float
    mean: float
    std: float


def summarize_metric(reports: list[MetricsReport], metric: str) -> MetricSummary:
    values = np.array([getattr(r, metric) for r in reports], dtype=np.float64)
    return MetricSummary(
        worst=float(values.min()),
        best=float(values.max()),
        mean=float(values.mean()),
        std=float(values.std()),
    )
