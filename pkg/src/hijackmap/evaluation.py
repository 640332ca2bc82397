"""Metrics, the family comparison harness, selection rules, and reports.

``run_experiment`` mirrors the comparison protocol used throughout: every
catalog variant of a family is built from the same seed, trained under one
config, scored on the training and validation splits at the final epoch,
and measured as precision/recall/F1 on the held-out test set. Selection is
either ``val_first`` (maximize validation accuracy, break ties on lower
validation loss) or ``f1_first`` (maximize test F1, break ties on higher
precision); any remaining tie falls back to catalog order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from hijackmap import textprep
from hijackmap.corpus import Dataset, validation_partition
from hijackmap.models import (
    ArchitectureId,
    ModelInstance,
    TokenVocab,
    build_architecture,
    build_token_vocab,
    catalog,
    encode_many,
)
from hijackmap.nnkit.losses import LOSSES
from hijackmap.nnkit.train import TrainConfig, evaluate, train

SELECTION_RULES = ("val_first", "f1_first")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    loss: float
    precision: float
    recall: float
    f1: float


def confusion(predictions: Iterable[int], labels: Iterable[int]) -> ConfusionMatrix:
    """Count a binary confusion matrix with label 1 as the positive class."""
    preds = np.asarray(list(predictions), dtype=int)
    labs = np.asarray(list(labels), dtype=int)
    if preds.shape != labs.shape:
        raise ValueError(f"{preds.size} predictions but {labs.size} labels")
    if preds.size == 0:
        raise ValueError("cannot build a confusion matrix from zero samples")
    return ConfusionMatrix(
        tp=int(np.sum((preds == 1) & (labs == 1))),
        fp=int(np.sum((preds == 1) & (labs == 0))),
        fn=int(np.sum((preds == 0) & (labs == 1))),
        tn=int(np.sum((preds == 0) & (labs == 0))),
    )


def metrics_from_confusion(c: ConfusionMatrix, mean_loss: float = 0.0) -> MetricsReport:
    """Precision, recall, F1 and accuracy with zero denominators giving 0."""
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    accuracy = (c.tp + c.tn) / c.total if c.total else 0.0
    return MetricsReport(accuracy=accuracy, loss=mean_loss,
                         precision=precision, recall=recall, f1=f1)


@dataclass
class ComparisonRow:
    arch: ArchitectureId
    train_acc: float | None = None
    train_loss: float | None = None
    val_acc: float | None = None
    val_loss: float | None = None
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    error: str | None = None


@dataclass
class ComparisonTable:
    family: str
    rows: list[ComparisonRow] = field(default_factory=list)

    def row(self, arch_id: str) -> ComparisonRow:
        for row in self.rows:
            if str(row.arch) == arch_id:
                return row
        raise KeyError(arch_id)

    def in_catalog_order(self) -> list[ComparisonRow]:
        order = {str(a): i for i, a in enumerate(catalog(self.family))}
        return sorted(self.rows, key=lambda r: order[str(r.arch)])


@dataclass
class FeaturizedSplits:
    """Featurizer state plus model-ready arrays for fit/val/test splits.

    The TF-IDF model and the token vocabulary are fitted on the fit split
    only, so validation and test stay unseen by the featurizer.
    """

    tfidf: textprep.TfidfModel
    vocab: TokenVocab
    fit_x: np.ndarray
    val_x: np.ndarray
    test_x: np.ndarray
    fit_ids: np.ndarray
    val_ids: np.ndarray
    test_ids: np.ndarray
    fit_y: np.ndarray
    val_y: np.ndarray
    test_y: np.ndarray

    def for_model(self, arch: ArchitectureId) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if arch.family == "tinyformer":
            return self.fit_ids, self.val_ids, self.test_ids
        return self.fit_x, self.val_x, self.test_x


def featurize_splits(
    train: Dataset,
    test: Dataset,
    config: TrainConfig,
    stoplist: set[str] | None = None,
) -> FeaturizedSplits:
    if stoplist is None:
        stoplist = textprep.default_stoplist()
    fit_ds, val_ds = validation_partition(train, config.val_fraction, seed=config.seed)
    fit_docs = textprep.prepare_documents([r.text for r in fit_ds], stoplist)
    val_docs = textprep.prepare_documents([r.text for r in val_ds], stoplist)
    test_docs = textprep.prepare_documents([r.text for r in test], stoplist)
    tfidf = textprep.fit_tfidf(fit_docs)
    vocab = build_token_vocab(fit_docs)
    labels = lambda ds: np.array([r.label for r in ds], dtype=np.float64)
    return FeaturizedSplits(
        tfidf=tfidf,
        vocab=vocab,
        fit_x=textprep.transform_many(tfidf, fit_docs),
        val_x=textprep.transform_many(tfidf, val_docs),
        test_x=textprep.transform_many(tfidf, test_docs),
        fit_ids=encode_many(fit_docs, vocab),
        val_ids=encode_many(val_docs, vocab),
        test_ids=encode_many(test_docs, vocab),
        fit_y=labels(fit_ds),
        val_y=labels(val_ds),
        test_y=labels(test),
    )


@dataclass
class FamilyResult:
    table: ComparisonTable
    models: dict[str, ModelInstance]
    features: FeaturizedSplits


def run_family(
    train_ds: Dataset,
    test_ds: Dataset,
    family: str,
    config: TrainConfig,
    stoplist: set[str] | None = None,
) -> FamilyResult:
    """Train and score every catalog variant of one family.

    A variant whose training fails gets its row annotated with the error
    instead of aborting the remaining variants.
    """
    feats = featurize_splits(train_ds, test_ds, config, stoplist)
    loss_fn, _ = LOSSES[config.loss]
    table = ComparisonTable(family=family)
    trained: dict[str, ModelInstance] = {}
    for arch in catalog(family):
        row = ComparisonRow(arch=arch)
        try:
            vocab_size = feats.vocab.size if arch.family == "tinyformer" else None
            input_dim = feats.fit_ids.shape[1] if arch.family == "tinyformer" else feats.tfidf.size
            model = build_architecture(arch, input_dim, seed=config.seed, vocab_size=vocab_size)
            cfg = replace(config, lr=arch.learning_rate)
            fit_x, val_x, test_x = feats.for_model(arch)
            has_val = len(feats.val_y) > 0
            train(model, fit_x, feats.fit_y, cfg,
                  val=(val_x, feats.val_y) if has_val else None)
            row.train_loss, row.train_acc = evaluate(model, fit_x, feats.fit_y, config.loss)
            if has_val:
                row.val_loss, row.val_acc = evaluate(model, val_x, feats.val_y, config.loss)
            probs = model.predict(test_x)
            preds = (probs >= 0.5).astype(int)
            cm = confusion(preds, feats.test_y.astype(int))
            report = metrics_from_confusion(cm, loss_fn(probs, feats.test_y))
            row.precision, row.recall, row.f1 = report.precision, report.recall, report.f1
            trained[str(arch)] = model
        except (ArithmeticError, RuntimeError, ValueError) as exc:
            row.error = str(exc)
        table.rows.append(row)
    return FamilyResult(table=table, models=trained, features=feats)


def run_experiment(
    train_ds: Dataset,
    test_ds: Dataset,
    family: str,
    config: TrainConfig,
    stoplist: set[str] | None = None,
) -> ComparisonTable:
    """The comparison table alone; see run_family for the full artifacts."""
    return run_family(train_ds, test_ds, family, config, stoplist).table


def select_preferred(table: ComparisonTable, rule: str) -> ArchitectureId:
    """Deterministic argmax under the given rule, catalog order breaking ties."""
    if rule not in SELECTION_RULES:
        raise ValueError(f"unknown selection rule {rule!r}")
    best: ComparisonRow | None = None
    best_key: tuple[float, float] | None = None
    for row in table.in_catalog_order():
        if row.error is not None:
            continue
        if rule == "val_first":
            if row.val_acc is None:
                raise ValueError(f"{row.arch}: val_first selection needs validation metrics")
            key = (row.val_acc, -row.val_loss)
        else:
            key = (row.f1, row.precision)
        if best_key is None or key > best_key:
            best, best_key = row, key
    if best is None:
        raise ValueError(f"no selectable row in {table.family} table")
    return best.arch


def _fmt(value: float | None) -> str:
    return f"{value:.4f}" if value is not None else "-"


def render_table(table: ComparisonTable) -> str:
    """Fixed-width text report mirroring the two-section table layout."""
    name = table.family.upper()
    lines = [f"{name} model accuracy and loss"]
    lines.append(
        f"{'Architecture':<18}{'TrainAcc':>10}{'TrainLoss':>11}{'ValAcc':>10}{'ValLoss':>10}"
    )
    for row in table.in_catalog_order():
        if row.error is not None:
            lines.append(f"{str(row.arch):<18}ERROR: {row.error}")
            continue
        lines.append(
            f"{str(row.arch):<18}{_fmt(row.train_acc):>10}{_fmt(row.train_loss):>11}"
            f"{_fmt(row.val_acc):>10}{_fmt(row.val_loss):>10}"
        )
    lines.append("")
    lines.append(f"{name} model precision, recall and F1-score")
    lines.append(f"{'Architecture':<18}{'Precision':>10}{'Recall':>10}{'F1':>10}")
    for row in table.in_catalog_order():
        if row.error is not None:
            lines.append(f"{str(row.arch):<18}ERROR: {row.error}")
            continue
        lines.append(
            f"{str(row.arch):<18}{_fmt(row.precision):>10}{_fmt(row.recall):>10}"
            f"{_fmt(row.f1):>10}"
        )
    return "\n".join(lines) + "\n"


_KV_FIELDS = ("train_acc", "train_loss", "val_acc", "val_loss",
              "precision", "recall", "f1")


def render_key_values(table: ComparisonTable) -> str:
    """Machine-readable companion: one ``arch.metric=value`` line per cell."""
    lines = []
    for row in table.in_catalog_order():
        if row.error is not None:
            lines.append(f"{row.arch}.error={row.error}")
            continue
        for name in _KV_FIELDS:
            value = getattr(row, name)
            if value is not None:
                lines.append(f"{row.arch}.{name}={value:.4f}")
    return "\n".join(lines) + "\n"
