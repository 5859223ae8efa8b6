"""Confidence histograms, the learning-rate sweep, and run summaries.

Output is machine-readable JSON plus a plain-text bar rendering; there is
deliberately no plotting dependency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .classifier import mlp_forward, mlp_train
from .coreset import CoreSet, CoresetEntry
from .embedding import EmbeddingMatrix
from .errors import DataError

__all__ = ["ConfidenceHistogram", "build_histogram", "stratified_split", "lr_sweep", "SweepRow"]

DEFAULT_SWEEP_LRS = (1e-4, 1e-5, 1e-6)


@dataclass(frozen=True)
class ConfidenceHistogram:
    bins: tuple[int, ...]  # 10 counts: [0,0.1), [0.1,0.2), ..., [0.9,1.0]
    total: int

    def render(self) -> str:
        """Plain-text bars, one row per 0.1-wide confidence interval."""
        peak = max(self.bins) if self.total else 0
        lines = []
        for i, count in enumerate(self.bins):
            hi = "1.0]" if i == 9 else f"{(i + 1) / 10:.1f})"
            bar = "#" * (round(40 * count / peak) if peak else 0)
            lines.append(f"[{i / 10:.1f}, {hi:<5} {count:>8}  {bar}")
        lines.append(f"total {self.total}")
        return "\n".join(lines)


def build_histogram(scores) -> ConfidenceHistogram:
    """Bin confidences into ten 0.1-wide intervals; 1.0 lands in the last bin."""
    bins = [0] * 10
    total = 0
    for s in scores:
        conf = s.confidence if hasattr(s, "confidence") else float(s)
        bins[min(int(conf * 10), 9)] += 1
        total += 1
    return ConfidenceHistogram(tuple(bins), total)


def stratified_split(coreset: CoreSet, seed: int, train_fraction: float = 0.8):
    """Per-class shuffled split of coreset entries into train and held-out.

    Every class keeps at least one training entry; raises if the held-out
    side would be empty overall.
    """
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[CoresetEntry]] = {}
    for entry in coreset.entries:
        by_class.setdefault(entry.pseudo_label, []).append(entry)

    train: list[CoresetEntry] = []
    heldout: list[CoresetEntry] = []
    for label in sorted(by_class):
        members = by_class[label]
        order = rng.permutation(len(members))
        n_train = int(round(train_fraction * len(members)))
        n_train = min(max(n_train, 1), len(members) if len(members) == 1 else len(members) - 1)
        for pos, idx in enumerate(order):
            (train if pos < n_train else heldout).append(members[idx])
    if not heldout:
        raise DataError("coreset is too small for a stratified train/held-out split")
    train.sort(key=lambda e: (e.pseudo_label, e.id))
    heldout.sort(key=lambda e: (e.pseudo_label, e.id))
    return train, heldout


@dataclass(frozen=True)
class SweepRow:
    lr: float
    accuracy: float
    histogram: ConfidenceHistogram

    def to_dict(self) -> dict:
        return {"lr": self.lr, "accuracy": self.accuracy, "histogram": list(self.histogram.bins)}


def lr_sweep(
    coreset: CoreSet,
    embeddings,
    k: int,
    seed: int,
    lrs=DEFAULT_SWEEP_LRS,
    epochs: int = 3,
    batch_size: int = 32,
    hidden: int = 768,
) -> list[SweepRow]:
    """Train one MLP per learning rate under one shared stratified split.

    Reports held-out pseudo-label accuracy and the confidence histogram
    over all records outside the coreset, per learning rate.
    """
    train, heldout = stratified_split(coreset, seed)
    train_set = CoreSet(tuple(train), coreset.mode, coreset.parameter, None)

    data = embeddings.data if isinstance(embeddings, EmbeddingMatrix) else np.asarray(embeddings)
    coreset_ids = set(e.id for e in coreset.entries)
    remainder = [i for i in range(data.shape[0]) if i not in coreset_ids]

    rows = []
    for lr in lrs:
        model = mlp_train(train_set, embeddings, k, seed, lr=lr, epochs=epochs,
                          batch_size=batch_size, hidden=hidden)
        hits = sum(1 for e in heldout if int(np.argmax(mlp_forward(model, data[e.id]))) == e.pseudo_label)
        accuracy = hits / len(heldout)
        confidences = [float(mlp_forward(model, data[rid]).max()) for rid in remainder]
        rows.append(SweepRow(float(lr), float(accuracy), build_histogram(confidences)))
    return rows


def write_report(path: str, histogram: ConfidenceHistogram, sweep_rows, selection_manifest: dict) -> None:
    payload = {
        "histogram": list(histogram.bins),
        "total": histogram.total,
        "sweep": [row.to_dict() if isinstance(row, SweepRow) else row for row in sweep_rows],
        "selection": selection_manifest,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
