"""Score the non-coreset remainder and pick the low-confidence subset.

Confidence is the maximum entry of the classifier's probability vector.
Two selection strategies: a global threshold (keep records whose
confidence is strictly below tau) and per-cluster top-k (keep the k least
confident records of each cluster, ties to the lower id). Coreset records
are never scored, so the selected set is disjoint from the coreset by
construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._chunks import run_chunked
from .classifier import MlpModel, NbModel, mlp_forward, nb_predict
from .clustering import ClusterModel
from .corpus import Dataset
from .embedding import EmbeddingMatrix
from .errors import ConfigError, DataError

__all__ = ["ScoredRecord", "SelectionResult", "score_all", "select_gold"]

GLOBAL_THRESHOLD = "global_threshold"
PER_CLUSTER_TOPK = "per_cluster_topk"


@dataclass(frozen=True)
class ScoredRecord:
    id: int
    cluster: int
    probabilities: np.ndarray  # (k,) float64, sums to 1
    confidence: float  # max probability

    def to_json(self) -> str:
        return json.dumps({
            "id": self.id,
            "cluster": self.cluster,
            "confidence": self.confidence,
            "probabilities": [float(p) for p in self.probabilities],
        })


@dataclass(frozen=True)
class SelectionResult:
    selected_ids: tuple[int, ...]  # ascending
    strategy: str
    tau: float | None
    k_per_cluster: int | None
    scores: tuple[ScoredRecord, ...]

    def manifest(self) -> dict:
        per_cluster: dict[str, int] = {}
        selected = set(self.selected_ids)
        for s in self.scores:
            if s.id in selected:
                key = str(s.cluster)
                per_cluster[key] = per_cluster.get(key, 0) + 1
        out = {
            "strategy": self.strategy,
            "selected_count": len(self.selected_ids),
            "scored_count": len(self.scores),
            "counts_per_cluster": per_cluster,
        }
        if self.strategy == GLOBAL_THRESHOLD:
            out["tau"] = self.tau
        else:
            out["k_per_cluster"] = self.k_per_cluster
        return out


def score_all(scorer, remainder_ids, inputs, model: ClusterModel, threads: int = 1) -> list[ScoredRecord]:
    """One ScoredRecord per remainder id, in ascending id order.

    MLP scorers read rows of an EmbeddingMatrix; NB scorers read the
    dataset records directly.
    """
    ids = sorted(int(i) for i in remainder_ids)
    n = model.assignment.shape[0]
    for rid in ids:
        if rid < 0 or rid >= n:
            raise DataError(f"remainder id {rid} is out of range 0..{n - 1}")

    results: list[ScoredRecord | None] = [None] * len(ids)

    if isinstance(scorer, MlpModel):
        if not isinstance(inputs, EmbeddingMatrix):
            raise DataError("an MLP scorer needs an EmbeddingMatrix input")
        if inputs.dim != scorer.dim:
            raise DataError(f"embedding dim {inputs.dim} != model dim {scorer.dim}")

        def work(start: int, stop: int) -> None:
            for pos in range(start, stop):
                rid = ids[pos]
                probs = mlp_forward(scorer, inputs.data[rid])
                results[pos] = ScoredRecord(rid, int(model.assignment[rid]), probs, float(probs.max()))

    elif isinstance(scorer, NbModel):
        if not isinstance(inputs, Dataset):
            raise DataError("an NB scorer needs a Dataset input")

        def work(start: int, stop: int) -> None:
            for pos in range(start, stop):
                rid = ids[pos]
                probs = nb_predict(scorer, inputs[rid])
                results[pos] = ScoredRecord(rid, int(model.assignment[rid]), probs, float(probs.max()))

    else:
        raise ConfigError(f"unsupported scorer type {type(scorer).__name__}")

    run_chunked(work, len(ids), threads)
    return results  # type: ignore[return-value]


def select_gold(scores, strategy: str = GLOBAL_THRESHOLD, tau: float = 0.7,
                k_per_cluster: int | None = None) -> SelectionResult:
    """Apply the low-confidence selection rule to scored records."""
    scores = list(scores)
    if strategy == GLOBAL_THRESHOLD:
        if scores:
            n_classes = scores[0].probabilities.shape[0]
            if not (1.0 / n_classes < tau <= 1.0):
                raise ConfigError(f"tau must be in (1/{n_classes}, 1], got {tau}")
        selected = sorted(s.id for s in scores if s.confidence < tau)
        return SelectionResult(tuple(selected), strategy, float(tau), None, tuple(scores))

    if strategy == PER_CLUSTER_TOPK:
        if k_per_cluster is None or k_per_cluster < 1:
            raise ConfigError(f"k_per_cluster must be >= 1, got {k_per_cluster}")
        by_cluster: dict[int, list[ScoredRecord]] = {}
        for s in scores:
            by_cluster.setdefault(s.cluster, []).append(s)
        selected = []
        for cluster in sorted(by_cluster):
            members = sorted(by_cluster[cluster], key=lambda s: (s.confidence, s.id))
            selected.extend(s.id for s in members[:k_per_cluster])
        return SelectionResult(tuple(sorted(selected)), strategy, None, int(k_per_cluster), tuple(scores))

    raise ConfigError(f"unknown selection strategy {strategy!r}")


def save_scores(scores, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in scores:
            fh.write(s.to_json() + "\n")


def load_scores(path: str) -> list[ScoredRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out.append(ScoredRecord(
                    int(obj["id"]), int(obj["cluster"]),
                    np.array(obj["probabilities"], dtype=np.float64),
                    float(obj["confidence"]),
                ))
    return out
