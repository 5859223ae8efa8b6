"""Centroid-proximal sample selection per cluster.

Two modes:

* nearest_fraction f: per cluster of size n, keep the max(1, floor(f*n))
  records closest to the centroid.
* distance_percentile p: per cluster, keep records strictly closer than the
  nearest-rank p-th percentile of that cluster's distances (the
  ceil(p/100 * n)-th smallest value), falling back to the single closest
  record if the strict cut selects nothing.

Every cluster contributes at least one record so the downstream classifier
sees every class. Selection order and tie-breaks are canonical: distance
ascending, then record id ascending.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .clustering import ClusterModel
from .errors import ConfigError, DataError

__all__ = ["CoresetEntry", "CoreSet", "select_coreset"]

NEAREST_FRACTION = "nearest_fraction"
DISTANCE_PERCENTILE = "distance_percentile"


@dataclass(frozen=True)
class CoresetEntry:
    id: int
    pseudo_label: int
    distance: float


@dataclass(frozen=True)
class CoreSet:
    entries: tuple[CoresetEntry, ...]  # ordered by (pseudo_label, id)
    mode: str
    parameter: float
    gamma_per_cluster: tuple[float, ...] | None  # percentile mode only

    def ids(self) -> list[int]:
        return sorted(entry.id for entry in self.entries)

    def labels_by_id(self) -> dict[int, int]:
        return {entry.id: entry.pseudo_label for entry in self.entries}

    def __len__(self) -> int:
        return len(self.entries)


def _nearest_rank(sorted_values: np.ndarray, p: float) -> float:
    """Nearest-rank percentile: the ceil(p/100 * n)-th smallest value."""
    n = sorted_values.shape[0]
    rank = max(1, math.ceil(p / 100.0 * n))
    return float(sorted_values[rank - 1])


def select_coreset(model: ClusterModel, mode: str = NEAREST_FRACTION, parameter: float = 0.03) -> CoreSet:
    """Pick the pseudo-labeled training subset from a fitted cluster model."""
    if mode == NEAREST_FRACTION:
        if not (0.0 < parameter <= 1.0):
            raise ConfigError(f"nearest_fraction parameter must be in (0, 1], got {parameter}")
    elif mode == DISTANCE_PERCENTILE:
        if not (0.0 < parameter <= 100.0):
            raise ConfigError(f"distance_percentile parameter must be in (0, 100], got {parameter}")
    else:
        raise ConfigError(f"unknown coreset mode {mode!r}")

    assignment = model.assignment.astype(np.int64)
    distance = model.distance.astype(np.float64)
    k = model.k

    entries: list[CoresetEntry] = []
    gammas: list[float] = []
    for cluster in range(k):
        members = np.flatnonzero(assignment == cluster)
        if members.size == 0:
            raise DataError(f"cluster {cluster} has no members")
        dists = distance[members]
        # Canonical order: distance ascending, id ascending on ties.
        order = np.lexsort((members, dists))
        members, dists = members[order], dists[order]

        if mode == NEAREST_FRACTION:
            take = max(1, int(math.floor(parameter * members.size)))
        else:
            gamma = _nearest_rank(dists, parameter)
            gammas.append(gamma)
            take = int(np.searchsorted(dists, gamma, side="left"))
            take = max(take, 1)  # strict cut may select nothing: keep the closest
        for rid, dist in zip(members[:take], dists[:take]):
            entries.append(CoresetEntry(int(rid), cluster, float(dist)))

    return CoreSet(
        entries=tuple(entries),
        mode=mode,
        parameter=float(parameter),
        gamma_per_cluster=tuple(gammas) if mode == DISTANCE_PERCENTILE else None,
    )


def save_coreset(coreset: CoreSet, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for entry in coreset.entries:
            fh.write(json.dumps({"id": entry.id, "pseudo_label": entry.pseudo_label,
                                 "distance": entry.distance}) + "\n")


def load_coreset(path: str, mode: str = NEAREST_FRACTION, parameter: float = 0.03) -> CoreSet:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                entries.append(CoresetEntry(int(obj["id"]), int(obj["pseudo_label"]),
                                            float(obj["distance"])))
    if not entries:
        raise DataError(f"{path}: coreset file is empty")
    return CoreSet(tuple(entries), mode, float(parameter), None)
