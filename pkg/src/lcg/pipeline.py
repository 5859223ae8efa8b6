"""End-to-end orchestration: every stage reads and writes out_dir artifacts.

`run` is literally the stages executed in order, each one loading its
inputs back from the files the previous stage wrote. That makes manual
stage-by-stage invocation produce byte-identical artifacts to a single
run: there is no in-memory fast path to diverge from.

Artifacts (all inside out_dir):
    embeddings.lcge              raw per-record embeddings
    clusters.json                cluster report (k, seed, iterations, ...)
    assignment.u32               per-record cluster index, little-endian u32
    centroids.f32                k x dim centroid matrix, little-endian f32
    distances.f32                per-record distance to assigned centroid
    coreset.jsonl                pseudo-labeled training subset
    model.lcgm | model.lcgn      trained classifier
    scores.jsonl                 remainder confidences and probabilities
    subset.jsonl                 the selected low-confidence records
    manifest.json                selection strategy and per-cluster counts
    report.json                  histogram + sweep + selection summary
    sweep.json                   learning-rate sweep rows (sweep stage only)

Every file is written to a temp name and renamed into place, so a failed
stage never leaves a partial artifact behind.
"""

from __future__ import annotations

import json
import os
import shutil
from contextlib import contextmanager
from dataclasses import dataclass

from . import classifier, clustering, coreset as coreset_mod, report as report_mod, selection
from .corpus import load_dataset, write_subset
from .embedding import hashing_embed, l2_normalize, load_embeddings, write_embeddings
from .errors import ConfigError, DataError, StageError

__all__ = ["PipelineConfig", "run_pipeline", "STAGES"]


@dataclass
class PipelineConfig:
    dataset: str
    format: str = "jsonl"
    provider: str = "hashing"  # hashing | lcge
    embeddings_path: str | None = None
    dim: int = 384
    k: int = 100
    seed: int = 0
    coreset_mode: str = "nearest_fraction"
    coreset_param: float = 0.03
    classifier: str = "mlp"  # mlp | mnb
    lr: float = 1e-5
    epochs: int = 3
    batch: int = 32
    alpha: float = 1.0
    strategy: str = "threshold"  # threshold | topk
    tau: float = 0.7
    k_per_cluster: int | None = None
    include_coreset: bool = False
    out_dir: str = "lcg_out"
    threads: int = 1

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def validate(self) -> None:
        if not self.dataset:
            raise ConfigError("no dataset configured")
        if self.provider not in ("hashing", "lcge"):
            raise ConfigError(f"unknown embedding provider {self.provider!r}")
        if self.provider == "lcge" and not self.embeddings_path:
            raise ConfigError("provider=lcge requires embeddings_path")
        if self.classifier not in ("mlp", "mnb"):
            raise ConfigError(f"unknown classifier {self.classifier!r}")
        if self.strategy not in ("threshold", "topk"):
            raise ConfigError(f"unknown selection strategy {self.strategy!r}")
        if self.strategy == "topk" and (self.k_per_cluster is None or self.k_per_cluster < 1):
            raise ConfigError("strategy=topk requires k_per_cluster >= 1")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")


@contextmanager
def _atomic(path: str):
    """Yield a temp path; rename it over `path` on success, drop it on error."""
    tmp = path + ".tmp"
    try:
        yield tmp
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _load_dataset(cfg: PipelineConfig):
    return load_dataset(cfg.dataset, cfg.format)


def _load_cluster_model(cfg: PipelineConfig):
    return clustering.load_cluster_artifacts(
        cfg.path("clusters.json"), cfg.path("assignment.u32"),
        cfg.path("centroids.f32"), cfg.path("distances.f32"),
    )


def _normalized_embeddings(cfg: PipelineConfig, dataset):
    return l2_normalize(load_embeddings(cfg.path("embeddings.lcge"), dataset))


def _load_coreset(cfg: PipelineConfig):
    return coreset_mod.load_coreset(cfg.path("coreset.jsonl"), cfg.coreset_mode, cfg.coreset_param)


def stage_embed(cfg: PipelineConfig) -> None:
    dataset = _load_dataset(cfg)
    out = cfg.path("embeddings.lcge")
    if cfg.provider == "hashing":
        matrix = hashing_embed(dataset, cfg.dim)
        with _atomic(out) as tmp:
            write_embeddings(matrix, dataset.source_digest, tmp)
    else:
        load_embeddings(cfg.embeddings_path, dataset)  # validate before adopting
        with _atomic(out) as tmp:
            shutil.copyfile(cfg.embeddings_path, tmp)


def stage_cluster(cfg: PipelineConfig) -> None:
    dataset = _load_dataset(cfg)
    normalized = _normalized_embeddings(cfg, dataset)
    model = clustering.kmeans_fit(normalized, cfg.k, cfg.seed, threads=cfg.threads)
    paths = [cfg.path(p) for p in ("clusters.json", "assignment.u32", "centroids.f32", "distances.f32")]
    tmps = [p + ".tmp" for p in paths]
    try:
        clustering.save_cluster_artifacts(model, *tmps)
        for tmp, final in zip(tmps, paths):
            os.replace(tmp, final)
    except BaseException:
        for tmp in tmps:
            if os.path.exists(tmp):
                os.remove(tmp)
        raise


def stage_coreset(cfg: PipelineConfig) -> None:
    model = _load_cluster_model(cfg)
    core = coreset_mod.select_coreset(model, cfg.coreset_mode, cfg.coreset_param)
    with _atomic(cfg.path("coreset.jsonl")) as tmp:
        coreset_mod.save_coreset(core, tmp)


def stage_train(cfg: PipelineConfig) -> None:
    dataset = _load_dataset(cfg)
    core = _load_coreset(cfg)
    model = _load_cluster_model(cfg)
    if cfg.classifier == "mlp":
        normalized = _normalized_embeddings(cfg, dataset)
        mlp = classifier.mlp_train(core, normalized, model.k, cfg.seed,
                                   lr=cfg.lr, epochs=cfg.epochs, batch_size=cfg.batch)
        with _atomic(cfg.path("model.lcgm")) as tmp:
            classifier.save_mlp(mlp, tmp)
    else:
        nb = classifier.nb_train(core, dataset, model.k, cfg.alpha)
        with _atomic(cfg.path("model.lcgn")) as tmp:
            classifier.save_nb(nb, tmp)


def stage_score(cfg: PipelineConfig) -> None:
    dataset = _load_dataset(cfg)
    core = _load_coreset(cfg)
    model = _load_cluster_model(cfg)
    core_ids = set(core.ids())
    remainder = [i for i in range(len(dataset)) if i not in core_ids]
    if cfg.classifier == "mlp":
        scorer = classifier.load_mlp(cfg.path("model.lcgm"))
        inputs = _normalized_embeddings(cfg, dataset)
    else:
        scorer = classifier.load_nb(cfg.path("model.lcgn"))
        inputs = dataset
    scores = selection.score_all(scorer, remainder, inputs, model, threads=cfg.threads)
    with _atomic(cfg.path("scores.jsonl")) as tmp:
        selection.save_scores(scores, tmp)


def stage_select(cfg: PipelineConfig) -> None:
    dataset = _load_dataset(cfg)
    core = _load_coreset(cfg)
    scores = selection.load_scores(cfg.path("scores.jsonl"))
    strategy = selection.GLOBAL_THRESHOLD if cfg.strategy == "threshold" else selection.PER_CLUSTER_TOPK
    result = selection.select_gold(scores, strategy, tau=cfg.tau, k_per_cluster=cfg.k_per_cluster)

    subset_ids = set(result.selected_ids)
    if cfg.include_coreset:
        subset_ids |= set(core.ids())
    with _atomic(cfg.path("subset.jsonl")) as tmp:
        written = write_subset(dataset, subset_ids, tmp)

    manifest = result.manifest()
    manifest["include_coreset"] = cfg.include_coreset
    manifest["coreset_count"] = len(core)
    manifest["written_count"] = written
    with _atomic(cfg.path("manifest.json")) as tmp:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def stage_report(cfg: PipelineConfig) -> None:
    scores = selection.load_scores(cfg.path("scores.jsonl"))
    with open(cfg.path("manifest.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    sweep_rows = []
    if os.path.exists(cfg.path("sweep.json")):
        with open(cfg.path("sweep.json"), "r", encoding="utf-8") as fh:
            sweep_rows = json.load(fh)
    histogram = report_mod.build_histogram(scores)
    with _atomic(cfg.path("report.json")) as tmp:
        report_mod.write_report(tmp, histogram, sweep_rows, manifest)


def stage_sweep(cfg: PipelineConfig) -> list[report_mod.SweepRow]:
    dataset = _load_dataset(cfg)
    core = _load_coreset(cfg)
    model = _load_cluster_model(cfg)
    normalized = _normalized_embeddings(cfg, dataset)
    rows = report_mod.lr_sweep(core, normalized, model.k, cfg.seed,
                               epochs=cfg.epochs, batch_size=cfg.batch)
    with _atomic(cfg.path("sweep.json")) as tmp:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            json.dump([row.to_dict() for row in rows], fh, indent=2, sort_keys=True)
            fh.write("\n")
    return rows


STAGES = {
    "embed": stage_embed,
    "cluster": stage_cluster,
    "coreset": stage_coreset,
    "train": stage_train,
    "score": stage_score,
    "select": stage_select,
    "report": stage_report,
}

RUN_ORDER = ("embed", "cluster", "coreset", "train", "score", "select", "report")


def run_stage(cfg: PipelineConfig, name: str):
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    fn = stage_sweep if name == "sweep" else STAGES[name]
    try:
        return fn(cfg)
    except Exception as exc:
        raise StageError(name, exc) from exc


def run_pipeline(cfg: PipelineConfig) -> None:
    """Execute every stage in order; idempotent for a fixed config and seed."""
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    for name in RUN_ORDER:
        try:
            STAGES[name](cfg)
        except Exception as exc:
            raise StageError(name, exc) from exc
