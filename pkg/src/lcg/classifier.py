"""Deliberately under-fit confidence scorers trained on the coreset.

Two interchangeable classifiers over the cluster pseudo-labels:

* a two-layer MLP head (gelu hidden layer, softmax output) trained with
  minibatch Adam for a hard-capped number of epochs, and
* multinomial naive Bayes over raw token counts with Laplace smoothing.

The epoch ceiling is the whole point: training always stops at epoch 3 at
the latest, never on convergence, so the scorer stays uncertain about
anything that does not resemble the centroid-proximal training set.

Model files are little-endian binaries: "LCGM" (MLP) and "LCGN" (NB),
u32 version and dims, float32 parameter blocks, and for NB the vocabulary
as length-prefixed UTF-8 strings in column order.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .coreset import CoreSet
from .corpus import Dataset, InstructionRecord
from .embedding import EmbeddingMatrix, tokenize
from .errors import ConfigError, DataError, NumericError

__all__ = [
    "MlpModel",
    "NbModel",
    "gelu",
    "gelu_grad",
    "softmax",
    "mlp_forward",
    "mlp_loss_and_grads",
    "mlp_train",
    "nb_train",
    "nb_predict",
    "save_mlp",
    "load_mlp",
    "save_nb",
    "load_nb",
]

EPOCH_CEILING = 3

MLP_MAGIC = b"LCGM"
NB_MAGIC = b"LCGN"
MODEL_VERSION = 1

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x):
    """x * Phi(x) with the exact error-function normal CDF."""
    x = np.asarray(x, dtype=np.float64)
    return x * 0.5 * (1.0 + erf(x * _INV_SQRT2))


def gelu_grad(x):
    """d/dx gelu = Phi(x) + x * phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
    return cdf + x * pdf


def softmax(logits):
    """Max-subtracted softmax along the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# MLP
# ---------------------------------------------------------------------------


@dataclass
class MlpModel:
    w1: np.ndarray  # (hidden, dim) float32
    b1: np.ndarray  # (hidden,) float32
    w2: np.ndarray  # (k, hidden) float32
    b2: np.ndarray  # (k,) float32
    epochs_trained: int

    @property
    def dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def k(self) -> int:
        return self.w2.shape[0]


def _init_params(dim: int, hidden: int, k: int, rng: np.random.Generator):
    """Uniform +-1/sqrt(fan_in) per layer, drawn in a fixed order."""
    s1 = 1.0 / math.sqrt(dim)
    s2 = 1.0 / math.sqrt(hidden)
    w1 = rng.uniform(-s1, s1, size=(hidden, dim))
    b1 = rng.uniform(-s1, s1, size=hidden)
    w2 = rng.uniform(-s2, s2, size=(k, hidden))
    b2 = rng.uniform(-s2, s2, size=k)
    return w1, b1, w2, b2


def _forward_batch(w1, b1, w2, b2, x):
    z1 = x @ w1.T + b1
    a1 = gelu(z1)
    z2 = a1 @ w2.T + b2
    return z1, a1, softmax(z2)


def mlp_forward(model: MlpModel, h) -> np.ndarray:
    """Class-probability vector for one embedding row."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 1 or h.shape[0] != model.dim:
        raise DataError(f"embedding of length {h.shape} does not match model dim {model.dim}")
    _, _, probs = _forward_batch(
        model.w1.astype(np.float64), model.b1.astype(np.float64),
        model.w2.astype(np.float64), model.b2.astype(np.float64), h[None, :]
    )
    return probs[0]


def mlp_loss_and_grads(w1, b1, w2, b2, x, y):
    """Mean cross-entropy over the batch and its gradients.

    All arrays float64. y holds integer class labels. Returns
    (loss, (gw1, gb1, gw2, gb2)).
    """
    batch = x.shape[0]
    z1, a1, probs = _forward_batch(w1, b1, w2, b2, x)
    picked = probs[np.arange(batch), y]
    loss = float(-np.mean(np.log(picked)))

    dz2 = probs.copy()
    dz2[np.arange(batch), y] -= 1.0
    dz2 /= batch
    gw2 = dz2.T @ a1
    gb2 = dz2.sum(axis=0)
    da1 = dz2 @ w2
    dz1 = da1 * gelu_grad(z1)
    gw1 = dz1.T @ x
    gb1 = dz1.sum(axis=0)
    return loss, (gw1, gb1, gw2, gb2)


def mlp_train(
    coreset: CoreSet,
    embeddings,
    k: int,
    seed: int,
    lr: float = 1e-5,
    epochs: int = 3,
    batch_size: int = 32,
    hidden: int = 768,
) -> MlpModel:
    """Train the MLP head on coreset rows with minibatch Adam.

    Runs for min(epochs, 3) full epochs: the 3-epoch ceiling is a hard
    stop and there is no convergence-based early exit. Given identical
    inputs and seed, the returned parameters are bit-identical.
    """
    if len(coreset) == 0:
        raise DataError("coreset is empty")
    if lr <= 0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    if epochs < 1:
        raise ConfigError(f"epochs must be >= 1, got {epochs}")
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")

    data = embeddings.data if isinstance(embeddings, EmbeddingMatrix) else np.asarray(embeddings)
    ids = np.array([e.id for e in coreset.entries], dtype=np.int64)
    labels = np.array([e.pseudo_label for e in coreset.entries], dtype=np.int64)
    present = np.unique(labels)
    if present.size != k or present[0] != 0 or present[-1] != k - 1:
        missing = sorted(set(range(k)) - set(present.tolist()))
        raise DataError(f"coreset is missing class(es) {missing}")

    x_all = data[ids].astype(np.float64)
    dim = x_all.shape[1]
    rng = np.random.default_rng(seed)
    w1, b1, w2, b2 = _init_params(dim, hidden, k, rng)

    beta1, beta2, eps = 0.9, 0.999, 1e-8
    moments = [(np.zeros_like(p), np.zeros_like(p)) for p in (w1, b1, w2, b2)]
    params = [w1, b1, w2, b2]
    step = 0

    run_epochs = min(epochs, EPOCH_CEILING)
    n = x_all.shape[0]
    for _ in range(run_epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch_idx = order[start:start + batch_size]
            loss, grads = mlp_loss_and_grads(*params, x_all[batch_idx], labels[batch_idx])
            if not math.isfinite(loss):
                raise NumericError(f"training loss became non-finite ({loss})")
            step += 1
            bc1 = 1.0 - beta1**step
            bc2 = 1.0 - beta2**step
            for i, grad in enumerate(grads):
                m, v = moments[i]
                m *= beta1
                m += (1.0 - beta1) * grad
                v *= beta2
                v += (1.0 - beta2) * grad * grad
                params[i] = params[i] - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)

    return MlpModel(
        w1=params[0].astype(np.float32),
        b1=params[1].astype(np.float32),
        w2=params[2].astype(np.float32),
        b2=params[3].astype(np.float32),
        epochs_trained=run_epochs,
    )


def save_mlp(model: MlpModel, path: str) -> None:
    header = struct.pack(
        "<4sIIIII", MLP_MAGIC, MODEL_VERSION,
        model.dim, model.hidden, model.k, model.epochs_trained,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for block in (model.w1, model.b1, model.w2, model.b2):
            fh.write(np.ascontiguousarray(block, dtype="<f4").tobytes())


def load_mlp(path: str) -> MlpModel:
    with open(path, "rb") as fh:
        header = fh.read(24)
        if len(header) < 24:
            raise DataError(f"{path}: truncated model header")
        magic, version, dim, hidden, k, epochs = struct.unpack("<4sIIIII", header)
        if magic != MLP_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {MLP_MAGIC!r}")
        if version != MODEL_VERSION:
            raise DataError(f"{path}: unsupported model version {version}")
        body = fh.read()
    sizes = [hidden * dim, hidden, k * hidden, k]
    if len(body) != 4 * sum(sizes):
        raise DataError(f"{path}: parameter payload has wrong size")
    flat = np.frombuffer(body, dtype="<f4")
    offsets = np.cumsum([0] + sizes)
    w1 = flat[offsets[0]:offsets[1]].reshape(hidden, dim).copy()
    b1 = flat[offsets[1]:offsets[2]].copy()
    w2 = flat[offsets[2]:offsets[3]].reshape(k, hidden).copy()
    b2 = flat[offsets[3]:offsets[4]].copy()
    return MlpModel(w1, b1, w2, b2, int(epochs))


# ---------------------------------------------------------------------------
# Multinomial naive Bayes
# ---------------------------------------------------------------------------


@dataclass
class NbModel:
    class_log_prior: np.ndarray  # (k,) float64
    token_log_likelihood: np.ndarray  # (k, v) float64
    vocabulary: dict[str, int]
    alpha: float

    @property
    def k(self) -> int:
        return self.class_log_prior.shape[0]


def nb_train(coreset: CoreSet, dataset: Dataset, k: int, alpha: float = 1.0) -> NbModel:
    """Fit class priors and Laplace-smoothed token likelihoods on the coreset.

    Features are raw token counts of instruction + " " + input under the
    same tokenizer the hashing embedder uses, just without the bucketing.
    """
    if len(coreset) == 0:
        raise DataError("coreset is empty")
    if alpha <= 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")

    labels = [e.pseudo_label for e in coreset.entries]
    present = sorted(set(labels))
    if present != list(range(k)):
        missing = sorted(set(range(k)) - set(present))
        raise DataError(f"coreset is missing class(es) {missing}")

    docs = [(e.pseudo_label, tokenize(dataset[e.id].text())) for e in coreset.entries]
    vocab = {tok: col for col, tok in enumerate(sorted({t for _, toks in docs for t in toks}))}
    v = len(vocab)

    class_docs = np.zeros(k, dtype=np.float64)
    counts = np.zeros((k, v), dtype=np.float64)
    for label, toks in docs:
        class_docs[label] += 1.0
        for tok in toks:
            counts[label, vocab[tok]] += 1.0

    class_log_prior = np.log(class_docs / class_docs.sum())
    totals = counts.sum(axis=1, keepdims=True)
    token_log_likelihood = np.log((counts + alpha) / (totals + alpha * v)) if v else np.zeros((k, 0))
    return NbModel(class_log_prior, token_log_likelihood, vocab, float(alpha))


def nb_predict(model: NbModel, record: InstructionRecord) -> np.ndarray:
    """Posterior class probabilities; tokens outside the vocabulary are skipped."""
    log_post = model.class_log_prior.copy()
    for tok in tokenize(record.text()):
        col = model.vocabulary.get(tok)
        if col is not None:
            log_post += model.token_log_likelihood[:, col]
    log_post -= log_post.max()
    probs = np.exp(log_post)
    return probs / probs.sum()


def save_nb(model: NbModel, path: str) -> None:
    columns = sorted(model.vocabulary, key=model.vocabulary.get)
    v = len(columns)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIIIf", NB_MAGIC, MODEL_VERSION, model.k, v, model.alpha))
        fh.write(np.ascontiguousarray(model.class_log_prior, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(model.token_log_likelihood, dtype="<f4").tobytes())
        for token in columns:
            raw = token.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)


def load_nb(path: str) -> NbModel:
    with open(path, "rb") as fh:
        header = fh.read(20)
        if len(header) < 20:
            raise DataError(f"{path}: truncated model header")
        magic, version, k, v, alpha = struct.unpack("<4sIIIf", header)
        if magic != NB_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {NB_MAGIC!r}")
        if version != MODEL_VERSION:
            raise DataError(f"{path}: unsupported model version {version}")
        prior = np.frombuffer(fh.read(4 * k), dtype="<f4").astype(np.float64)
        likelihood = np.frombuffer(fh.read(4 * k * v), dtype="<f4").astype(np.float64).reshape(k, v)
        vocab: dict[str, int] = {}
        for col in range(v):
            (length,) = struct.unpack("<I", fh.read(4))
            vocab[fh.read(length).decode("utf-8")] = col
    return NbModel(prior, likelihood, vocab, float(alpha))
