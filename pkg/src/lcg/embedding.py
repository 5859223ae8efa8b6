"""Per-record embeddings: precomputed-file loader and hashing fallback.

Two providers produce the N x dim float32 matrix the rest of the pipeline
consumes. The file loader reads the LCGE binary format (written by the
exporter app) and refuses anything whose record count or source digest does
not match the loaded dataset. The hashing embedder is a dependency-free
stand-in: bucketed token counts under 64-bit FNV-1a, log-damped, fully
deterministic.

LCGE layout (little-endian): magic "LCGE", u32 version=1, u32 count,
u32 dim, 32-byte SHA-256 of the dataset file, then count*dim float32
values row-major.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass

import numpy as np

from .corpus import Dataset
from .errors import ConfigError, DataError, NumericError

__all__ = [
    "EmbeddingMatrix",
    "tokenize",
    "fnv1a_64",
    "hashing_embed",
    "load_embeddings",
    "write_embeddings",
    "l2_normalize",
]

LCGE_MAGIC = b"LCGE"
LCGE_VERSION = 1

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class EmbeddingMatrix:
    data: np.ndarray  # (n, dim) float32
    dim: int
    normalized: bool

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[1] != self.dim:
            raise NumericError(f"embedding matrix shape {self.data.shape} does not match dim={self.dim}")
        if self.data.dtype != np.float32:
            raise NumericError(f"embedding matrix must be float32, got {self.data.dtype}")
        bad = np.flatnonzero(~np.isfinite(self.data).all(axis=1))
        if bad.size:
            raise NumericError(f"embedding row {int(bad[0])} contains a non-finite value")
        if self.normalized:
            norms = np.linalg.norm(self.data.astype(np.float64), axis=1)
            off = np.flatnonzero(np.abs(norms - 1.0) > 1e-4)
            if off.size:
                raise NumericError(f"row {int(off[0])} is flagged normalized but has norm {norms[off[0]]:.6g}")

    def __len__(self) -> int:
        return self.data.shape[0]


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters.

    This is the single tokenizer shared by the hashing embedder and the
    count-based classifier, so both see identical token streams.
    """
    return _TOKEN_RE.findall(text.lower())


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _U64
    return h


def hashing_embed(dataset: Dataset, dim: int = 384) -> EmbeddingMatrix:
    """Deterministic bag-of-buckets embedding of instruction + " " + input.

    Each token's 64-bit FNV-1a hash picks a bucket mod dim; bucket counts
    are damped as ln(1+count). Records with no tokens at all get a one-hot
    row at bucket 0 so no row is ever all zeros.
    """
    if dim < 2:
        raise ConfigError(f"embedding dim must be >= 2, got {dim}")
    rows = np.zeros((len(dataset), dim), dtype=np.float64)
    for rec in dataset.records:
        tokens = tokenize(rec.text())
        if not tokens:
            rows[rec.id, 0] = 1.0
            continue
        counts: dict[int, int] = {}
        for tok in tokens:
            bucket = fnv1a_64(tok.encode("utf-8")) % dim
            counts[bucket] = counts.get(bucket, 0) + 1
        for bucket, count in counts.items():
            rows[rec.id, bucket] = np.log1p(count)
    return EmbeddingMatrix(rows.astype(np.float32), dim, normalized=False)


def load_embeddings(path: str, dataset: Dataset) -> EmbeddingMatrix:
    """Read an LCGE file and bind it to the dataset it was computed from.

    Count and digest must match the dataset exactly; this is what prevents
    silently pairing embeddings with the wrong (or edited) source file.
    """
    try:
        with open(path, "rb") as fh:
            header = fh.read(48)
            if len(header) < 48:
                raise DataError(f"{path}: truncated LCGE header")
            magic, version, count, dim = struct.unpack("<4sIII", header[:16])
            digest = header[16:48]
            if magic != LCGE_MAGIC:
                raise DataError(f"{path}: bad magic {magic!r}, expected {LCGE_MAGIC!r}")
            if version != LCGE_VERSION:
                raise DataError(f"{path}: unsupported LCGE version {version}")
            if count != len(dataset):
                raise DataError(f"{path}: embedding count {count} != dataset size {len(dataset)}")
            if digest != dataset.source_digest:
                raise DataError(f"{path}: source digest mismatch; embeddings were built from a different file")
            body = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read embeddings {path}: {exc}") from exc

    expected = count * dim * 4
    if len(body) != expected:
        raise DataError(f"{path}: payload is {len(body)} bytes, expected {expected}")
    data = np.frombuffer(body, dtype="<f4").reshape(count, dim).astype(np.float32, copy=True)
    bad = np.flatnonzero(~np.isfinite(data).all(axis=1))
    if bad.size:
        raise DataError(f"{path}: row {int(bad[0])} contains a non-finite value")
    return EmbeddingMatrix(data, int(dim), normalized=False)


def write_embeddings(matrix: EmbeddingMatrix, source_digest: bytes, path: str) -> None:
    """Write the LCGE binary format; byte-exact counterpart of load_embeddings."""
    if len(source_digest) != 32:
        raise DataError(f"source digest must be 32 bytes, got {len(source_digest)}")
    header = struct.pack("<4sIII", LCGE_MAGIC, LCGE_VERSION, len(matrix), matrix.dim)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(source_digest)
        fh.write(np.ascontiguousarray(matrix.data, dtype="<f4").tobytes())


def l2_normalize(matrix: EmbeddingMatrix) -> EmbeddingMatrix:
    """Scale every row to unit L2 norm. Idempotent; rejects all-zero rows."""
    norms = np.linalg.norm(matrix.data.astype(np.float64), axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise NumericError(f"cannot normalize: row {int(zero[0])} is all zeros")
    data = (matrix.data.astype(np.float64) / norms[:, None]).astype(np.float32)
    return EmbeddingMatrix(data, matrix.dim, normalized=True)
