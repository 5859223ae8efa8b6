import math
import struct

import numpy as np
import pytest

from lcg.embedding import (
    EmbeddingMatrix,
    fnv1a_64,
    hashing_embed,
    l2_normalize,
    load_embeddings,
    tokenize,
    write_embeddings,
)
from lcg.errors import ConfigError, DataError, NumericError


def fnv1a_64_oracle(data: bytes) -> int:
    """Independent FNV-1a reimplementation for cross-checking buckets."""
    h = 14695981039346656037
    for b in data:
        h ^= b
        h = (h * 1099511628211) % (1 << 64)
    return h


class TestTokenize:
    def test_lowercase_and_split(self):
        assert tokenize("Hello, World! 42") == ["hello", "world", "42"]

    def test_underscore_is_a_separator(self):
        assert tokenize("snake_case") == ["snake", "case"]

    def test_runs_collapse(self):
        assert tokenize("a--b  ,, c") == ["a", "b", "c"]

    def test_empty(self):
        assert tokenize("...") == []


class TestHashingEmbed:
    def test_token_counts_log_damped(self, make_dataset):
        ds, _ = make_dataset([{"instruction": "a a b"}])
        dim = 64
        bucket_a = fnv1a_64_oracle(b"a") % dim
        bucket_b = fnv1a_64_oracle(b"b") % dim
        assert bucket_a != bucket_b  # chosen dim keeps these apart
        matrix = hashing_embed(ds, dim)
        row = matrix.data[0]
        assert row[bucket_a] == pytest.approx(math.log(3), abs=1e-6)
        assert row[bucket_b] == pytest.approx(math.log(2), abs=1e-6)
        others = [v for i, v in enumerate(row) if i not in (bucket_a, bucket_b)]
        assert all(v == 0.0 for v in others)

    def test_hash_matches_independent_oracle(self):
        for token in ["a", "b", "query", "multiply", "café"]:
            assert fnv1a_64(token.encode("utf-8")) == fnv1a_64_oracle(token.encode("utf-8"))

    def test_identical_records_identical_rows(self, make_dataset):
        ds, _ = make_dataset([{"instruction": "same text here"},
                              {"instruction": "same text here"}])
        matrix = hashing_embed(ds, 32)
        assert np.array_equal(matrix.data[0], matrix.data[1])

    def test_repeat_calls_byte_identical(self, make_dataset):
        ds, _ = make_dataset([{"instruction": "det wins", "input": "extra"},
                              {"instruction": "more text"}])
        a = hashing_embed(ds, 128).data.tobytes()
        b = hashing_embed(ds, 128).data.tobytes()
        assert a == b

    def test_disjoint_tokens_disjoint_supports(self, make_dataset):
        dim = 512
        left, right = ["alpha", "beta", "gamma"], ["delta", "epsilon", "zeta"]
        buckets = {t: fnv1a_64_oracle(t.encode()) % dim for t in left + right}
        assert len(set(buckets.values())) == len(buckets)  # no collisions at this dim
        ds, _ = make_dataset([{"instruction": " ".join(left)},
                              {"instruction": " ".join(right)}])
        matrix = hashing_embed(ds, dim)
        support0 = set(np.flatnonzero(matrix.data[0]).tolist())
        support1 = set(np.flatnonzero(matrix.data[1]).tolist())
        assert support0 == {buckets[t] for t in left}
        assert support1 == {buckets[t] for t in right}
        assert not (support0 & support1)

    def test_input_contributes_tokens(self, make_dataset):
        ds1, _ = make_dataset([{"instruction": "a", "input": "b"}])
        ds2, _ = make_dataset([{"instruction": "a b"}])
        assert np.array_equal(hashing_embed(ds1, 64).data, hashing_embed(ds2, 64).data)

    def test_tokenless_record_gets_one_hot(self, make_dataset):
        ds, _ = make_dataset([{"instruction": "!!!"}])
        matrix = hashing_embed(ds, 16)
        expected = np.zeros(16, dtype=np.float32)
        expected[0] = 1.0
        assert np.array_equal(matrix.data[0], expected)

    def test_dim_below_two_rejected(self, make_dataset):
        ds, _ = make_dataset([{"instruction": "a"}])
        with pytest.raises(ConfigError):
            hashing_embed(ds, 1)


class TestL2Normalize:
    def test_three_four_five(self, make_dataset):
        matrix = EmbeddingMatrix(np.array([[3.0, 4.0]], dtype=np.float32), 2, normalized=False)
        out = l2_normalize(matrix)
        assert out.normalized
        assert out.data[0] == pytest.approx([0.6, 0.8], abs=1e-7)

    def test_idempotent(self):
        rng = np.random.default_rng(7)
        matrix = EmbeddingMatrix(rng.standard_normal((5, 384)).astype(np.float32), 384, False)
        once = l2_normalize(matrix)
        twice = l2_normalize(once)
        assert np.max(np.abs(once.data - twice.data)) < 1e-6

    def test_unit_row_unchanged(self):
        row = np.zeros((1, 4), dtype=np.float32)
        row[0, 2] = 1.0
        out = l2_normalize(EmbeddingMatrix(row, 4, False))
        assert np.max(np.abs(out.data - row)) < 1e-7

    def test_all_norms_one(self):
        rng = np.random.default_rng(11)
        matrix = EmbeddingMatrix(rng.standard_normal((5, 384)).astype(np.float32), 384, False)
        out = l2_normalize(matrix)
        norms = np.linalg.norm(out.data.astype(np.float64), axis=1)
        assert np.all(np.abs(norms - 1.0) <= 1e-6)

    def test_zero_row_rejected_by_id(self):
        data = np.ones((3, 4), dtype=np.float32)
        data[1] = 0.0
        with pytest.raises(NumericError, match="row 1"):
            l2_normalize(EmbeddingMatrix(data, 4, False))


class TestLcgeFormat:
    def _matrix(self, n=3, dim=8, seed=0):
        rng = np.random.default_rng(seed)
        return EmbeddingMatrix(rng.standard_normal((n, dim)).astype(np.float32), dim, False)

    def test_roundtrip_bit_exact(self, make_dataset, tmp_path):
        ds, _ = make_dataset([{"instruction": f"r{i}"} for i in range(3)])
        matrix = self._matrix(3, 384)
        path = tmp_path / "e.lcge"
        write_embeddings(matrix, ds.source_digest, str(path))
        loaded = load_embeddings(str(path), ds)
        assert loaded.data.tobytes() == matrix.data.tobytes()
        assert loaded.dim == 384
        assert not loaded.normalized

    def test_digest_mismatch_rejected(self, make_dataset, tmp_path):
        ds1, _ = make_dataset([{"instruction": "a"}])
        ds2, _ = make_dataset([{"instruction": "b"}])
        path = tmp_path / "e.lcge"
        write_embeddings(self._matrix(1), ds1.source_digest, str(path))
        with pytest.raises(DataError, match="digest"):
            load_embeddings(str(path), ds2)

    def test_count_mismatch_rejected(self, make_dataset, tmp_path):
        ds, _ = make_dataset([{"instruction": "a"}, {"instruction": "b"}])
        path = tmp_path / "e.lcge"
        write_embeddings(self._matrix(1), ds.source_digest, str(path))
        with pytest.raises(DataError, match="count"):
            load_embeddings(str(path), ds)

    def test_bad_magic_rejected(self, make_dataset, tmp_path):
        ds, _ = make_dataset([{"instruction": "a"}])
        path = tmp_path / "e.lcge"
        write_embeddings(self._matrix(1), ds.source_digest, str(path))
        blob = bytearray(path.read_bytes())
        blob[:4] = b"XXXX"
        path.write_bytes(bytes(blob))
        with pytest.raises(DataError, match="magic"):
            load_embeddings(str(path), ds)

    def test_bad_version_rejected(self, make_dataset, tmp_path):
        ds, _ = make_dataset([{"instruction": "a"}])
        path = tmp_path / "e.lcge"
        write_embeddings(self._matrix(1), ds.source_digest, str(path))
        blob = bytearray(path.read_bytes())
        blob[4:8] = struct.pack("<I", 9)
        path.write_bytes(bytes(blob))
        with pytest.raises(DataError, match="version"):
            load_embeddings(str(path), ds)

    def test_non_finite_value_names_row(self, make_dataset, tmp_path):
        ds, _ = make_dataset([{"instruction": "a"}, {"instruction": "b"}])
        data = np.ones((2, 4), dtype=np.float32)
        data[1, 2] = np.nan
        path = tmp_path / "e.lcge"
        header = struct.pack("<4sIII", b"LCGE", 1, 2, 4)
        path.write_bytes(header + ds.source_digest + data.tobytes())
        with pytest.raises(DataError, match="row 1"):
            load_embeddings(str(path), ds)

    def test_zero_row_loads_fine(self, make_dataset, tmp_path):
        ds, _ = make_dataset([{"instruction": "a"}])
        matrix = EmbeddingMatrix(np.zeros((1, 4), dtype=np.float32), 4, False)
        path = tmp_path / "e.lcge"
        write_embeddings(matrix, ds.source_digest, str(path))
        loaded = load_embeddings(str(path), ds)
        assert np.array_equal(loaded.data, matrix.data)
