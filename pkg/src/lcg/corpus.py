"""Load, validate, and write instruction datasets.

Datasets are JSONL (one object per line) or a single JSON array. Each
record carries "instruction" (required, non-blank), "input" and "output"
(optional, default empty). Records get positional ids 0..N-1; duplicate
text is legal and stays distinct. Text is kept verbatim — no unicode
normalization happens at ingestion.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .errors import DataError

__all__ = ["InstructionRecord", "Dataset", "load_dataset", "write_subset"]


@dataclass(frozen=True)
class InstructionRecord:
    id: int
    instruction: str
    input: str
    output: str

    def text(self) -> str:
        """Instruction and input joined the way every downstream consumer sees them."""
        return self.instruction + " " + self.input


@dataclass(frozen=True)
class Dataset:
    records: tuple[InstructionRecord, ...]
    source_digest: bytes  # SHA-256 of the raw source file

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, record_id: int) -> InstructionRecord:
        return self.records[record_id]


def _coerce_record(obj, index: int, where: str) -> tuple[str, str, str]:
    if not isinstance(obj, dict):
        raise DataError(f"{where}: expected an object, got {type(obj).__name__}")
    instruction = obj.get("instruction")
    if not isinstance(instruction, str) or not instruction.strip():
        raise DataError(f"{where}: record {index} is missing a non-empty 'instruction'")
    inp = obj.get("input", "")
    out = obj.get("output", "")
    if not isinstance(inp, str) or not isinstance(out, str):
        raise DataError(f"{where}: record {index} has non-string 'input' or 'output'")
    return instruction, inp, out


def load_dataset(path: str, format: str = "jsonl") -> Dataset:
    """Read a dataset file and assign positional record ids.

    format is "jsonl" or "json-array". Raises DataError on parse failures
    (naming the offending line), on empty files, and on records without an
    "instruction" field.
    """
    if format not in ("jsonl", "json-array"):
        raise DataError(f"unknown dataset format {format!r}")
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    digest = hashlib.sha256(raw).digest()

    records: list[InstructionRecord] = []
    if format == "jsonl":
        for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            instruction, inp, out = _coerce_record(obj, len(records), f"{path}: line {lineno}")
            records.append(InstructionRecord(len(records), instruction, inp, out))
    else:
        try:
            parsed = json.loads(raw.decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: line {exc.lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(parsed, list):
            raise DataError(f"{path}: expected a top-level JSON array")
        for index, obj in enumerate(parsed):
            instruction, inp, out = _coerce_record(obj, index, path)
            records.append(InstructionRecord(index, instruction, inp, out))

    if not records:
        raise DataError(f"{path}: dataset is empty")
    return Dataset(tuple(records), digest)


def write_subset(dataset: Dataset, ids, path: str) -> int:
    """Write the selected records as JSONL in ascending id order.

    Field values are emitted exactly as loaded. Returns the number of
    records written; an empty id set produces a valid empty file.
    """
    n = len(dataset)
    ordered = sorted(set(int(i) for i in ids))
    for record_id in ordered:
        if record_id < 0 or record_id >= n:
            raise DataError(f"unknown record id {record_id} (dataset has {n} records)")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for record_id in ordered:
                rec = dataset[record_id]
                line = json.dumps(
                    {"instruction": rec.instruction, "input": rec.input, "output": rec.output},
                    ensure_ascii=False,
                )
                fh.write(line + "\n")
    except OSError as exc:
        raise DataError(f"cannot write subset to {path}: {exc}") from exc
    return len(ordered)
