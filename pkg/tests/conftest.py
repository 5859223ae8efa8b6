import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lcg.corpus import load_dataset


@pytest.fixture
def make_dataset(tmp_path):
    """Write records to a JSONL file and load them back as a Dataset."""

    counter = {"n": 0}

    def build(records):
        counter["n"] += 1
        path = tmp_path / f"ds_{counter['n']}.jsonl"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        return load_dataset(str(path)), str(path)

    return build
