"""JSONL and JSON file helpers with atomic writes and stage metadata."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

from . import PIPELINE_VERSION


def read_jsonl(path: str | Path) -> Iterator[dict]:
    """Yield one parsed record per non-blank line."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def dumps_record(record: Mapping[str, Any]) -> str:
    return json.dumps(record, ensure_ascii=False)


def write_jsonl(path: str | Path, records: Iterable[Mapping[str, Any]]) -> int:
    """Write records one per line via a temp file and atomic rename."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    count = 0
    with open(tmp, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps_record(rec))
            fh.write("\n")
            count += 1
    os.replace(tmp, path)
    return count


def write_json(path: str | Path, obj: Any) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_stage_meta(out_path: str | Path, stage: str, inputs: Mapping[str, str | Path]) -> Path:
    """Record pipeline version and input hashes next to a stage output.

    Stale intermediates are detectable by re-hashing the inputs. The sidecar
    carries no timestamps so reruns stay byte-identical.
    """
    out_path = Path(out_path)
    meta = {
        "pipeline_version": PIPELINE_VERSION,
        "stage": stage,
        "inputs": {name: sha256_file(p) for name, p in sorted(inputs.items()) if Path(p).is_file()},
    }
    meta_path = out_path.with_name(out_path.name + ".meta.json")
    write_json(meta_path, meta)
    return meta_path
