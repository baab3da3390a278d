"""JSON-lines dataset, corpus and query-set readers/writers.

Training file: one instance per line,
  {"question": [floats], "positive": [floats], "negatives": [[floats], ...]}
Corpus file: {"id": int, "features": [floats], "payload": str?} with ids
dense in [0, N) and in order. Query file: {"id": int, "features": [floats],
"relevant": [ids]}.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .errors import DataError
from .types import PassageRecord, TrainingInstance


def _parse_lines(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc


def _write_lines(path, rows):
    with open(path, "w") as f:
        for row in rows:
            f.write(json.dumps(row, separators=(",", ":")))
            f.write("\n")


def load_training_file(path) -> List[TrainingInstance]:
    instances = []
    for lineno, obj in _parse_lines(path):
        try:
            instances.append(
                TrainingInstance(
                    question=np.asarray(obj["question"], dtype=np.float64),
                    positive=np.asarray(obj["positive"], dtype=np.float64),
                    negatives=tuple(
                        np.asarray(n, dtype=np.float64) for n in obj["negatives"]
                    ),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: line {lineno}: bad training instance: {exc}") from exc
    if not instances:
        raise DataError(f"{path}: no training instances")
    return instances


def write_training_file(path, instances: Sequence[TrainingInstance]):
    _write_lines(
        path,
        (
            {
                "question": inst.question.tolist(),
                "positive": inst.positive.tolist(),
                "negatives": [n.tolist() for n in inst.negatives],
            }
            for inst in instances
        ),
    )


def load_corpus_file(path):
    """Returns (features (N, dims) float64, records). Ids must be 0..N-1 in order."""
    rows = []
    records = []
    for lineno, obj in _parse_lines(path):
        try:
            pid = int(obj["id"])
            features = np.asarray(obj["features"], dtype=np.float64)
            payload = obj.get("payload", "").encode()
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: line {lineno}: bad corpus record: {exc}") from exc
        if pid != len(rows):
            raise DataError(f"{path}: line {lineno}: id {pid} breaks dense order (expected {len(rows)})")
        if features.ndim != 1 or not np.all(np.isfinite(features)):
            raise DataError(f"{path}: line {lineno}: features must be a finite vector")
        rows.append(features)
        records.append(PassageRecord(id=pid, payload=payload))
    if not rows:
        raise DataError(f"{path}: empty corpus")
    features = np.stack(rows)
    if features.ndim != 2:
        raise DataError(f"{path}: corpus rows have inconsistent dimensionality")
    return features, records


def write_corpus_file(path, features: np.ndarray, payloads: Optional[Sequence[str]] = None):
    def rows():
        for i, feat in enumerate(features):
            row = {"id": i, "features": feat.tolist()}
            if payloads is not None:
                row["payload"] = payloads[i]
            yield row

    _write_lines(path, rows())


def load_query_file(path):
    """Returns (query ids, features (Q, dims), list of relevant-id lists)."""
    ids, rows, relevant = [], [], []
    for lineno, obj in _parse_lines(path):
        try:
            ids.append(int(obj["id"]))
            rows.append(np.asarray(obj["features"], dtype=np.float64))
            relevant.append([int(r) for r in obj.get("relevant", [])])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: line {lineno}: bad query record: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty query set")
    return ids, np.stack(rows), relevant


def write_query_file(path, ids, features, relevant):
    _write_lines(
        path,
        (
            {"id": int(i), "features": f.tolist(), "relevant": [int(r) for r in rel]}
            for i, f, rel in zip(ids, features, relevant)
        ),
    )


def load_vector_file(path):
    """Query vectors from JSONL ({"features": [...]}) or whitespace-separated text."""
    vectors = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            if line.lstrip().startswith("{"):
                obj = json.loads(line)
                vectors.append(np.asarray(obj["features"], dtype=np.float64))
            else:
                vectors.append(np.asarray([float(v) for v in line.split()], dtype=np.float64))
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}: line {lineno}: bad query vector: {exc}") from exc
    if not vectors:
        raise DataError(f"{path}: no query vectors")
    return np.stack(vectors)
