"""CSV writers for result tables and segment embeddings."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from ..dataset import atomic_write_text


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def table_csv(rows: list[dict], columns: list[str] | None = None) -> str:
    columns = columns or (list(rows[0]) if rows else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def write_table(path, rows: list[dict], columns: list[str] | None = None) -> Path:
    path = Path(path)
    atomic_write_text(path, table_csv(rows, columns))
    return path


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def embedding_header(length: int = 450) -> list[str]:
    return ["label", "subject_id"] + [f"v{i}" for i in range(length)]


def export_embeddings(path, pairs, twins, length: int = 450) -> Path:
    """One row per reference segment and one per twin segment, for external t-SNE.

    Values are written with float32 precision.
    """
    twins = np.asarray(twins, dtype=float).reshape(-1, length) if len(twins) else np.zeros((0, length))
    if len(pairs) != len(twins):
        raise ValueError(f"export_embeddings: {len(pairs)} reference segments vs {len(twins)} twins")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(embedding_header(length))
    for label, rows in (("reference", [p.ppg for p in pairs]), ("twin", list(twins))):
        for p, vec in zip(pairs, rows):
            vec = np.asarray(vec, dtype=np.float32)
            if vec.size != length:
                raise ValueError(f"{p.subject_id}#{p.segment_index}: segment length {vec.size} != {length}")
            w.writerow([label, p.subject_id] + [repr(float(v)) for v in vec])
    path = Path(path)
    atomic_write_text(path, buf.getvalue())
    return path


def read_embeddings(path) -> tuple[list[str], list[str], np.ndarray]:
    labels, subjects, values = [], [], []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        for row in r:
            labels.append(row[0])
            subjects.append(row[1])
            values.append([float(v) for v in row[2:]])
    arr = np.asarray(values, dtype=float).reshape(-1, len(header) - 2)
    return labels, subjects, arr
