"""CSV/JSON ingestion and serialization, plus the flat key=value config format.

Floats are written with ``repr`` so every value survives a round trip
bit-for-bit. Files use ``,`` separators and ``\\n`` line endings with a
mandatory header.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .core import Dataset, OrderedPartition, make_ordered_partition
from .errors import DuplicateIdError, InconsistentDimensionError, ParseError, ValuationError
from .report import ValueReport

__version__ = "0.1.0"


def _read_rows(path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file, header required", line=1) from None
        rows = [(reader.line_num, row) for row in reader if row and any(cell.strip() for cell in row)]
    return header, rows


def _parse_int(text: str, line: int, column: int) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ParseError(f"expected an integer, got {text!r}", line, column) from None


def _parse_float(text: str, line: int, column: int) -> float:
    try:
        return float(text.strip())
    except ValueError:
        raise ParseError(f"expected a number, got {text!r}", line, column) from None


def load_dataset(path, num_classes: int | None = None) -> Dataset:
    """Read ``id,label,f0..f{d-1}``; rows may come in any order but ids must be 0..n-1."""
    header, rows = _read_rows(path)
    if header[:2] != ["id", "label"] or len(header) < 3:
        raise ParseError(f"{path}: header must be 'id,label,f0,...', got {','.join(header)}", line=1)
    dim = len(header) - 2
    expected = [f"f{j}" for j in range(dim)]
    if header[2:] != expected:
        raise ParseError(f"{path}: feature columns must be named {','.join(expected)}", line=1)
    by_id: dict[int, tuple[int, list[float]]] = {}
    for line, row in rows:
        if len(row) != dim + 2:
            raise InconsistentDimensionError(
                f"{path}: expected {dim} features, found {len(row) - 2}", line=line, column=len(row)
            )
        i = _parse_int(row[0], line, 1)
        if i in by_id:
            raise DuplicateIdError(f"{path}: duplicate id {i}", line=line, column=1)
        label = _parse_int(row[1], line, 2)
        if label < 0:
            raise ParseError(f"{path}: negative label {label}", line, 2)
        by_id[i] = (label, [_parse_float(c, line, j + 3) for j, c in enumerate(row[2:])])
    n = len(by_id)
    if sorted(by_id) != list(range(n)):
        raise ParseError(f"{path}: ids must be exactly 0..{n - 1}")
    labels = np.array([by_id[i][0] for i in range(n)], dtype=np.int64)
    features = np.array([by_id[i][1] for i in range(n)], dtype=np.float64).reshape(n, dim)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if n else 1
    return Dataset(features, labels, num_classes)


def save_dataset(dataset: Dataset, path) -> None:
    lines = [",".join(["id", "label"] + [f"f{j}" for j in range(dataset.dim)])]
    for i in range(len(dataset)):
        feats = ",".join(repr(float(v)) for v in dataset.features[i])
        lines.append(f"{i},{int(dataset.labels[i])},{feats}")
    _write(path, lines)


def _write(path, lines: list[str]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_partition(path) -> OrderedPartition:
    """Read ``id,class_rank``; ranks are arbitrary integers, compacted in order."""
    header, rows = _read_rows(path)
    if header != ["id", "class_rank"]:
        raise ParseError(f"{path}: header must be 'id,class_rank'", line=1)
    assignments: dict[int, int] = {}
    for line, row in rows:
        if len(row) != 2:
            raise ParseError(f"{path}: expected 2 columns, found {len(row)}", line=line)
        i = _parse_int(row[0], line, 1)
        if i in assignments:
            raise DuplicateIdError(f"{path}: duplicate id {i}", line=line, column=1)
        assignments[i] = _parse_int(row[1], line, 2)
    return make_ordered_partition(assignments)


def save_partition(sigma: OrderedPartition, path) -> None:
    lines = ["id,class_rank"] + [f"{i},{sigma.class_of[i] + 1}" for i in range(sigma.n)]
    _write(path, lines)


def report_to_dict(report: ValueReport) -> dict:
    return {
        "method": report.method,
        "values": {str(i): float(v) for i, v in enumerate(report.values)},
        "class_sums": [float(s) for s in report.class_sums],
        "partition": [list(c) for c in report.partition.classes],
        "uncertainty": None
        if report.uncertainty is None
        else {str(i): float(v) for i, v in enumerate(report.uncertainty)},
        "meta": report.meta,
    }


def report_from_dict(data: Mapping) -> ValueReport:
    sigma = OrderedPartition(tuple(tuple(c) for c in data["partition"]))
    values = np.array([data["values"][str(i)] for i in range(sigma.n)], dtype=np.float64)
    unc = data.get("uncertainty")
    uncertainty = None if unc is None else np.array([unc[str(i)] for i in range(sigma.n)], dtype=np.float64)
    return ValueReport(values, data["method"], sigma, uncertainty=uncertainty, meta=dict(data.get("meta", {})))


def dumps_report(report: ValueReport) -> str:
    # json uses float.__repr__, the shortest exact round-trip form
    return json.dumps(report_to_dict(report), indent=2, sort_keys=False, allow_nan=True) + "\n"


def save_report(report: ValueReport, path) -> None:
    _write(path, [dumps_report(report).rstrip("\n")])


def load_report(path) -> ValueReport:
    return report_from_dict(json.loads(Path(path).read_text()))


# -- config ------------------------------------------------------------------


def parse_value(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null", ""):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_assignment(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ValuationError(f"expected key=value, got {item!r}")
    key, value = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ValuationError(f"empty key in {item!r}")
    return key, parse_value(value)


def load_config(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    cfg: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            key, value = parse_assignment(line)
        except ValuationError as exc:
            raise ParseError(f"{path}: {exc}", line=lineno) from None
        cfg[key] = value
    return cfg


def apply_overrides(cfg: Mapping, overrides: Iterable[str]) -> dict:
    out = dict(cfg)
    for item in overrides:
        key, value = parse_assignment(item)
        out[key] = value
    return out


def config_hash(cfg: Mapping) -> str:
    blob = json.dumps({k: cfg[k] for k in sorted(cfg)}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
