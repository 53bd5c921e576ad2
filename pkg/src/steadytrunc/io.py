"""Distribution CSV files and validated run summaries."""
from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path
from typing import Sequence

import jsonschema
import numpy as np

from .generator import StateIndex

PROBABILITY = "probability"


class FormatError(ValueError):
    pass


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def write_distribution(path: str | Path, names: Sequence[str], states: np.ndarray, values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + [PROBABILITY])
        for row, p in zip(np.asarray(states).tolist(), np.asarray(values, dtype=float)):
            w.writerow([str(int(a)) for a in row] + [_fmt(p)])


def read_distribution(path: str | Path) -> tuple[list[str], np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-1:] != [PROBABILITY] or len(rows[0]) < 2:
        raise FormatError(f"{path}: expected a header ending in '{PROBABILITY}'")
    names = rows[0][:-1]
    body = rows[1:]
    try:
        states = np.array([[int(a) for a in r[:-1]] for r in body], dtype=np.int64).reshape(len(body), len(names))
        values = np.array([float(r[-1]) for r in body])
    except ValueError as err:
        raise FormatError(f"{path}: {err}") from err
    return names, states, values


def write_table(path: str | Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])


def marginal(states: np.ndarray, values: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    counts, inv = np.unique(states[:, axis], return_inverse=True)
    return counts, np.bincount(inv.ravel(), weights=values)


def summary_schema() -> dict:
    text = resources.files("steadytrunc").joinpath("schema/summary.schema.json").read_text()
    return json.loads(text)


def write_summary(path: str | Path, summary: dict) -> None:
    jsonschema.validate(summary, summary_schema())
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, allow_nan=False)
        fh.write("\n")


def compare(a_path: str | Path, b_path: str | Path) -> dict:
    """Difference metrics over the union of supports; missing states count as zero."""
    names_a, sa, pa = read_distribution(a_path)
    names_b, sb, pb = read_distribution(b_path)
    if len(names_a) != len(names_b):
        raise FormatError(f"state dimensions differ ({len(names_a)} vs {len(names_b)})")
    union = StateIndex(np.vstack([sa, sb])) if len(sa) + len(sb) else None
    if union is None:
        return {"total_abs_diff": 0.0, "max_abs_diff": 0.0, "mass_a_outside_b": 0.0, "mass_b_outside_a": 0.0, "union_size": 0}
    va = np.zeros(len(union))
    vb = np.zeros(len(union))
    np.add.at(va, union.lookup(sa), pa)
    np.add.at(vb, union.lookup(sb), pb)
    in_a = np.zeros(len(union), dtype=bool)
    in_b = np.zeros(len(union), dtype=bool)
    in_a[union.lookup(sa)] = True
    in_b[union.lookup(sb)] = True
    diff = np.abs(va - vb)
    return {
        "total_abs_diff": float(diff.sum()),
        "max_abs_diff": float(diff.max()),
        "mass_a_outside_b": float(va[~in_b].sum()),
        "mass_b_outside_a": float(vb[~in_a].sum()),
        "union_size": len(union),
    }
