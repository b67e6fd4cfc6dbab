"""Condition reports and artifact writers (CSV at 17 significant digits, JSON)."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from ._tails import TailStats

SCHEMA_VERSION = "soliton-lab/1"
VERDICTS = ("pass", "fail", "inconclusive")


@dataclass(frozen=True)
class ConditionResult:
    condition_id: str
    verdict: str
    threshold: float
    stats: TailStats | None
    r: np.ndarray = field(repr=False, default=None)
    values: np.ndarray = field(repr=False, default=None)
    note: str = ""

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"bad verdict {self.verdict!r}")

    def to_dict(self, max_samples: int = 200) -> dict:
        d = {
            "condition_id": self.condition_id,
            "verdict": self.verdict,
            "threshold": self.threshold,
            "note": self.note,
            "stats": None if self.stats is None else self.stats.to_dict(),
            "samples": [],
        }
        if self.r is not None:
            idx = np.unique(np.linspace(0, len(self.r) - 1, min(max_samples, len(self.r))).astype(int))
            d["samples"] = [{"r": float(self.r[i]), "value": float(self.values[i])} for i in idx]
        return d


@dataclass(frozen=True)
class ConditionReport:
    """Named list of condition verdicts; ids are unique."""

    title: str
    results: tuple

    def __post_init__(self):
        ids = [c.condition_id for c in self.results]
        if len(ids) != len(set(ids)):
            raise ValueError(f"duplicate condition ids in {ids}")

    def __getitem__(self, cid: str) -> ConditionResult:
        for c in self.results:
            if c.condition_id == cid:
                return c
        raise KeyError(cid)

    @property
    def ids(self) -> list:
        return [c.condition_id for c in self.results]

    @property
    def verdicts(self) -> dict:
        return {c.condition_id: c.verdict for c in self.results}

    @property
    def all_pass(self) -> bool:
        return all(c.verdict == "pass" for c in self.results)

    def to_dict(self) -> dict:
        return {"title": self.title, "all_pass": self.all_pass,
                "conditions": [c.to_dict() for c in self.results]}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "inf" if x > 0 else "-inf" if x < 0 else "nan"
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


def write_json(path, payload: dict) -> str:
    """Deterministic JSON (sorted keys, repr-exact floats)."""
    path = os.fspath(path)
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_csv(path, header, columns) -> str:
    """Columns of equal length written with 17 significant digits."""
    path = os.fspath(path)
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    n = {len(c) for c in cols}
    if len(n) != 1:
        raise ValueError("CSV columns differ in length")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow(["%.17g" % x for x in row])
    return path
