"""Meta-operation extraction and a small persistent store with cosine retrieval."""
from __future__ import annotations

import json
import math
import os
import threading
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..disturbances import TYPES as DISTURBANCE_TYPES
from ..disturbances import DisturbedInstance
from ..grid import Solution
from .evaluator import Metrics, MetricsDelta, compute_metrics

OP_TYPES = ("add_worker", "remove_worker", "modify_path", "other")
# weights on the normalised (covered, entropy, objective, cost) deltas
DEFAULT_WEIGHTS = (0.1, 0.2, 1.0, -0.1)


@dataclass(frozen=True)
class OpContext:
    disturbance: str
    budget: float
    centroid: tuple[float, float]  # normalised to [0, 1]

    def to_dict(self) -> dict:
        return {"disturbance": self.disturbance, "budget": self.budget, "centroid": list(self.centroid)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "OpContext":
        return cls(d["disturbance"], float(d["budget"]), tuple(float(c) for c in d["centroid"]))


@dataclass(frozen=True)
class MetaOperation:
    op_type: str
    details: str
    context: OpContext
    metric_gap: MetricsDelta
    impact: float

    def __post_init__(self):
        if self.op_type not in OP_TYPES:
            raise ValueError(f"unknown op_type {self.op_type!r}")
        if not math.isfinite(self.impact):
            raise ValueError("impact must be finite")

    def to_json_obj(self) -> dict:
        return {"op_type": self.op_type, "details": self.details, "context": self.context.to_dict(),
                "metric_gap": self.metric_gap.to_dict(), "impact": self.impact}

    @classmethod
    def from_json_obj(cls, d: Mapping) -> "MetaOperation":
        g = d["metric_gap"]
        return cls(d["op_type"], d["details"], OpContext.from_dict(d["context"]),
                   MetricsDelta(g["d_covered"], g["d_entropy"], g["d_objective"], g["d_cost"]), float(d["impact"]))


def normalise(delta: MetricsDelta, m0: Metrics) -> tuple[float, ...]:
    scale = (max(1.0, m0.covered_count), max(1e-9, abs(m0.entropy)), max(1e-9, abs(m0.objective_value)),
             max(1.0, m0.cost))
    return tuple(d / s for d, s in zip(delta.as_tuple(), scale))


def impact(delta: MetricsDelta, m0: Metrics, weights: Sequence[float] = DEFAULT_WEIGHTS) -> float:
    return float(sum(w * v for w, v in zip(weights, normalise(delta, m0))))


def solution_diff(s0: Solution, st: Solution) -> list[tuple[str, int]]:
    a, b = s0.assignments, st.assignments
    out = [("remove_worker", w) for w in a if w not in b]
    out += [("modify_path", w) for w in a if w in b and a[w] != b[w]]
    out += [("add_worker", w) for w in b if w not in a]
    return out


def _apply_one(s0: Solution, st: Solution, op: str, wid: int) -> Solution:
    if op == "remove_worker":
        return s0.without(wid)
    return s0.with_path(wid, st.assignments[wid])


def _centroid(cells, width: int, height: int) -> tuple[float, float]:
    if not cells:
        return (0.5, 0.5)
    cx = sum(c[0] for c in cells) / len(cells)
    cy = sum(c[1] for c in cells) / len(cells)
    return (cx / max(1, width - 1), cy / max(1, height - 1))


def extract_meta_operation(s0: Solution, st: Solution, m0: Metrics, mt: Metrics, disturbed: DisturbedInstance,
                           disturbance: str = "continue_optimize",
                           weights: Sequence[float] = DEFAULT_WEIGHTS) -> MetaOperation:
    """Most impactful single difference between ``s0`` and ``st``.

    Each difference is replayed alone on ``s0`` and scored by the weighted,
    normalised metric change it causes on its own.
    """
    g = disturbed.grid
    diffs = solution_diff(s0, st)
    total = MetricsDelta.between(m0, mt)
    if not diffs:
        return MetaOperation("other", "no difference between the solutions",
                             OpContext(disturbance, disturbed.effective_budget, (0.5, 0.5)), total, 0.0)
    best = None
    for op, wid in diffs:
        if len(diffs) == 1:
            d = total
        else:
            d = MetricsDelta.between(m0, compute_metrics(_apply_one(s0, st, op, wid), disturbed))
        phi = impact(d, m0, weights)
        if best is None or phi > best[0] + 1e-12:
            best = (phi, op, wid, d)
    phi, op, wid, d = best
    path = s0.assignments.get(wid, ()) if op == "remove_worker" else st.assignments[wid]
    cells = [(x, y) for x, y, _ in path]
    if op == "modify_path":
        old = set((x, y) for x, y, _ in s0.assignments[wid])
        cells = [c for c in cells if c not in old] or cells
    verb = {"add_worker": "added worker", "remove_worker": "removed worker", "modify_path": "changed the path of worker"}
    details = (f"{verb[op]} {wid}: objective {d.d_objective:+.4f}, cost {d.d_cost:+g}, "
               f"covered cells {d.d_covered:+g} ({len(diffs)} difference(s) in total)")
    ctx = OpContext(disturbance, disturbed.effective_budget, _centroid(cells, g.width, g.height))
    return MetaOperation(op, details, ctx, d, phi)


def _sign(v: float) -> float:
    return 1.0 if v > 1e-12 else (-1.0 if v < -1e-12 else 0.0)


def features(op_types: Sequence[str], disturbance: str, centroid: Sequence[float],
             signs: Sequence[float] = (0.0, 0.0, 0.0, 0.0)) -> list[float]:
    """op-type one-hot (multi-hot for queries) + disturbance one-hot + centroid + delta sign pattern."""
    v = [1.0 if o in op_types else 0.0 for o in OP_TYPES]
    v += [1.0 if t == disturbance else 0.0 for t in DISTURBANCE_TYPES]
    v += [float(centroid[0]), float(centroid[1])]
    v += [float(s) for s in signs]
    return v


def entry_features(op: MetaOperation) -> list[float]:
    return features((op.op_type,), op.context.disturbance, op.context.centroid,
                    [_sign(x) for x in op.metric_gap.as_tuple()])


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0 or nb == 0:
        return 0.0
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


@dataclass(frozen=True)
class MemoryQuery:
    op_types: tuple[str, ...]
    disturbance: str
    centroid: tuple[float, float] = (0.5, 0.5)
    signs: tuple[float, ...] = (0.0, 0.0, 1.0, 0.0)

    def vector(self) -> list[float]:
        return features(self.op_types, self.disturbance, self.centroid, self.signs)


class MemoryStore:
    """Ordered meta-operation store; oldest entries are evicted past ``capacity``."""

    def __init__(self, entries=(), capacity: int = 500):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._entries: list[MetaOperation] = list(entries)[-capacity:]
        self._lock = threading.Lock()

    @property
    def entries(self) -> tuple[MetaOperation, ...]:
        return tuple(self._entries)

    def __len__(self):
        return len(self._entries)

    def add(self, op: MetaOperation) -> None:
        with self._lock:
            self._entries.append(op)
            if len(self._entries) > self.capacity:
                del self._entries[0]

    def retrieve(self, query: MemoryQuery, k: int = 3) -> list[MetaOperation]:
        if k < 1:
            raise ValueError("k must be at least 1")
        q = query.vector()
        entries = self.entries
        scored = [(-cosine(q, entry_features(e)), -i, e) for i, e in enumerate(entries)]
        scored.sort(key=lambda r: (r[0], r[1]))
        return [e for *_, e in scored[:k]]

    def to_json_obj(self) -> dict:
        return {"capacity": self.capacity, "entries": [e.to_json_obj() for e in self._entries]}

    @classmethod
    def from_json_obj(cls, d: Mapping) -> "MemoryStore":
        return cls([MetaOperation.from_json_obj(e) for e in d.get("entries", [])], d.get("capacity", 500))

    def save(self, path: str | os.PathLike) -> None:
        tmp = f"{path}.tmp"
        with open(tmp, "w") as f:
            json.dump(self.to_json_obj(), f, indent=1)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "MemoryStore":
        with open(path) as f:
            return cls.from_json_obj(json.load(f))
