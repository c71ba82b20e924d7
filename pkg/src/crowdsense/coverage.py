"""Coverage multiset, hierarchical entropy and the weighted coverage objective.

Level ``l`` of the hierarchy groups cells into ``2**l x 2**l`` spatial blocks
(and ``2**l`` slot blocks when the time axis is included); boundary blocks are
whatever is left over.  The entropy of a coverage multiset is the mean Shannon
entropy (bits) over levels ``0..L``.  The objective is
``alpha * E + (1 - alpha) * log2(Q)`` with ``Q`` the number of samples.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .grid import DomainError, GridSpec, Solution, Step

EMPTY_OBJECTIVE = float("-inf")


@dataclass(frozen=True)
class ObjectiveConfig:
    alpha: float = 0.5
    levels: int = 0
    include_time_hierarchy: bool = False

    @staticmethod
    def max_levels(grid: GridSpec) -> int:
        return int(math.floor(math.log2(min(grid.width, grid.height))))

    @classmethod
    def for_grid(cls, grid: GridSpec, alpha: float = 0.5, levels: int | None = None,
                 include_time_hierarchy: bool | None = None) -> "ObjectiveConfig":
        top = cls.max_levels(grid)
        if levels is None:
            levels = top
        if not 0 <= levels <= top:
            raise DomainError(f"levels must lie in [0, {top}] for a {grid.width}x{grid.height} grid")
        if include_time_hierarchy is None:
            include_time_hierarchy = grid.width == grid.height == grid.num_slots
        return cls(alpha, levels, include_time_hierarchy)


@dataclass(frozen=True)
class ObjectiveValue:
    entropy: float
    quantity: int
    objective: float

    @property
    def empty(self) -> bool:
        return self.quantity == 0

    def to_dict(self) -> dict:
        return {"entropy": self.entropy, "quantity": self.quantity,
                "objective": None if self.empty else self.objective}


@dataclass(frozen=True)
class CoverageMap:
    counts: Mapping[Step, int]
    grid: GridSpec

    @property
    def quantity(self) -> int:
        return sum(self.counts.values())

    def cells(self) -> list[tuple[int, int, int, int]]:
        return [(x, y, t, n) for (x, y, t), n in sorted(self.counts.items())]

    def union(self, cells: Iterable[Step]) -> "CoverageMap":
        c = Counter(self.counts)
        c.update(tuple(s) for s in cells)
        return CoverageMap(dict(c), self.grid)

    def dense(self) -> np.ndarray:
        """Counts as an array indexed ``[t, y, x]`` (one image per slot)."""
        a = np.zeros((self.grid.num_slots, self.grid.height, self.grid.width), dtype=np.int64)
        for (x, y, t), n in self.counts.items():
            a[t, y, x] += n
        return a

    def to_json_obj(self) -> dict:
        return {"cells": [list(c) for c in self.cells()]}

    @classmethod
    def from_json_obj(cls, d: Mapping, grid: GridSpec) -> "CoverageMap":
        return cls({(x, y, t): n for x, y, t, n in d["cells"]}, grid)


def collect_coverage(solution: Solution, grid: GridSpec) -> CoverageMap:
    return CoverageMap(dict(Counter(solution.steps())), grid)


def _block_key(step: Step, level: int, with_time: bool) -> tuple[int, int, int]:
    x, y, t = step
    return (x >> level, y >> level, (t >> level) if with_time else t)


def _shannon_bits(counts: Iterable[int], total: int) -> float:
    # sorted for bit-for-bit determinism regardless of insertion order
    s = 0.0
    for n in sorted(counts):
        p = n / total
        s -= p * math.log2(p)
    return max(s, 0.0)


def level_entropies(coverage: CoverageMap, config: ObjectiveConfig) -> list[float]:
    q = coverage.quantity
    if q == 0:
        raise DomainError("entropy undefined for empty coverage")
    out = []
    for level in range(config.levels + 1):
        blocks: Counter = Counter()
        for step, n in coverage.counts.items():
            blocks[_block_key(step, level, config.include_time_hierarchy)] += n
        out.append(_shannon_bits(blocks.values(), q))
    return out


def hierarchical_entropy(coverage: CoverageMap, config: ObjectiveConfig) -> float:
    h = level_entropies(coverage, config)
    return sum(h) / len(h)


def objective(coverage: CoverageMap, config: ObjectiveConfig) -> ObjectiveValue:
    q = coverage.quantity
    if q == 0:
        return ObjectiveValue(0.0, 0, EMPTY_OBJECTIVE)
    e = hierarchical_entropy(coverage, config)
    return ObjectiveValue(e, q, config.alpha * e + (1 - config.alpha) * math.log2(q))


def marginal_gain(coverage: CoverageMap, delta_cells: Iterable[Step], config: ObjectiveConfig) -> float:
    delta = [tuple(c) for c in delta_cells]
    if not delta:
        return 0.0
    after = objective(coverage.union(delta), config).objective
    before = objective(coverage, config).objective
    if before == EMPTY_OBJECTIVE:
        return math.inf
    return after - before


def solution_objective(solution: Solution, grid: GridSpec, config: ObjectiveConfig) -> ObjectiveValue:
    return objective(collect_coverage(solution, grid), config)


class _NLogN:
    """Memoised ``n * log2(n)`` for small non-negative integers."""

    def __init__(self, size: int = 256):
        self.table = [0.0] + [n * math.log2(n) for n in range(1, size)]

    def __call__(self, n: int) -> float:
        t = self.table
        if n >= len(t):
            t.extend(k * math.log2(k) for k in range(len(t), 2 * n + 1))
        return t[n]


nlogn = _NLogN()


class CoverageState:
    """Mutable coverage with O(levels) updates of the objective.

    Used inside planners and the solver; public results are always recomputed
    from scratch with :func:`objective`.  With ``H_l = log2 Q - S_l / Q`` where
    ``S_l = sum_b n_b log2 n_b`` only the touched block changes on an update.
    """

    def __init__(self, grid: GridSpec, config: ObjectiveConfig, steps: Iterable[Step] = ()):
        self.grid = grid
        self.config = config
        self.q = 0
        self.cells: Counter = Counter()
        self.blocks = [Counter() for _ in range(config.levels + 1)]
        self.s = [0.0] * (config.levels + 1)
        self._wt = config.include_time_hierarchy
        for st in steps:
            self.add(st)

    def copy(self) -> "CoverageState":
        new = CoverageState.__new__(CoverageState)
        new.grid, new.config, new.q, new._wt = self.grid, self.config, self.q, self._wt
        new.cells = Counter(self.cells)
        new.blocks = [Counter(b) for b in self.blocks]
        new.s = list(self.s)
        return new

    def add(self, step: Step, k: int = 1) -> None:
        x, y, t = step
        self.q += k
        self.cells[step] += k
        for lv, blocks in enumerate(self.blocks):
            key = (x >> lv, y >> lv, (t >> lv) if self._wt else t)
            n = blocks[key]
            self.s[lv] += nlogn(n + k) - nlogn(n)
            blocks[key] = n + k

    def remove(self, step: Step, k: int = 1) -> None:
        x, y, t = step
        self.q -= k
        c = self.cells[step] - k
        if c:
            self.cells[step] = c
        else:
            del self.cells[step]
        for lv, blocks in enumerate(self.blocks):
            key = (x >> lv, y >> lv, (t >> lv) if self._wt else t)
            n = blocks[key]
            self.s[lv] += nlogn(n - k) - nlogn(n)
            if n - k:
                blocks[key] = n - k
            else:
                del blocks[key]

    def add_path(self, path: Iterable[Step]) -> None:
        for st in path:
            self.add(st)

    def remove_path(self, path: Iterable[Step]) -> None:
        for st in path:
            self.remove(st)

    def entropy(self) -> float:
        if self.q == 0:
            return 0.0
        lq = math.log2(self.q)
        return sum(max(lq - s / self.q, 0.0) for s in self.s) / len(self.s)

    def value(self) -> float:
        if self.q == 0:
            return EMPTY_OBJECTIVE
        a = self.config.alpha
        return a * self.entropy() + (1 - a) * math.log2(self.q)

    def value_with(self, path: Iterable[Step]) -> float:
        path = list(path)
        self.add_path(path)
        v = self.value()
        self.remove_path(path)
        return v

    def cell_gains(self) -> np.ndarray:
        """Objective change from adding one sample at each cell, shape ``[t, x, y]``.

        With empty coverage every cell scores 1.0 (all single cells are equivalent).
        """
        g = self.grid
        if self.q == 0:
            return np.ones((g.num_slots, g.width, g.height))
        a, L = self.config.alpha, len(self.s)
        q, q1 = self.q, self.q + 1
        xs = np.arange(g.width)
        ys = np.arange(g.height)
        ts = np.arange(g.num_slots)
        total = np.full((g.num_slots, g.width, g.height), (1 - a) * (math.log2(q1) - math.log2(q)))
        for lv, blocks in enumerate(self.blocks):
            bt = (ts >> lv) if self._wt else ts
            shape = (int(bt.max()) + 1, int((xs >> lv).max()) + 1, int((ys >> lv).max()) + 1)
            n = np.zeros(shape, dtype=np.int64)
            for (bx, by, bz), c in blocks.items():
                n[bz, bx, by] = c
            nf = n.astype(float)
            with np.errstate(divide="ignore", invalid="ignore"):
                nl = np.where(nf > 0, nf * np.log2(np.maximum(nf, 1)), 0.0)
                n1l = (nf + 1) * np.log2(nf + 1)
            s_new = self.s[lv] - nl + n1l
            h_old = max(math.log2(q) - self.s[lv] / q, 0.0)
            h_new = np.maximum(math.log2(q1) - s_new / q1, 0.0)
            dh = (h_new - h_old) * (a / L)
            total += dh[np.ix_(bt, xs >> lv, ys >> lv)]
        return total
