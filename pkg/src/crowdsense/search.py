"""Worker-level neighbourhood moves scored with the coverage objective.

Shared by the GraphDP replacement loop and the refinement solver.  A move
replaces, adds, re-paths or drops one worker; new paths come from the
time-expanded DP against the coverage of everyone else.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .coverage import EMPTY_OBJECTIVE, CoverageState, ObjectiveConfig
from .grid import Cell, GridSpec, Path, Solution, Worker
from .routing import blocked_mask, dp_paths


@dataclass
class SearchContext:
    grid: GridSpec
    config: ObjectiveConfig
    workers: Mapping[int, Worker]
    budget: float
    blocked: frozenset = frozenset()
    required: Mapping[int, tuple[Cell, ...]] = field(default_factory=dict)
    bonus: np.ndarray | None = None  # per-visit score bonus, [t, x, y]
    refine_rounds: int = 1

    def __post_init__(self):
        self._block = blocked_mask(self.blocked, self.grid)

    @property
    def block_array(self) -> np.ndarray:
        return self._block

    def cost(self, wid: int, path: Path) -> float:
        w = self.workers.get(wid)
        return len(path) * (w.reward_per_step if w is not None else 1.0)

    def total_cost(self, sol: Solution) -> float:
        return sum(self.cost(k, p) for k, p in sol.assignments.items())

    def bonus_of(self, path) -> float:
        if self.bonus is None:
            return 0.0
        b = self.bonus
        return float(sum(b[t, x, y] for x, y, t in path))

    def state(self, sol: Solution) -> CoverageState:
        return CoverageState(self.grid, self.config, sol.steps())

    def score(self, sol: Solution) -> float:
        st = self.state(sol)
        return st.value() + sum(self.bonus_of(p) for p in sol.assignments.values())

    def extra(self, region: tuple[Cell, ...] = (), region_weight: float = 0.0) -> np.ndarray | float:
        """Node rewards added on top of the coverage gains (priority bonus, suggested region)."""
        if self.bonus is None and not region:
            return 0.0
        g = self.grid
        e = np.zeros((g.num_slots, g.width, g.height)) if self.bonus is None else self.bonus.copy()
        for x, y in region:
            e[:, x, y] += region_weight
        return e

    def rewards(self, base: CoverageState, extra: np.ndarray | float = 0.0) -> np.ndarray:
        return base.cell_gains() + extra

    def best_path(self, wid: int, base: CoverageState, rewards: np.ndarray, max_cost: float,
                  base_bonus: float = 0.0, extra: np.ndarray | float = 0.0) -> tuple[Path, float] | None:
        """Best DP path for ``wid`` within ``max_cost``; value is the resulting score.

        The DP runs on per-cell gains against a frozen base, which overrates
        paths that crowd into one block.  A second pass re-scores cells with
        the first pass's best path added and keeps whichever path is truly better.
        """
        w = self.workers[wid]
        req = self.required.get(wid, ())
        best = None
        seen = set()
        for rnd in range(self.refine_rounds + 1):
            found = dp_paths(w, self.grid, rewards, self._block, req, max_cost)
            for t in sorted(found):
                p = found[t][0]
                if p in seen:
                    continue
                seen.add(p)
                v = base.value_with(p) + base_bonus + self.bonus_of(p)
                if best is None or v > best[1] + 1e-12:
                    best = (p, v)
            if best is None or rnd == self.refine_rounds:
                break
            # re-score cells as if the current best path were already present
            probe = base.copy()
            probe.add_path(best[0])
            rewards = probe.cell_gains() + extra
        return best


@dataclass(frozen=True)
class Move:
    kind: str  # add_worker | remove_worker | swap_workers | reroute_segment
    out: int | None
    into: int | None
    path: Path | None
    score: float
    solution: Solution

    @property
    def workers(self) -> tuple[int, ...]:
        return tuple(w for w in (self.out, self.into) if w is not None)


def _finite(v: float) -> float:
    return 0.0 if v == EMPTY_OBJECTIVE else v


def propose_moves(sol: Solution, ctx: SearchContext, kinds=("reroute_segment", "swap_workers", "add_worker",
                                                            "remove_worker"),
                  outs: list[int] | None = None, region: tuple[Cell, ...] = (), region_weight: float = 0.0,
                  swap_limit: int | None = None) -> list[Move]:
    """Enumerate moves, each with the score of the resulting solution, best first."""
    moves: list[Move] = []
    cost = ctx.total_cost(sol)
    slack = ctx.budget - cost
    selected = list(sol.assignments)
    pool = [wid for wid in ctx.workers if wid not in sol.assignments]
    full = ctx.state(sol)
    bonus_all = {k: ctx.bonus_of(p) for k, p in sol.assignments.items()}
    total_bonus = sum(bonus_all.values())

    extra = ctx.extra(region, region_weight)
    if "add_worker" in kinds and pool:
        r = ctx.rewards(full, extra)
        for wid in pool:
            if ctx.workers[wid].min_cost() > slack + 1e-9:
                continue
            got = ctx.best_path(wid, full, r, slack, total_bonus, extra)
            if got:
                moves.append(Move("add_worker", None, wid, got[0], got[1], sol.with_path(wid, got[0])))

    outs = selected if outs is None else [w for w in outs if w in sol.assignments]
    if swap_limit is not None and "swap_workers" in kinds:
        # lowest-contribution workers first
        contrib = []
        for wid in outs:
            p = sol.assignments[wid]
            full.remove_path(p)
            contrib.append((_finite(full.value()), wid))
            full.add_path(p)
        swap_outs = {w for _, w in sorted(contrib, key=lambda c: (-c[0], c[1]))[:swap_limit]}
    else:
        swap_outs = set(outs)
    for out in outs:
        p_out = sol.assignments[out]
        base = full.copy()
        base.remove_path(p_out)
        base_bonus = total_bonus - bonus_all[out]
        room = slack + ctx.cost(out, p_out)
        if "remove_worker" in kinds:
            v = base.value() + base_bonus
            moves.append(Move("remove_worker", out, None, None, v, sol.without(out)))
        need_dp = ("reroute_segment" in kinds and out in ctx.workers) or ("swap_workers" in kinds and out in swap_outs)
        if not need_dp:
            continue
        r = ctx.rewards(base, extra)
        if "reroute_segment" in kinds and out in ctx.workers:
            got = ctx.best_path(out, base, r, room, base_bonus, extra)
            if got and got[0] != p_out:
                moves.append(Move("reroute_segment", out, out, got[0], got[1], sol.with_path(out, got[0])))
        if "swap_workers" in kinds and out in swap_outs:
            for wid in pool:
                if ctx.workers[wid].min_cost() > room + 1e-9:
                    continue
                got = ctx.best_path(wid, base, r, room, base_bonus, extra)
                if got:
                    moves.append(Move("swap_workers", out, wid, got[0], got[1],
                                      sol.without(out).with_path(wid, got[0])))
    moves.sort(key=lambda m: -m.score)
    return moves
