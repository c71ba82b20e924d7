"""Verification shared by the solver, the evaluator and the loop."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..coverage import EMPTY_OBJECTIVE
from ..disturbances import DisturbedInstance, HandlingReport, check_handling, validate_disturbed
from ..grid import GridSpec, Solution, ValidationResult
from ..search import SearchContext

# score bonus per sample taken inside a priority cell, per unit of priority weight
PRIORITY_SCALE = 0.01


@dataclass(frozen=True)
class Verdict:
    validation: ValidationResult
    handling: HandlingReport
    score: float  # J plus any priority bonus; empty solutions score 0

    @property
    def violations(self) -> int:
        return len(self.validation.violations) + len(self.handling.unsatisfied)

    @property
    def rank(self) -> tuple[int, int]:
        # feasibility (budget, windows, blocked cells) outranks disturbance handling,
        # so no edit may trade a hard violation for a handled request
        return (len(self.validation.violations), len(self.handling.unsatisfied))

    @property
    def ok(self) -> bool:
        return self.violations == 0

    @property
    def key(self) -> tuple[int, int, float]:
        """Smaller is better."""
        return (*self.rank, -self.score)


def priority_bonus(disturbed: DisturbedInstance) -> np.ndarray | None:
    cells, weight = disturbed.priority
    if not cells or weight <= 0:
        return None
    g: GridSpec = disturbed.grid
    b = np.zeros((g.num_slots, g.width, g.height))
    for x, y in cells:
        b[:, x, y] = weight * PRIORITY_SCALE
    return b


def search_context(disturbed: DisturbedInstance) -> SearchContext:
    pool = disturbed.pool
    req: dict[int, tuple] = {}
    for w, x, y in disturbed.required_visits:
        req.setdefault(w, ())
        req[w] = req[w] + ((x, y),)
    return SearchContext(disturbed.grid, disturbed.base.objective_config(), pool, disturbed.effective_budget,
                         disturbed.blocked, req, priority_bonus(disturbed))


class Judge:
    """Memoised verification of solutions against one disturbed instance."""

    def __init__(self, disturbed: DisturbedInstance, ctx: SearchContext | None = None):
        self.disturbed = disturbed
        self.ctx = ctx or search_context(disturbed)
        self._cache: dict[Solution, Verdict] = {}

    def __call__(self, sol: Solution) -> Verdict:
        v = self._cache.get(sol)
        if v is None:
            g = self.disturbed.grid
            inside = Solution({k: tuple(st for st in p if g.contains(*st)) for k, p in sol.assignments.items()})
            inside = Solution({k: p for k, p in inside.assignments.items() if p})
            s = self.ctx.score(inside) if len(inside) else 0.0
            if s == EMPTY_OBJECTIVE:
                s = 0.0
            v = Verdict(validate_disturbed(sol, self.disturbed), check_handling(sol, self.disturbed), s)
            self._cache[sol] = v
        return v
