"""Seeded disturbance generators used by the experiment suites."""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..disturbances import DisturbanceInstruction, render
from ..grid import Instance, Solution, manhattan
from ..routing import dp_paths
from .generate import generate_workers
from .scales import ScaleConfig


@dataclass(frozen=True)
class DisturbanceSettings:
    budget_frac: float = 0.25  # budget increase as a share of the base budget
    weather_factor: float = 0.5
    priority_weight: float = 1.0
    new_workers: int = 2
    unavailable: int = 1


def _instr(kind: str, value) -> DisturbanceInstruction:
    i = DisturbanceInstruction(kind, "", value)
    return DisturbanceInstruction(kind, render(i), i.value)


def make_disturbance(kind: str, instance: Instance, baseline: Solution, rng: random.Random,
                     settings: DisturbanceSettings | None = None, scale: ScaleConfig | None = None
                     ) -> DisturbanceInstruction:
    s = settings or DisturbanceSettings()
    g = instance.grid
    used = sorted(baseline.assignments)
    if kind == "continue_optimize":
        return _instr(kind, None)
    if kind == "budget_change":
        return _instr(kind, round(instance.budget * s.budget_frac, 6))
    if kind == "bad_weather":
        return _instr(kind, s.weather_factor)
    if kind == "area_blocked":
        # the busiest non-endpoint cell of the baseline, so the baseline itself becomes infeasible
        ends = {c for w in used for c in (instance.worker(w).origin, instance.worker(w).destination)}
        visits = Counter((x, y) for x, y, _ in baseline.steps())
        ranked = sorted((c for c in visits if c not in ends), key=lambda c: (-visits[c], c))
        if ranked:
            return _instr(kind, [ranked[0]])
        free = [(x, y) for x in range(g.width) for y in range(g.height) if (x, y) not in ends]
        return _instr(kind, [rng.choice(free) if free else (g.width // 2, g.height // 2)])
    if kind == "priority_area":
        # the least-covered 2x2 block
        cov = Counter((x // 2, y // 2) for x, y, _ in baseline.steps())
        blocks = [(bx, by) for bx in range((g.width + 1) // 2) for by in range((g.height + 1) // 2)]
        low = min(cov[b] for b in blocks)
        bx, by = rng.choice([b for b in blocks if cov[b] == low])
        cells = [(x, y) for x in (2 * bx, 2 * bx + 1) for y in (2 * by, 2 * by + 1) if g.contains(x, y)]
        return _instr(kind, {"cells": cells, "weight": s.priority_weight})
    if kind == "mid_path_visit":
        order = used[:]
        rng.shuffle(order)
        for wid in order:
            w = instance.worker(wid)
            p = baseline.assignments[wid]
            seen = {(x, y) for x, y, _ in p}
            near = sorted(((min(manhattan((x, y), c) for c in seen), x, y)
                           for x in range(g.width) for y in range(g.height) if (x, y) not in seen))
            for _, x, y in near[:6]:
                if dp_paths(w, g, np.zeros((g.num_slots, g.width, g.height)), None, ((x, y),)):
                    return _instr(kind, [(wid, x, y)])
        return _instr("continue_optimize", None)
    if kind == "worker_unavailable":
        if not used:
            return _instr(kind, [instance.workers[0].id])
        return _instr(kind, sorted(rng.sample(used, min(s.unavailable, len(used)))))
    if kind == "new_worker_available":
        np_rng = np.random.default_rng(rng.getrandbits(63))
        start = max(w.id for w in instance.workers) + 1
        if scale is None:
            scale = ScaleConfig("adhoc", s.new_workers, (g.width, g.height), g.width * g.height, instance.budget,
                                g.num_slots * g.slot_minutes, g.slot_minutes)
        return _instr(kind, generate_workers(scale, np_rng, s.new_workers, start))
    raise ValueError(f"unknown disturbance kind {kind!r}")
