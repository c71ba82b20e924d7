"""Disturbance instructions: schema, text parser/renderer, application and compliance checks.

Payload shapes by type::

    budget_change         float delta
    area_blocked          ((x, y) | (x, y, t0, t1), ...)
    priority_area         {"cells": ((x, y), ...), "weight": float}   (stored as a tuple of pairs)
    mid_path_visit        ((worker_id, x, y), ...)
    worker_unavailable    (worker_id, ...)
    new_worker_available  (Worker, ...)
    bad_weather           float speed factor in (0, 1]
    continue_optimize     None
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

from .coverage import collect_coverage
from .grid import GridSpec, Instance, Solution, Worker, expand_blocked, move_period, solution_cost, validate_path

TYPES = ("budget_change", "area_blocked", "priority_area", "mid_path_visit", "worker_unavailable",
         "new_worker_available", "bad_weather", "continue_optimize")

DEFAULT_WEATHER_FACTOR = 0.5


class DisturbanceError(ValueError):
    pass


class DisturbanceParseError(DisturbanceError):
    def __init__(self, text: str, reason: str = "unrecognised disturbance"):
        super().__init__(f"{reason}: {text!r}")
        self.text = text


@dataclass(frozen=True)
class DisturbanceInstruction:
    type: str
    description: str
    value: Any = None

    def __post_init__(self):
        if self.type not in TYPES:
            raise DisturbanceError(f"unknown disturbance type {self.type!r}")
        object.__setattr__(self, "value", _normalise(self.type, self.value))

    @property
    def priority_cells(self) -> tuple[tuple[int, int], ...]:
        return self.value[0] if self.type == "priority_area" else ()

    @property
    def priority_weight(self) -> float:
        return self.value[1] if self.type == "priority_area" else 0.0

    def to_json_obj(self) -> dict:
        v = self.value
        if self.type == "priority_area":
            v = {"cells": [list(c) for c in v[0]], "weight": v[1]}
        elif self.type == "new_worker_available":
            v = [w.to_dict() for w in v]
        elif isinstance(v, tuple):
            v = [list(c) if isinstance(c, tuple) else c for c in v]
        return {"type": self.type, "description": self.description, "value": v}

    @classmethod
    def from_json_obj(cls, d: Mapping) -> "DisturbanceInstruction":
        return cls(d["type"], d.get("description", ""), d.get("value"))


def _normalise(kind: str, v):
    try:
        if kind == "budget_change":
            return float(v)
        if kind == "bad_weather":
            f = DEFAULT_WEATHER_FACTOR if v is None else float(v)
            if not 0 < f <= 1:
                raise DisturbanceError("speed factor must lie in (0, 1]")
            return f
        if kind == "continue_optimize":
            return None
        if kind == "area_blocked":
            cells = tuple(tuple(int(a) for a in c) for c in v)
            if not cells or any(len(c) not in (2, 4) for c in cells):
                raise DisturbanceError("area_blocked needs (x, y) or (x, y, t0, t1) entries")
            return cells
        if kind == "priority_area":
            if isinstance(v, Mapping):
                cells, w = v["cells"], v.get("weight", 1.0)
            else:
                cells, w = v
            cells = tuple(tuple(int(a) for a in c) for c in cells)
            if not cells or any(len(c) != 2 for c in cells):
                raise DisturbanceError("priority_area needs (x, y) cells")
            return (cells, float(w))
        if kind == "mid_path_visit":
            pairs = tuple(tuple(int(a) for a in c) for c in v)
            if not pairs or any(len(c) != 3 for c in pairs):
                raise DisturbanceError("mid_path_visit needs (worker, x, y) entries")
            return pairs
        if kind == "worker_unavailable":
            ids = tuple(int(a) for a in v)
            if not ids:
                raise DisturbanceError("worker_unavailable needs at least one worker id")
            return ids
        if kind == "new_worker_available":
            ws = tuple(w if isinstance(w, Worker) else Worker.from_dict(w) for w in v)
            if not ws:
                raise DisturbanceError("new_worker_available needs at least one worker")
            return ws
    except (TypeError, KeyError, ValueError) as e:
        if isinstance(e, DisturbanceError):
            raise
        raise DisturbanceError(f"bad payload for {kind}: {v!r}") from e
    raise DisturbanceError(kind)


def check_cells(instr: DisturbanceInstruction, grid: GridSpec) -> None:
    if instr.type == "area_blocked":
        cells = [c[:2] for c in instr.value]
    elif instr.type == "priority_area":
        cells = list(instr.priority_cells)
    elif instr.type == "mid_path_visit":
        cells = [c[1:] for c in instr.value]
    elif instr.type == "new_worker_available":
        cells = [c for w in instr.value for c in (w.origin, w.destination)]
    else:
        return
    for c in cells:
        if not grid.contains(*c):
            raise DisturbanceError(f"cell {tuple(c)} outside the {grid.width}x{grid.height} grid")


# ---------------------------------------------------------------------------
# canonical text

def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _cell(c) -> str:
    return f"({c[0]}, {c[1]})"


def render(instr: DisturbanceInstruction) -> str:
    """Canonical English text that :func:`parse_disturbance` maps back to ``instr``."""
    t, v = instr.type, instr.value
    if t == "budget_change":
        return f"Budget {'increased' if v >= 0 else 'decreased'} by {_num(abs(v))}"
    if t == "area_blocked":
        parts = []
        for c in v:
            s = _cell(c)
            if len(c) == 4:
                s += f" during slots {c[2]}-{c[3]}"
            parts.append(s)
        return "Area blocked of " + ", ".join(parts)
    if t == "priority_area":
        return f"Priority area at {', '.join(_cell(c) for c in v[0])} with weight {_num(v[1])}"
    if t == "mid_path_visit":
        return "; ".join(f"Worker {w} must visit {_cell((x, y))}" for w, x, y in v)
    if t == "worker_unavailable":
        if len(v) == 1:
            return f"Worker {v[0]} drops out"
        return f"Workers {', '.join(str(w) for w in v)} drop out"
    if t == "new_worker_available":
        return "; ".join(
            f"New worker {w.id} available from {_cell(w.origin)} to {_cell(w.destination)} during slots "
            f"{w.t_start}-{w.t_end} at speed {_num(w.speed)} and reward {_num(w.reward_per_step)}" for w in v)
    if t == "bad_weather":
        return f"Bad weather reduces worker speed by factor {_num(v)}"
    return "Continue optimizing the current solution"


NUM = r"[-+]?(?:\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
CELL = r"\(\s*(\d+)\s*,\s*(\d+)\s*\)"
_cell_re = re.compile(CELL + r"(?:\s*(?:during|for|in)\s+slots?\s+(\d+)\s*(?:-|to)\s*(\d+))?", re.I)
_new_worker_re = re.compile(
    r"new\s+worker\s+(\d+)\s+(?:is\s+)?available\s+from\s+" + CELL + r"\s+to\s+" + CELL +
    r"(?:\s+during\s+slots?\s+(\d+)\s*(?:-|to)\s*(\d+))?"
    r"(?:\s+at\s+speed\s+(" + NUM + r"))?(?:\s+and\s+reward\s+(" + NUM + r"))?", re.I)
_visit_re = re.compile(r"worker\s+(\d+)\s+(?:must|should|needs? to|has to)\s+(?:also\s+)?visit\s+" + CELL, re.I)


def _ids(text: str) -> tuple[int, ...]:
    m = re.search(r"workers?\s+((?:#?\d+\s*(?:,|and)?\s*)+)", text, re.I)
    if not m:
        return ()
    return tuple(int(x) for x in re.findall(r"\d+", m.group(1)))


def parse_disturbance(text: str, grid: GridSpec | None = None, pool=None) -> DisturbanceInstruction:
    """Rule-based parser from free text to a structured instruction.

    Raises :class:`DisturbanceParseError` rather than guessing.
    """
    s = text.strip()
    low = s.lower()

    def done(kind, value):
        try:
            instr = DisturbanceInstruction(kind, s, value)
            if grid is not None:
                check_cells(instr, grid)
        except DisturbanceError as e:
            raise DisturbanceParseError(text, str(e)) from e
        if pool is not None and kind in ("worker_unavailable", "mid_path_visit"):
            known = {w.id for w in pool}
            ids = instr.value if kind == "worker_unavailable" else [p[0] for p in instr.value]
            for i in ids:
                if i not in known:
                    raise DisturbanceParseError(text, f"unknown worker {i}")
        return instr

    if "new worker" in low or "new workers" in low:
        ws = []
        for m in _new_worker_re.finditer(s):
            wid, ox, oy, dx, dy, t0, t1, sp, rw = m.groups()
            if t0 is None:
                if grid is None:
                    raise DisturbanceParseError(text, "time window missing")
                t0, t1 = 0, grid.num_slots - 1
            try:
                ws.append(Worker(int(wid), (int(ox), int(oy)), (int(dx), int(dy)), (int(t0), int(t1)),
                                 float(sp) if sp else 1.0, float(rw) if rw else 1.0))
            except ValueError as e:
                raise DisturbanceParseError(text, str(e)) from e
        if not ws:
            raise DisturbanceParseError(text, "could not read the new worker's route")
        return done("new_worker_available", ws)
    if "budget" in low:
        m = re.search(NUM, low[low.index("budget"):])
        if not m:
            raise DisturbanceParseError(text, "budget amount missing")
        amount = abs(float(m.group(0)))
        if re.search(r"decreas|reduc|cut|lower|drop|shrink", low):
            amount = -amount
        elif not re.search(r"increas|rais|add|grow|more|extra|boost", low):
            raise DisturbanceParseError(text, "budget direction missing")
        return done("budget_change", amount)
    if re.search(r"block|closed|closure|inaccessible", low):
        cells = []
        for m in _cell_re.finditer(s):
            x, y, t0, t1 = m.groups()
            cells.append((int(x), int(y)) if t0 is None else (int(x), int(y), int(t0), int(t1)))
        if not cells:
            raise DisturbanceParseError(text, "no blocked cell given")
        span = re.search(r"(?:during|for|in)\s+slots?\s+(\d+)\s*(?:-|to)\s*(\d+)", s, re.I)
        if span and all(len(c) == 2 for c in cells):
            cells = [(*c, int(span.group(1)), int(span.group(2))) for c in cells]
        return done("area_blocked", cells)
    if "priority" in low or "important" in low:
        cells = [(int(x), int(y)) for x, y in re.findall(CELL, s)]
        m = re.search(r"weight\s+(" + NUM + ")", low)
        return done("priority_area", (cells, float(m.group(1)) if m else 1.0))
    if "visit" in low:
        pairs = [(int(w), int(x), int(y)) for w, x, y in _visit_re.findall(s)]
        if not pairs:
            raise DisturbanceParseError(text, "no (worker, cell) visit found")
        return done("mid_path_visit", pairs)
    if re.search(r"drop(s|ped)?\s+out|unavailable|quit|leav|cancel|sick|absent", low):
        ids = _ids(s)
        if not ids:
            raise DisturbanceParseError(text, "no worker id given")
        return done("worker_unavailable", ids)
    if re.search(r"weather|rain|snow|storm|fog", low):
        m = re.search(r"factor\s+(" + NUM + ")", low) or re.search(r"(" + NUM + r")\s*(?:x|times)", low)
        return done("bad_weather", float(m.group(1)) if m else DEFAULT_WEATHER_FACTOR)
    if re.search(r"continue|keep optimi|improve", low):
        return done("continue_optimize", None)
    raise DisturbanceParseError(text)


# ---------------------------------------------------------------------------
# application

@dataclass(frozen=True)
class DisturbedInstance:
    base: Instance
    active: tuple[DisturbanceInstruction, ...] = ()
    effective_budget: float = 0.0
    blocked: frozenset = frozenset()
    priority: tuple[tuple[tuple[int, int], ...], float] = ((), 0.0)
    required_visits: tuple[tuple[int, int, int], ...] = ()
    added: tuple[Worker, ...] = ()
    removed: frozenset = frozenset()
    speed_factor: float = 1.0
    baseline: Solution | None = None
    notes: tuple[str, ...] = ()

    @classmethod
    def of(cls, instance: Instance) -> "DisturbedInstance":
        return cls(instance, effective_budget=instance.budget)

    @property
    def grid(self) -> GridSpec:
        return self.base.grid

    @property
    def pool(self) -> dict[int, Worker]:
        """Feasible worker pool with added workers and the speed factor applied."""
        out = {}
        for w in (*self.base.workers, *self.added):
            if w.id in self.removed:
                continue
            if self.speed_factor != 1.0:
                w = replace(w, speed=w.speed * self.speed_factor)
            out[w.id] = w
        return out

    def required_for(self, wid: int) -> tuple[tuple[int, int], ...]:
        return tuple((x, y) for w, x, y in self.required_visits if w == wid)

    def with_baseline(self, solution: Solution) -> "DisturbedInstance":
        return replace(self, baseline=solution)

    def constraints(self) -> tuple:
        """Everything but the application order; equal for commuting instructions."""
        return (self.effective_budget, self.blocked, (tuple(sorted(self.priority[0])), self.priority[1]),
                tuple(sorted(self.required_visits)),
                tuple(sorted(self.added, key=lambda w: w.id)), self.removed, self.speed_factor,
                tuple(sorted((i.type, repr(i.value)) for i in self.active)))


def apply_disturbance(target: Instance | DisturbedInstance, instr: DisturbanceInstruction) -> DisturbedInstance:
    d = DisturbedInstance.of(target) if isinstance(target, Instance) else target
    inst = d.base
    check_cells(instr, inst.grid)
    t, v = instr.type, instr.value
    active = d.active + (instr,)
    if t == "budget_change":
        return replace(d, active=active, effective_budget=max(0.0, d.effective_budget + v))
    if t == "area_blocked":
        cells = expand_blocked(v, inst.grid)
        notes = list(d.notes)
        for w in d.pool.values():
            hit = [c for c in (w.origin, w.destination) if any((c[0], c[1], s) in cells for s in w.window)]
            if hit:
                notes.append(f"blocking {hit[0]} affects worker {w.id}'s endpoint")
        return replace(d, active=active, blocked=d.blocked | cells, notes=tuple(notes))
    if t == "priority_area":
        cells = tuple(dict.fromkeys(d.priority[0] + v[0]))
        return replace(d, active=active, priority=(cells, max(d.priority[1], v[1])))
    if t == "mid_path_visit":
        pool = d.pool
        for wid, _, _ in v:
            if wid not in pool:
                raise DisturbanceError(f"mid-path visit for unknown worker {wid}")
        return replace(d, active=active, required_visits=tuple(dict.fromkeys(d.required_visits + v)))
    if t == "worker_unavailable":
        known = {w.id for w in (*inst.workers, *d.added)}
        for wid in v:
            if wid not in known:
                raise DisturbanceError(f"cannot remove unknown worker {wid}")
        return replace(d, active=active, removed=d.removed | frozenset(v))
    if t == "new_worker_available":
        known = {w.id for w in (*inst.workers, *d.added)}
        for w in v:
            if w.id in known:
                raise DisturbanceError(f"worker id {w.id} already exists")
        return replace(d, active=active, added=d.added + tuple(v))
    if t == "bad_weather":
        return replace(d, active=active, speed_factor=d.speed_factor * v)
    return replace(d, active=active)


# ---------------------------------------------------------------------------
# compliance

@dataclass(frozen=True)
class HandlingEntry:
    type: str
    satisfied: bool
    detail: str


@dataclass(frozen=True)
class HandlingReport:
    entries: tuple[HandlingEntry, ...] = ()

    @property
    def all_satisfied(self) -> bool:
        return all(e.satisfied for e in self.entries)

    @property
    def unsatisfied(self) -> list[HandlingEntry]:
        return [e for e in self.entries if not e.satisfied]

    def to_json_obj(self) -> dict:
        return {"all_satisfied": self.all_satisfied,
                "entries": [{"type": e.type, "satisfied": e.satisfied, "detail": e.detail} for e in self.entries]}


def priority_count(solution: Solution, cells) -> int:
    cs = set(cells)
    return sum(1 for x, y, _ in solution.steps() if (x, y) in cs)


def check_handling(solution: Solution, disturbed: DisturbedInstance) -> HandlingReport:
    """One entry per active instruction, each judged against the state at the time it was applied."""
    inst = disturbed.base
    grid = inst.grid
    entries = []
    budget = inst.budget
    factor = 1.0
    pool_all = {w.id: w for w in (*inst.workers, *disturbed.added)}
    for instr in disturbed.active:
        t, v = instr.type, instr.value
        if t == "budget_change":
            budget = max(0.0, budget + v)
            cost = solution_cost(solution, pool_all)
            entries.append(HandlingEntry(t, cost <= budget + 1e-9, f"cost {cost:g} vs budget {budget:g}"))
        elif t == "area_blocked":
            cells = expand_blocked(v, grid)
            bad = [(wid, s) for wid, p in solution.assignments.items() for s in p if s in cells]
            entries.append(HandlingEntry(t, not bad, "no step in blocked cells" if not bad else
                                         "blocked steps: " + ", ".join(f"worker {w} at {s}" for w, s in bad[:5])))
        elif t == "mid_path_visit":
            missing = [(w, x, y) for w, x, y in v
                       if not any((s[0], s[1]) == (x, y) for s in solution.assignments.get(w, ()))]
            entries.append(HandlingEntry(t, not missing, "all required visits present" if not missing else
                                         "missing: " + ", ".join(f"worker {w} -> ({x}, {y})" for w, x, y in missing)))
        elif t == "worker_unavailable":
            present = [w for w in v if w in solution.assignments]
            entries.append(HandlingEntry(t, not present, "removed workers absent" if not present else
                                         f"still assigned: {present}"))
        elif t == "bad_weather":
            factor *= v
            slow = []
            for wid, p in solution.assignments.items():
                w = pool_all.get(wid)
                if w is None:
                    continue
                w = replace(w, speed=w.speed * factor)
                res = validate_path(p, w, grid)
                if "speed-violation" in res.kinds():
                    slow.append(wid)
            entries.append(HandlingEntry(t, not slow, f"paths respect one move per {move_period(factor)} slots"
                                         if not slow else f"too fast under bad weather: {slow}"))
        elif t == "priority_area":
            got = priority_count(solution, v[0])
            ref = priority_count(disturbed.baseline, v[0]) if disturbed.baseline is not None else 0
            entries.append(HandlingEntry(t, got >= ref, f"priority coverage {got} vs baseline {ref}"))
        elif t == "new_worker_available":
            used = [w.id for w in v if w.id in solution.assignments]
            entries.append(HandlingEntry(t, True, f"new workers recruited: {used}"))
        else:
            entries.append(HandlingEntry(t, True, "no constraint change"))
    return HandlingReport(tuple(entries))


def coverage_in(solution: Solution, grid: GridSpec, cells) -> int:
    cov = collect_coverage(solution, grid)
    cs = set(cells)
    return sum(n for (x, y, _), n in cov.counts.items() if (x, y) in cs)


def validate_disturbed(solution: Solution, disturbed: DisturbedInstance):
    """``validate_solution`` against the disturbed pool, blocked cells and budget."""
    from .grid import validate_solution
    return validate_solution(solution, disturbed.base, disturbed.blocked, disturbed.effective_budget, disturbed.pool)
