"""Spatio-temporal grid, workers, paths, cost model and feasibility checks.

A path is a tuple of ``(x, y, t)`` integer triples.  A worker occupies one
cell per time slot and may move to a 4-neighbour or stay between slots.
Reduced speed ``s < 1`` means the worker may change cell at most once every
``ceil(1/s)`` slots.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

Cell = tuple[int, int]
Step = tuple[int, int, int]
Path = tuple[Step, ...]

GLOBAL = "GLOBAL"


class DomainError(ValueError):
    pass


class InfeasiblePath(DomainError):
    """Raised by :func:`realize_path` when a waypoint sequence cannot fit the window."""

    def __init__(self, message: str, leg: int | None = None):
        super().__init__(message)
        self.leg = leg


@dataclass(frozen=True)
class GridSpec:
    width: int
    height: int
    num_slots: int
    slot_minutes: int = 15

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.num_slots < 1:
            raise DomainError(f"degenerate grid {self.width}x{self.height}x{self.num_slots}")

    @property
    def total_cells(self) -> int:
        return self.width * self.height * self.num_slots

    def contains(self, x: int, y: int, t: int | None = None) -> bool:
        if not (0 <= x < self.width and 0 <= y < self.height):
            return False
        return t is None or 0 <= t < self.num_slots

    def to_dict(self) -> dict:
        return {"width": self.width, "height": self.height,
                "num_slots": self.num_slots, "slot_minutes": self.slot_minutes}

    @classmethod
    def from_dict(cls, d: Mapping) -> "GridSpec":
        return cls(int(d["width"]), int(d["height"]), int(d["num_slots"]), int(d.get("slot_minutes", 15)))


def move_period(speed: float) -> int:
    """Minimum number of slots between two consecutive cell changes."""
    if speed >= 1.0:
        return 1
    return max(1, math.ceil(1.0 / speed - 1e-9))


def max_moves(transitions: int, speed: float) -> int:
    """Largest number of cell changes that fit in ``transitions`` slot steps."""
    if transitions <= 0:
        return 0
    return 1 + (transitions - 1) // move_period(speed)


def min_transitions(moves: int, speed: float) -> int:
    if moves <= 0:
        return 0
    return 1 + (moves - 1) * move_period(speed)


def manhattan(a: Sequence[int], b: Sequence[int]) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


@dataclass(frozen=True)
class Worker:
    id: int
    origin: Cell
    destination: Cell
    window: tuple[int, int]
    speed: float = 1.0
    reward_per_step: float = 1.0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))
        object.__setattr__(self, "destination", (int(self.destination[0]), int(self.destination[1])))
        object.__setattr__(self, "window", (int(self.window[0]), int(self.window[1])))
        t0, t1 = self.window
        if not 0 <= t0 < t1:
            raise DomainError(f"worker {self.id}: bad window {self.window}")
        if not self.speed > 0:
            raise DomainError(f"worker {self.id}: speed must be positive")
        if self.reward_per_step < 0:
            raise DomainError(f"worker {self.id}: negative reward")

    @property
    def t_start(self) -> int:
        return self.window[0]

    @property
    def t_end(self) -> int:
        return self.window[1]

    def reachable(self) -> bool:
        return manhattan(self.origin, self.destination) <= max_moves(self.t_end - self.t_start, self.speed)

    def min_cost(self) -> float:
        return (min_transitions(manhattan(self.origin, self.destination), self.speed) + 1) * self.reward_per_step

    def to_dict(self) -> dict:
        d = {"id": self.id, "origin": list(self.origin), "destination": list(self.destination),
             "window": list(self.window), "speed": self.speed, "reward_per_step": self.reward_per_step}
        if self.label:
            d["label"] = self.label
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Worker":
        return cls(int(d["id"]), tuple(d["origin"]), tuple(d["destination"]), tuple(d["window"]),
                   float(d.get("speed", 1.0)), float(d.get("reward_per_step", 1.0)), str(d.get("label", "")))


@dataclass(frozen=True)
class Instance:
    grid: GridSpec
    workers: tuple[Worker, ...]
    budget: float
    alpha: float = 0.5
    levels: int | None = None
    include_time_hierarchy: bool | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "workers", tuple(self.workers))
        if self.budget < 0:
            raise DomainError("negative budget")
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError("alpha must lie in [0, 1]")
        ids = [w.id for w in self.workers]
        if len(set(ids)) != len(ids):
            raise DomainError("duplicate worker ids")
        for w in self.workers:
            check_worker(w, self.grid)

    def worker(self, wid: int) -> Worker:
        return self.by_id[wid]

    @property
    def by_id(self) -> dict[int, Worker]:
        # cached lazily; frozen dataclass so go through object.__setattr__
        try:
            return self.__dict__["_by_id"]
        except KeyError:
            m = {w.id: w for w in self.workers}
            object.__setattr__(self, "_by_id", m)
            return m

    def objective_config(self):
        from .coverage import ObjectiveConfig
        return ObjectiveConfig.for_grid(self.grid, self.alpha, self.levels, self.include_time_hierarchy)

    def to_dict(self) -> dict:
        d = {"name": self.name, "grid": self.grid.to_dict(), "budget": self.budget, "alpha": self.alpha,
             "workers": [w.to_dict() for w in self.workers]}
        if self.levels is not None:
            d["levels"] = self.levels
        if self.include_time_hierarchy is not None:
            d["include_time_hierarchy"] = self.include_time_hierarchy
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Instance":
        return cls(GridSpec.from_dict(d["grid"]), tuple(Worker.from_dict(w) for w in d["workers"]),
                   float(d["budget"]), float(d.get("alpha", 0.5)), d.get("levels"),
                   d.get("include_time_hierarchy"), str(d.get("name", "")))


def check_worker(w: Worker, grid: GridSpec) -> None:
    for c in (w.origin, w.destination):
        if not grid.contains(*c):
            raise DomainError(f"worker {w.id}: cell {c} outside grid")
    if w.t_end > grid.num_slots - 1:
        raise DomainError(f"worker {w.id}: window {w.window} exceeds {grid.num_slots} slots")
    if not w.reachable():
        raise DomainError(f"worker {w.id}: destination unreachable within window")


@dataclass(frozen=True)
class Solution:
    """Mapping worker id -> path.  Treat as immutable; use the ``with_*`` helpers."""
    assignments: Mapping[int, Path] = field(default_factory=dict)

    def __post_init__(self):
        items = sorted((int(k), tuple(tuple(int(v) for v in s) for s in p)) for k, p in self.assignments.items())
        object.__setattr__(self, "assignments", dict(items))

    def __len__(self):
        return len(self.assignments)

    def __contains__(self, wid):
        return wid in self.assignments

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash(tuple(self.assignments.items()))
            object.__setattr__(self, "_hash", h)
        return h

    @classmethod
    def _trusted(cls, items: dict) -> "Solution":
        # skips normalisation; ``items`` must already hold int keys and int-tuple paths
        sol = object.__new__(cls)
        object.__setattr__(sol, "assignments", dict(sorted(items.items())))
        return sol

    def workers(self) -> list[int]:
        return list(self.assignments)

    def with_path(self, wid: int, path: Path) -> "Solution":
        d = dict(self.assignments)
        d[int(wid)] = tuple(tuple(int(v) for v in s) for s in path)
        return Solution._trusted(d)

    def without(self, *wids: int) -> "Solution":
        return Solution._trusted({k: v for k, v in self.assignments.items() if k not in wids})

    def steps(self) -> Iterable[Step]:
        for p in self.assignments.values():
            yield from p

    def to_json_obj(self) -> dict:
        return {str(k): [list(s) for s in p] for k, p in self.assignments.items()}

    @classmethod
    def from_json_obj(cls, d: Mapping) -> "Solution":
        return cls({int(k): tuple(tuple(s) for s in v) for k, v in d.items()})


@dataclass(frozen=True)
class Violation:
    worker: int | str
    kind: str
    detail: str


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...] = ()

    @property
    def feasible(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def __add__(self, other: "ValidationResult") -> "ValidationResult":
        return ValidationResult(self.violations + other.violations)


def path_cost(path: Path, worker: Worker) -> float:
    if not path:
        raise DomainError("empty path has no cost")
    return len(path) * worker.reward_per_step


def solution_cost(solution: Solution, workers: Mapping[int, Worker]) -> float:
    total = 0.0
    for wid, p in solution.assignments.items():
        w = workers.get(wid)
        total += len(p) * (w.reward_per_step if w is not None else 1.0)
    return total


def expand_blocked(cells, grid: GridSpec) -> frozenset[Step]:
    """Expand ``(x, y)`` or ``(x, y, t0, t1)`` entries into concrete cell-time triples."""
    out = set()
    for c in cells:
        if len(c) == 2:
            t0, t1 = 0, grid.num_slots - 1
        else:
            t0, t1 = c[2], c[3]
        for t in range(max(0, t0), min(grid.num_slots - 1, t1) + 1):
            out.add((int(c[0]), int(c[1]), t))
    return frozenset(out)


def validate_path(path: Path, worker: Worker, grid: GridSpec, blocked=frozenset()) -> ValidationResult:
    """Check one path against its worker and the grid; report every violation."""
    v: list[Violation] = []
    wid = worker.id
    if not path:
        return ValidationResult((Violation(wid, "empty-path", "path has no steps"),))
    for i, (x, y, t) in enumerate(path):
        if not grid.contains(x, y, t):
            v.append(Violation(wid, "out-of-bounds", f"step {i} {(x, y, t)} outside grid"))
        if not worker.t_start <= t <= worker.t_end:
            v.append(Violation(wid, "window-violation", f"step {i} at t={t} outside window {worker.window}"))
        if (x, y, t) in blocked:
            v.append(Violation(wid, "blocked-cell", f"step {i} enters blocked cell {(x, y, t)}"))
    x0, y0, t0 = path[0]
    if (x0, y0) != worker.origin or t0 != worker.t_start:
        v.append(Violation(wid, "start-mismatch",
                           f"starts at {(x0, y0, t0)}, expected {worker.origin + (worker.t_start,)}"))
    xn, yn, _ = path[-1]
    if (xn, yn) != worker.destination:
        v.append(Violation(wid, "end-mismatch", f"ends at {(xn, yn)}, expected {worker.destination}"))
    period = move_period(worker.speed)
    last_move = None
    for i in range(1, len(path)):
        (xa, ya, ta), (xb, yb, tb) = path[i - 1], path[i]
        if tb != ta + 1:
            v.append(Violation(wid, "time-discontinuity", f"step {i}: t {ta} -> {tb}"))
        d = abs(xa - xb) + abs(ya - yb)
        if d > 1:
            v.append(Violation(wid, "move-illegal", f"step {i}: {(xa, ya)} -> {(xb, yb)} is not a 4-neighbour move"))
        if d >= 1:
            if last_move is not None and tb - last_move < period:
                v.append(Violation(wid, "speed-violation",
                                   f"step {i}: moved after {tb - last_move} slot(s), speed allows one move per {period}"))
            last_move = tb
    return ValidationResult(tuple(v))


def validate_solution(solution: Solution, instance: Instance, blocked=frozenset(),
                      budget: float | None = None, workers: Mapping[int, Worker] | None = None) -> ValidationResult:
    """Per-path checks plus the global budget check.

    ``budget`` and ``workers`` override the instance values (used for disturbed instances).
    """
    pool = instance.by_id if workers is None else workers
    limit = instance.budget if budget is None else budget
    res = ValidationResult()
    total = 0.0
    for wid, p in solution.assignments.items():
        w = pool.get(wid)
        if w is None:
            res += ValidationResult((Violation(wid, "unknown-worker", f"worker {wid} not in pool"),))
            total += len(p)
            continue
        res += validate_path(p, w, instance.grid, blocked)
        if p:
            total += path_cost(p, w)
    if total > limit + 1e-9:
        res += ValidationResult((Violation(GLOBAL, "budget-exceeded", f"cost {total:g} > budget {limit:g}"),))
    return res


def _legs(points: Sequence[Cell]) -> list[list[Cell]]:
    """Per-leg cell sequences using the x-before-y rule (excluding each leg's start)."""
    legs = []
    for a, b in zip(points, points[1:]):
        cells = []
        x, y = a
        sx = 1 if b[0] > x else -1
        while x != b[0]:
            x += sx
            cells.append((x, y))
        sy = 1 if b[1] > y else -1
        while y != b[1]:
            y += sy
            cells.append((x, y))
        legs.append(cells)
    return legs


def realize_path(worker: Worker, waypoints: Sequence[Cell], grid: GridSpec, until: int | None = None) -> Path:
    """Expand origin -> waypoints -> destination into a time-indexed path ending at ``until``.

    Moves go along x first, then y.  Under reduced speed each move after the
    first is preceded by the mandatory waiting slots.  Remaining slack is spent
    staying at the last waypoint before the destination leg.
    """
    end = worker.t_end if until is None else until
    if end > worker.t_end or end < worker.t_start:
        raise InfeasiblePath(f"arrival slot {end} outside window {worker.window}")
    for c in waypoints:
        if not grid.contains(*c):
            raise InfeasiblePath(f"waypoint {c} outside grid")
    points = [worker.origin, *[tuple(c) for c in waypoints], worker.destination]
    legs = _legs(points)
    period = move_period(worker.speed)
    avail = end - worker.t_start
    used = 0
    nmoves = 0
    for i, leg in enumerate(legs):
        for _ in leg:
            used += 1 if nmoves == 0 else period
            nmoves += 1
        if used > avail:
            raise InfeasiblePath(f"leg {i} {points[i]} -> {points[i + 1]} needs {used} slots, window allows {avail}",
                                 leg=i)
    slack = avail - used
    head = [c for leg in legs[:-1] for c in leg]
    tail = legs[-1]
    t = worker.t_start
    x, y = worker.origin
    out = [(x, y, t)]
    moved = False

    def stay(n):
        nonlocal t
        for _ in range(n):
            t += 1
            out.append((x, y, t))

    for group, extra in ((head, slack), (tail, 0)):
        for c in group:
            if moved:
                stay(period - 1)
            t += 1
            x, y = c
            out.append((x, y, t))
            moved = True
        stay(extra)
    return tuple(out)


def try_realize(worker: Worker, waypoints: Sequence[Cell], grid: GridSpec, until: int | None = None) -> Path | None:
    try:
        return realize_path(worker, waypoints, grid, until)
    except InfeasiblePath:
        return None


def needed_transitions(worker: Worker, waypoints: Sequence[Cell]) -> int:
    pts = [worker.origin, *waypoints, worker.destination]
    moves = sum(manhattan(a, b) for a, b in zip(pts, pts[1:]))
    return min_transitions(moves, worker.speed)
