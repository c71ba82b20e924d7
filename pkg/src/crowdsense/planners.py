"""Baseline planners producing an initial feasible schedule.

RN, TVPG and TCPG grow worker routes by inserting task cells into waypoint
sequences; MSA and MSAGI run multi-start simulated annealing over the same
waypoint representation; GraphDP builds per-worker paths with the
time-expanded DP and then improves the worker set by replacement.
"""
from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field
from typing import Iterator

from .coverage import EMPTY_OBJECTIVE, CoverageState, ObjectiveValue, solution_objective
from .grid import (Cell, Instance, Path, Solution, Worker, manhattan, needed_transitions, realize_path,
                   solution_cost, validate_solution)
from .search import SearchContext, propose_moves

ALGORITHMS = ("RN", "TVPG", "TCPG", "MSA", "MSAGI", "GraphDP")
EPS = 1e-12


@dataclass(frozen=True)
class SAConfig:
    restarts: int = 5
    iters_per_restart: int = 500
    t0: float = 1.0
    decay: float = 0.95
    batch: int = 50

    def __post_init__(self):
        if not 0 < self.decay < 1:
            raise ValueError("decay must lie in (0, 1)")
        if self.restarts < 1 or self.iters_per_restart < 1 or self.batch < 1:
            raise ValueError("SA counts must be >= 1")


@dataclass(frozen=True)
class GraphDPConfig:
    replacement_rounds_max: int = 30
    min_gain: float = 1e-9

    def __post_init__(self):
        if self.replacement_rounds_max < 1:
            raise ValueError("replacement_rounds_max must be >= 1")


@dataclass(frozen=True)
class PlannerConfig:
    algorithm: str = "TVPG"
    seed: int = 0
    sa: SAConfig = field(default_factory=SAConfig)
    graphdp: GraphDPConfig = field(default_factory=GraphDPConfig)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")


@dataclass(frozen=True)
class PlanResult:
    solution: Solution
    objective: ObjectiveValue
    cost: float
    planner_log: tuple[str, ...] = ()
    algorithm: str = ""
    seed: int = 0

    def to_json_obj(self) -> dict:
        return {"algorithm": self.algorithm, "seed": self.seed, "solution": self.solution.to_json_obj(),
                "objective": self.objective.to_dict(), "cost": self.cost, "log": list(self.planner_log)}

    @classmethod
    def from_json_obj(cls, d: dict, instance: Instance) -> "PlanResult":
        sol = Solution.from_json_obj(d["solution"])
        return make_result(sol, instance, d.get("log", ()), d.get("algorithm", ""), d.get("seed", 0))


def make_result(sol: Solution, instance: Instance, log=(), algorithm: str = "", seed: int = 0) -> PlanResult:
    obj = solution_objective(sol, instance.grid, instance.objective_config())
    return PlanResult(sol, obj, solution_cost(sol, instance.by_id), tuple(log), algorithm, seed)


def derived_rng(seed: int, tag: str) -> random.Random:
    h = hashlib.sha256(f"{seed}/{tag}".encode()).digest()
    return random.Random(int.from_bytes(h[:8], "big"))


# ---------------------------------------------------------------------------
# route representation shared by the insertion planners and SA

@dataclass
class Route:
    waypoints: list[Cell]
    until: int


class RouteSet:
    """Recruited workers' routes with their realized paths and a live coverage state."""

    def __init__(self, instance: Instance):
        self.inst = instance
        self.routes: dict[int, Route] = {}
        self.paths: dict[int, Path] = {}
        self.cost = 0.0
        self.state = CoverageState(instance.grid, instance.objective_config())

    def value(self) -> float:
        v = self.state.value()
        return 0.0 if v == EMPTY_OBJECTIVE else v

    def set(self, wid: int, route: Route | None, path: Path | None) -> None:
        w = self.inst.worker(wid)
        old = self.paths.pop(wid, None)
        if old is not None:
            self.state.remove_path(old)
            self.cost -= len(old) * w.reward_per_step
            del self.routes[wid]
        if route is not None:
            self.routes[wid] = route
            self.paths[wid] = path
            self.state.add_path(path)
            self.cost += len(path) * w.reward_per_step

    def trial(self, wid: int, path: Path | None) -> float:
        """Objective (empty counted as 0) if ``wid`` took ``path``; state left unchanged."""
        old = self.paths.get(wid)
        if old is not None:
            self.state.remove_path(old)
        if path is not None:
            self.state.add_path(path)
        v = self.value()
        if path is not None:
            self.state.remove_path(path)
        if old is not None:
            self.state.add_path(old)
        return v

    def solution(self) -> Solution:
        return Solution(dict(self.paths))

    def snapshot(self):
        return {k: Route(list(r.waypoints), r.until) for k, r in self.routes.items()}

    def restore(self, routes: dict[int, Route]) -> None:
        for wid in list(self.routes):
            self.set(wid, None, None)
        for wid, r in sorted(routes.items()):
            w = self.inst.worker(wid)
            self.set(wid, Route(list(r.waypoints), r.until), realize_path(w, r.waypoints, self.inst.grid, r.until))


@dataclass(frozen=True)
class Candidate:
    kind: str
    wid: int
    route: Route
    path: Path
    dcost: float
    detail: str


def _fit(w: Worker, wps: list[Cell], until: int) -> int | None:
    need = w.t_start + needed_transitions(w, wps)
    u = max(until, need)
    return u if u <= w.t_end else None


def insertion_candidates(rs: RouteSet, remaining: float) -> Iterator[Candidate]:
    inst = rs.inst
    grid = inst.grid
    cells = [(x, y) for x in range(grid.width) for y in range(grid.height)]
    for w in inst.workers:
        r = w.reward_per_step
        route = rs.routes.get(w.id)
        if route is None:
            u = _fit(w, [], w.t_start)
            if u is None:
                continue
            dc = (u - w.t_start + 1) * r
            if dc <= remaining + 1e-9:
                rt = Route([], u)
                yield Candidate("recruit", w.id, rt, realize_path(w, [], grid, u), dc, f"recruit worker {w.id}")
            continue
        if route.until < w.t_end and r <= remaining + 1e-9:
            rt = Route(list(route.waypoints), route.until + 1)
            yield Candidate("extend", w.id, rt, realize_path(w, rt.waypoints, grid, rt.until), r,
                            f"extend worker {w.id} to t={rt.until}")
        pts = [w.origin, *route.waypoints, w.destination]
        spare = w.t_end - w.t_start - needed_transitions(w, route.waypoints)
        for i in range(len(pts) - 1):
            a, b = pts[i], pts[i + 1]
            ab = manhattan(a, b)
            for c in cells:
                if manhattan(a, c) + manhattan(c, b) - ab > spare:
                    continue
                wps = route.waypoints[:i] + [c] + route.waypoints[i:]
                u = _fit(w, wps, route.until)
                if u is None:
                    continue
                dc = (u - route.until) * r
                if dc > remaining + 1e-9:
                    continue
                path = realize_path(w, wps, grid, u)
                if path == rs.paths[w.id]:
                    continue
                yield Candidate("insert", w.id, Route(wps, u), path, dc, f"insert task {c} into worker {w.id} at {i}")


def _greedy(instance: Instance, rule: str, rng: random.Random | None, log: list[str]) -> RouteSet:
    rs = RouteSet(instance)
    while True:
        remaining = instance.budget - rs.cost
        base = rs.value()
        best = None
        best_key = None
        pool = []
        for cand in insertion_candidates(rs, remaining):
            if rule == "random":
                if cand.dcost > 0:
                    pool.append(cand)
                continue
            gain = rs.trial(cand.wid, cand.path) - base
            if gain <= EPS:
                continue
            if rule == "value":  # highest gain, then cheaper
                key = (gain, -cand.dcost)
            else:  # cheapest, then higher gain
                key = (-cand.dcost, gain)
            if best_key is None or key > best_key:
                best, best_key = cand, key
        if rule == "random":
            if not pool:
                break
            best = pool[rng.randrange(len(pool))]
        if best is None:
            break
        rs.set(best.wid, best.route, best.path)
        log.append(f"{best.detail}: cost +{best.dcost:g}, J={rs.value():.6f}")
    return rs


# ---------------------------------------------------------------------------
# simulated annealing over waypoint sequences

def _sa_propose(rs: RouteSet, rng: random.Random):
    """Return (wid, new_route or None, description) or None when the draw is void."""
    inst = rs.inst
    grid = inst.grid
    op = rng.choice(("swap", "insert", "remove", "reverse", "retime"))
    w = inst.workers[rng.randrange(len(inst.workers))]
    route = rs.routes.get(w.id)
    if route is None:
        if op != "insert":
            return None
        u = _fit(w, [], w.t_start)
        return (w.id, Route([], u), f"recruit worker {w.id}") if u is not None else None
    wps = list(route.waypoints)
    if op == "swap":
        if len(wps) < 2:
            return None
        i, j = rng.sample(range(len(wps)), 2)
        wps[i], wps[j] = wps[j], wps[i]
        desc = f"swap waypoints {i},{j} of worker {w.id}"
    elif op == "insert":
        c = (rng.randrange(grid.width), rng.randrange(grid.height))
        i = rng.randrange(len(wps) + 1)
        wps.insert(i, c)
        desc = f"insert {c} into worker {w.id} at {i}"
    elif op == "remove":
        if not wps:
            return w.id, None, f"dismiss worker {w.id}"
        i = rng.randrange(len(wps))
        c = wps.pop(i)
        desc = f"remove waypoint {c} from worker {w.id}"
    elif op == "reverse":
        if len(wps) < 2:
            return None
        i, j = sorted(rng.sample(range(len(wps) + 1), 2))
        if j - i < 2:
            return None
        wps[i:j] = wps[i:j][::-1]
        desc = f"reverse waypoints {i}:{j} of worker {w.id}"
    else:
        delta = rng.choice((-1, 1))
        u = route.until + delta
        lo = w.t_start + needed_transitions(w, wps)
        if u < lo or u > w.t_end:
            return None
        return w.id, Route(wps, u), f"retime worker {w.id} to t={u}"
    u = _fit(w, wps, route.until)
    if u is None:
        return None
    return w.id, Route(wps, u), desc


def _anneal(instance: Instance, start: dict[int, Route], cfg: SAConfig, rng: random.Random,
            log: list[str], tag: str) -> tuple[dict[int, Route], float]:
    rs = RouteSet(instance)
    rs.restore(start)
    cur = rs.value()
    best, best_v = rs.snapshot(), cur
    for it in range(cfg.iters_per_restart):
        temp = cfg.t0 * cfg.decay ** (it // cfg.batch)
        prop = _sa_propose(rs, rng)
        if prop is None:
            continue
        wid, route, desc = prop
        w = instance.worker(wid)
        path = realize_path(w, route.waypoints, instance.grid, route.until) if route else None
        old = rs.paths.get(wid)
        dcost = (len(path) if path else 0) * w.reward_per_step - (len(old) if old else 0) * w.reward_per_step
        if rs.cost + dcost > instance.budget + 1e-9:
            continue
        new_v = rs.trial(wid, path)
        dj = new_v - cur
        if dj >= 0 or rng.random() < math.exp(dj / temp):
            rs.set(wid, route, path)
            cur = new_v
            log.append(f"{tag} it {it}: {desc} (dJ={dj:+.6f}, J={cur:.6f})")
            if cur > best_v + EPS:
                best, best_v = rs.snapshot(), cur
    return best, best_v


def _multi_start(instance: Instance, cfg: PlannerConfig, greedy_init: bool, log: list[str]) -> RouteSet:
    best, best_v = None, -math.inf
    init = None
    if greedy_init:
        init = _greedy(instance, "value", None, log).snapshot()
        log.append(f"greedy initialisation with {len(init)} workers")
    for r in range(cfg.sa.restarts):
        rng = derived_rng(cfg.seed, f"sa/{r}")
        if greedy_init:
            start = init
        else:
            start = _greedy(instance, "random", derived_rng(cfg.seed, f"rn/{r}"), []).snapshot()
        routes, v = _anneal(instance, start, cfg.sa, rng, log, f"restart {r}")
        log.append(f"restart {r} best J={v:.6f}")
        if v > best_v + EPS:
            best, best_v = routes, v
    rs = RouteSet(instance)
    rs.restore(best)
    return rs


# ---------------------------------------------------------------------------
# GraphDP

def graphdp_best_path(worker: Worker, base: CoverageState, instance: Instance, max_cost: float | None = None,
                      blocked=frozenset()) -> tuple[Path, float]:
    """Best DP path for one worker against frozen ``base`` coverage, with its true gain.

    Among arrival slots the path with the largest objective gain is kept.
    Raises :class:`~crowdsense.grid.InfeasiblePath` if the destination cannot be reached.
    """
    from .grid import InfeasiblePath
    pool = dict(instance.by_id)
    pool[worker.id] = worker
    ctx = SearchContext(instance.grid, base.config, pool, instance.budget, blocked)
    limit = instance.budget if max_cost is None else max_cost
    got = ctx.best_path(worker.id, base, ctx.rewards(base), limit)
    if got is None:
        raise InfeasiblePath(f"worker {worker.id}: destination unreachable within window/budget")
    before = base.value()
    gain = math.inf if before == EMPTY_OBJECTIVE else got[1] - before
    return got[0], gain


def _graphdp_greedy(instance: Instance, log: list[str]) -> Solution:
    cfg = instance.objective_config()
    ctx = SearchContext(instance.grid, cfg, instance.by_id, instance.budget)
    state = CoverageState(instance.grid, cfg)
    sol = Solution()
    remaining = instance.budget
    while True:
        base_v = state.value()
        base_f = 0.0 if base_v == EMPTY_OBJECTIVE else base_v
        rewards = ctx.rewards(state)
        best = None
        for w in instance.workers:
            if w.id in sol or w.min_cost() > remaining + 1e-9:
                continue
            got = ctx.best_path(w.id, state, rewards, remaining)
            if got is None:
                continue
            gain = got[1] - base_f
            if best is None or gain > best[2] + EPS:
                best = (w.id, got[0], gain)
        if best is None or best[2] <= EPS:
            break
        wid, path, gain = best
        sol = sol.with_path(wid, path)
        state.add_path(path)
        remaining -= len(path) * instance.worker(wid).reward_per_step
        log.append(f"select worker {wid} with {len(path)}-step DP path: gain {gain:+.6f}, J={state.value():.6f}")
    return sol


def worker_replacement(solution: Solution, instance: Instance, rounds_max: int = 30, min_gain: float = 1e-9,
                       log: list[str] | None = None) -> Solution:
    """Hill-climb by swapping/re-pathing/adding one worker at a time."""
    log = [] if log is None else log
    cfg = instance.objective_config()
    ctx = SearchContext(instance.grid, cfg, instance.by_id, instance.budget)
    cur = ctx.score(solution) if len(solution) else 0.0
    for rnd in range(rounds_max):
        moves = propose_moves(solution, ctx, kinds=("swap_workers", "reroute_segment", "add_worker"))
        if moves and moves[0].score - cur >= min_gain:
            m = moves[0]
            solution = m.solution
            log.append(f"round {rnd}: {m.kind} out={m.out} in={m.into}: J {cur:.6f} -> {m.score:.6f}")
            cur = m.score
            continue
        got = _shorten_then_add(solution, ctx, cur + min_gain)
        if got is None:
            break
        wid, solution, score = got
        log.append(f"round {rnd}: shorten {wid} and add: J {cur:.6f} -> {score:.6f}")
        cur = score
    return solution


def _shorten_then_add(solution: Solution, ctx: SearchContext, beat: float, max_cut: int = 2):
    """Free budget by cutting one worker's path by 1..max_cut steps, then add the best newcomer."""
    full = ctx.state(solution)
    best = None
    for wid, p in solution.assignments.items():
        w = ctx.workers[wid]
        base = full.copy()
        base.remove_path(p)
        r = ctx.rewards(base)
        for k in range(1, max_cut + 1):
            cap = ctx.cost(wid, p) - k * w.reward_per_step
            if cap < w.min_cost() - 1e-9:
                break
            got = ctx.best_path(wid, base, r, cap)
            if got is None:
                continue
            trial = solution.with_path(wid, got[0])
            moves = propose_moves(trial, ctx, kinds=("add_worker",))
            if moves and moves[0].score > beat and (best is None or moves[0].score > best[2] + EPS):
                best = (wid, moves[0].solution, moves[0].score)
    return best


def plan(instance: Instance, config: PlannerConfig | None = None) -> PlanResult:
    config = config or PlannerConfig()
    log: list[str] = [f"{config.algorithm} seed={config.seed} budget={instance.budget:g}"]
    algo = config.algorithm
    if all(w.min_cost() > instance.budget + 1e-9 for w in instance.workers):
        log.append("budget below the cheapest worker; returning empty solution")
        sol = Solution()
    elif algo == "RN":
        sol = _greedy(instance, "random", derived_rng(config.seed, "rn/0"), log).solution()
    elif algo == "TVPG":
        sol = _greedy(instance, "value", None, log).solution()
    elif algo == "TCPG":
        sol = _greedy(instance, "cost", None, log).solution()
    elif algo == "MSA":
        sol = _multi_start(instance, config, False, log).solution()
    elif algo == "MSAGI":
        sol = _multi_start(instance, config, True, log).solution()
    else:
        sol = _graphdp_greedy(instance, log)
        sol = worker_replacement(sol, instance, config.graphdp.replacement_rounds_max, config.graphdp.min_gain, log)
    res = make_result(sol, instance, log, algo, config.seed)
    assert validate_solution(sol, instance).feasible, "planner emitted an infeasible solution"
    return res
