"""Deterministic edit-and-verify solver policy."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from ..grid import GLOBAL, Solution
from ..search import propose_moves
from .edits import META_KIND, Edit
from .evaluator import EvalReport
from .judge import Judge

KIND_ORDER = {k: i for i, k in enumerate(("remove_waypoint", "insert_waypoint", "reroute_segment", "remove_worker",
                                          "swap_workers", "add_worker"))}


@dataclass
class SolverConfig:
    batch_max: int = 3
    swap_limit: int | None = 3
    region_weight: float = 0.05
    suggestions_used: int = 2
    shorten_max: int = 2  # reallocation tries cutting a path by up to this many steps
    reallocate: bool = True

    def __post_init__(self):
        if self.batch_max < 1:
            raise ValueError("batch_max must be at least 1")


@dataclass(frozen=True)
class StepResult:
    solution: Solution
    edits: tuple[Edit, ...]
    rejected: tuple[str, ...]
    explanation: str

    @property
    def noop(self) -> bool:
        return not self.edits


def _move_edit(m, reason: str) -> Edit:
    if m.kind == "add_worker":
        return Edit("add_worker", (m.into,), {"path": m.path}, reason)
    if m.kind == "remove_worker":
        return Edit("remove_worker", (m.out,), reason=reason)
    if m.kind == "swap_workers":
        return Edit("swap_workers", (m.out, m.into), {"path": m.path}, reason)
    return Edit("reroute_segment", (m.out,), {"path": m.path}, reason)


def _repair_edits(cur: Solution, judge: Judge) -> list[Edit]:
    ctx = judge.ctx
    d = judge.disturbed
    verdict = judge(cur)
    bad = sorted({v.worker for v in verdict.validation.violations if v.worker != GLOBAL})
    missing = []
    for w, x, y in d.required_visits:
        if not any((s[0], s[1]) == (x, y) for s in cur.assignments.get(w, ())):
            missing.append((w, (x, y)))
    edits: list[Edit] = []
    state = ctx.state(cur)
    total_bonus = sum(ctx.bonus_of(p) for p in cur.assignments.values())
    slack = ctx.budget - ctx.total_cost(cur)
    need = sorted(set(bad) | {w for w, _ in missing})
    for wid in need:
        p = cur.assignments.get(wid)
        if wid not in ctx.workers:
            if p is not None:
                edits.append(Edit("remove_worker", (wid,), reason=f"worker {wid} is unavailable"))
            continue
        base = state.copy()
        bonus = total_bonus
        room = slack
        if p is not None:
            base.remove_path(p)
            bonus -= ctx.bonus_of(p)
            room += ctx.cost(wid, p)
        kinds = sorted({v.kind for v in verdict.validation.violations if v.worker == wid})
        cells = [c for w, c in missing if w == wid]
        got = None
        for limit in (room, None):
            got = ctx.best_path(wid, base, ctx.rewards(base, ctx.extra()), limit, bonus, ctx.extra())
            if got:
                break
        if got is not None:
            if p is None:
                edits.append(Edit("add_worker", (wid,), {"path": got[0]}, f"required visit to {cells[0]}"))
            elif cells:
                edits.append(Edit("insert_waypoint", (wid,), {"path": got[0], "cell": cells[0]},
                                  f"required visit to {cells[0]}"))
            elif "blocked-cell" in kinds:
                hit = next((x, y) for x, y, t in p if (x, y, t) in d.blocked)
                edits.append(Edit("remove_waypoint", (wid,), {"path": got[0], "cell": hit}, "avoid blocked cells"))
            else:
                edits.append(Edit("reroute_segment", (wid,), {"path": got[0]}, "fix " + ", ".join(kinds)))
        if p is not None and not cells:
            edits.append(Edit("remove_worker", (wid,), reason="cannot be repaired cheaply: " + ", ".join(kinds)))
    if any(v.worker == GLOBAL for v in verdict.validation.violations) or \
            any(e.type == "priority_area" for e in verdict.handling.unsatisfied):
        region = d.priority[0]
        moves = propose_moves(cur, ctx, kinds=("reroute_segment", "remove_worker"), region=region,
                              region_weight=1.0 if region else 0.0)
        edits += [_move_edit(m, "restore budget or priority coverage") for m in moves]
    return edits


def _suggested_edits(cur: Solution, judge: Judge, feedback: EvalReport | None, cfg: SolverConfig) -> list[Edit]:
    if feedback is None:
        return []
    ctx = judge.ctx
    out = []
    used = 0
    for s in feedback.suggestions:
        if used >= cfg.suggestions_used:
            break
        if s.template != "reroute_through_region" or not s.region or s.workers[0] not in cur.assignments:
            continue
        used += 1
        moves = propose_moves(cur, ctx, kinds=("reroute_segment",), outs=[s.workers[0]], region=s.region,
                              region_weight=cfg.region_weight)
        out += [_move_edit(m, f"suggested: {s.rationale}") for m in moves]
    return out


def _feasible_order(cur: Solution, edits: list[Edit], judge: Judge, limit: tuple[int, int]) -> list[Edit] | None:
    """An order of ``edits`` whose intermediate states never rank worse than ``limit``."""
    for order in itertools.permutations(edits):
        sol, ok = cur, True
        for e in order:
            sol = e.apply(sol)
            if judge(sol).rank > limit:
                ok = False
                break
        if ok:
            return list(order)
    return None


def _reallocations(cur: Solution, judge: Judge, cfg: SolverConfig) -> list[tuple[list[Edit], Solution]]:
    """Multi-edit batches that free budget on one or two workers and spend it elsewhere.

    Tried only when no single edit improves; intermediate states must not add issues.
    """
    ctx = judge.ctx
    start = judge(cur)
    out = []
    extra = ctx.extra()
    for wid in sorted(cur.assignments):
        p = cur.assignments[wid]
        firsts = [Edit("remove_worker", (wid,), reason="free its budget for other workers")]
        if wid in ctx.workers:
            rest = cur.without(wid)
            base = ctx.state(rest)
            bonus = sum(ctx.bonus_of(q) for q in rest.assignments.values())
            r = ctx.rewards(base, extra)
            for k in range(1, cfg.shorten_max + 1):
                got = ctx.best_path(wid, base, r, ctx.cost(wid, p) - k * ctx.workers[wid].reward_per_step,
                                    bonus, extra)
                if got and len(got[0]) < len(p):
                    firsts.append(Edit("reroute_segment", (wid,), {"path": got[0]}, "shorten to free budget"))
        seen = set()
        for first in firsts:
            s1 = first.apply(cur)
            if s1 in seen or judge(s1).rank > start.rank:
                continue
            seen.add(s1)
            batch, sol = [first], s1
            busy = {wid}
            while len(batch) < cfg.batch_max:
                moves = [m for m in propose_moves(sol, ctx, outs=[w for w in sol.assignments if w not in busy],
                                                  kinds=("reroute_segment", "add_worker"))
                         if not busy & set(m.workers) and judge(m.solution).rank <= start.rank]
                if not moves:
                    break
                m = moves[0]
                batch.append(_move_edit(m, "spend the freed budget"))
                busy |= set(m.workers)
                sol = m.solution
                out.append((list(batch), sol))
    if cfg.batch_max < 2 or any(judge(sol).key < start.key for _, sol in out):
        return out
    # drop two workers, then recruit up to two replacements
    for x, y in itertools.combinations(sorted(cur.assignments), 2):
        sol = cur.without(x, y)
        if judge(sol).rank > start.rank:
            continue
        for _ in range(2):
            moves = [m for m in propose_moves(sol, ctx, kinds=("add_worker",))
                     if judge(m.solution).rank <= start.rank]
            if not moves:
                break
            sol = moves[0].solution
        removed = [w for w in (x, y) if w not in sol.assignments]
        added = [w for w in sol.assignments if w not in cur.assignments]
        if not added:
            continue
        edits = [Edit("swap_workers", (o, i), {"path": sol.assignments[i]}, "exchange for a better pair")
                 for o, i in zip(removed, added)]
        edits += [Edit("remove_worker", (o,), reason="free budget") for o in removed[len(added):]]
        edits += [Edit("add_worker", (i,), {"path": sol.assignments[i]}, "spend the freed budget")
                  for i in added[len(removed):]]
        if len(edits) > cfg.batch_max:
            continue
        order = _feasible_order(cur, edits, judge, start.rank)
        if order is not None:
            out.append((order, sol))
    return out


def solver_step(current: Solution, judge: Judge, feedback: EvalReport | None = None, retrieved=(),
                config: SolverConfig | None = None) -> StepResult:
    """Apply up to ``batch_max`` verified edits, each strictly improving (violations, -score)."""
    cfg = config or SolverConfig()
    ctx = judge.ctx
    start = judge(current)
    cands: list[Edit] = []
    if not start.ok:
        cands += _repair_edits(current, judge)
    cands += _suggested_edits(current, judge, feedback, cfg)
    pref = {}
    for i, op in enumerate(getattr(r, "op_type", r) for r in retrieved):
        pref.setdefault(op, i)

    def ranked(sol: Solution, edits: list[Edit], busy: set[int]):
        scored = []
        for i, e in enumerate(edits):
            if busy & set(e.workers):
                continue
            try:
                nxt = e.apply(sol)
            except ValueError:
                continue
            v = judge(nxt)
            scored.append((v.key, pref.get(META_KIND[e.kind], len(pref)), KIND_ORDER[e.kind], i, e, nxt))
        scored.sort(key=lambda r: r[:4])
        return scored

    rejected: list[str] = []
    committed: list[Edit] = []
    notes: list[str] = []
    cur = current
    busy: set[int] = set()
    generic_done = False
    while len(committed) < cfg.batch_max:
        key = judge(cur).key
        scored = ranked(cur, cands, busy)
        pick = next((r for r in scored if r[0] < key), None)
        if pick is None and not generic_done:
            generic_done = True
            moves = propose_moves(cur, ctx, swap_limit=cfg.swap_limit)
            cands += [_move_edit(m, "largest objective gain") for m in moves]
            scored = ranked(cur, cands, busy)
            pick = next((r for r in scored if r[0] < key), None)
        if pick is None and not committed and cfg.reallocate:
            batches = [(judge(sol).key, i, b, sol) for i, (b, sol) in enumerate(_reallocations(cur, judge, cfg))]
            batches = [b for b in batches if b[0] < key]
            if batches:
                _, _, batch, sol = min(batches, key=lambda b: b[:2])
                prev = judge(cur)
                for e in batch:
                    nxt = e.apply(cur)
                    after = judge(nxt)
                    notes.append(f"{e.describe()}; issues {judge(cur).violations} -> {after.violations}, "
                                 f"score {judge(cur).score:.4f} -> {after.score:.4f}")
                    committed.append(e)
                    cur = nxt
                notes.append(f"batch net score {prev.score:.4f} -> {judge(cur).score:.4f}")
            break
        if pick is None:
            break
        for r in scored:
            if r is pick:
                break
            rejected.append(f"{r[4].describe()} (no improvement)")
        e, nxt = pick[4], pick[5]
        before, after = judge(cur), judge(nxt)
        committed.append(e)
        busy |= set(e.workers)
        notes.append(f"{e.describe()}; issues {before.violations} -> {after.violations}, "
                     f"score {before.score:.4f} -> {after.score:.4f}")
        cur = nxt
    if not committed:
        return StepResult(current, (), tuple(rejected[:20]), "no-op: no edit improves the current solution")
    return StepResult(cur, tuple(committed), tuple(rejected[:20]), "; ".join(notes))
