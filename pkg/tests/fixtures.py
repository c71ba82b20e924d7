"""Shared fixture builders for the unit and acceptance tests."""
import random

from crowdsense.agents.edits import Edit
from crowdsense.agents.judge import search_context
from crowdsense.disturbances import DisturbanceInstruction, apply_disturbance
from crowdsense.grid import GridSpec, Instance, Worker, manhattan, max_moves, needed_transitions, realize_path
from crowdsense.harness.generate import generate_instance
from crowdsense.harness.scales import ScaleConfig, get_scale
from crowdsense.planners import PlannerConfig, plan
from crowdsense.search import propose_moves


def random_instance(seed):
    """A small random instance plus a matching scale preset (for disturbance generation)."""
    rng = random.Random(seed)
    W, H, T = rng.randint(3, 6), rng.randint(3, 6), rng.randint(4, 8)
    ws = []
    for i in range(rng.randint(2, 6)):
        speed = rng.choice([1.0, 1.0, 0.5])
        t0 = rng.randint(0, T - 2)
        t1 = rng.randint(t0 + 1, T - 1)
        o = (rng.randrange(W), rng.randrange(H))
        d = o
        for _ in range(20):
            c = (rng.randrange(W), rng.randrange(H))
            if manhattan(o, c) <= max_moves(t1 - t0, speed):
                d = c
                break
        ws.append(Worker(i, o, d, (t0, t1), speed, rng.choice([1.0, 1.0, 2.0])))
    budget = float(rng.randint(3, 6 * len(ws)))
    scale = ScaleConfig(f"R{seed}", len(ws), (W, H), W * H, budget, T * 15, 15)
    return Instance(GridSpec(W, H, T), tuple(ws), budget, name=f"random-{seed}"), scale


def _detour(sol, inst):
    """Direct and one-waypoint realizations for a selected worker with two spare slots."""
    for wid in sol.assignments:
        w = inst.worker(wid)
        direct = realize_path(w, [], inst.grid)
        ox, oy = w.origin
        for wp in ((ox + 1, oy), (ox - 1, oy), (ox, oy + 1), (ox, oy - 1)):
            if not inst.grid.contains(*wp) or needed_transitions(w, [wp]) > w.t_end - w.t_start:
                continue
            via = realize_path(w, [wp], inst.grid)
            if via != direct:
                return wid, sol.with_path(wid, direct), via, wp
    return None


def single_edit_fixtures(n_seeds=4):
    """(edit, s0, s1, disturbed) for one injected edit of every kind, on a few Small seeds."""
    out = []
    for seed in range(n_seeds):
        inst = generate_instance(get_scale("Small"), seed)
        base = plan(inst, PlannerConfig("TVPG", seed)).solution
        d = apply_disturbance(inst, DisturbanceInstruction("budget_change", "", 20)).with_baseline(base)
        ctx = search_context(d)
        moves = propose_moves(base, ctx)
        firsts = {}
        for m in moves:
            firsts.setdefault(m.kind, m)
        for m in firsts.values():
            if m.kind == "add_worker":
                e = Edit("add_worker", (m.into,), {"path": m.path})
            elif m.kind == "remove_worker":
                e = Edit("remove_worker", (m.out,))
            elif m.kind == "swap_workers":
                e = Edit("swap_workers", (m.out, m.into), {"path": m.path})
            else:
                e = Edit("reroute_segment", (m.out,), {"path": m.path})
            out.append((e, base, e.apply(base), d))
        detour = _detour(base, inst)
        if detour:
            wid, s0, newp, cell = detour
            s1 = s0.with_path(wid, newp)
            out.append((Edit("insert_waypoint", (wid,), {"path": newp, "cell": cell}), s0, s1, d))
            out.append((Edit("remove_waypoint", (wid,), {"path": s0.assignments[wid], "cell": cell}), s1, s0, d))
    return out
