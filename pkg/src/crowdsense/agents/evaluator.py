"""Assessment of a candidate solution against the baseline, with ranked suggestions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..coverage import CoverageState, collect_coverage, objective
from ..disturbances import DisturbedInstance, HandlingReport
from ..grid import GLOBAL, Solution, manhattan, realize_path
from .judge import Judge


@dataclass(frozen=True)
class Metrics:
    covered_count: int  # distinct (x, y, t) cells
    entropy: float
    objective_value: float  # 0.0 for an empty solution
    cost: float

    def to_dict(self) -> dict:
        return {"covered_count": self.covered_count, "entropy": self.entropy,
                "objective_value": self.objective_value, "cost": self.cost}

    @classmethod
    def from_dict(cls, d) -> "Metrics":
        return cls(int(d["covered_count"]), float(d["entropy"]), float(d["objective_value"]), float(d["cost"]))


@dataclass(frozen=True)
class MetricsDelta:
    d_covered: float
    d_entropy: float
    d_objective: float
    d_cost: float

    @classmethod
    def between(cls, m0: Metrics, mt: Metrics) -> "MetricsDelta":
        return cls(mt.covered_count - m0.covered_count, mt.entropy - m0.entropy,
                   mt.objective_value - m0.objective_value, mt.cost - m0.cost)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.d_covered, self.d_entropy, self.d_objective, self.d_cost)

    def to_dict(self) -> dict:
        return dict(zip(("d_covered", "d_entropy", "d_objective", "d_cost"), self.as_tuple()))


def compute_metrics(sol: Solution, disturbed: DisturbedInstance) -> Metrics:
    cov = collect_coverage(sol, disturbed.grid)
    ov = objective(cov, disturbed.base.objective_config())
    pool = {w.id: w for w in (*disturbed.base.workers, *disturbed.added)}
    cost = sum(len(p) * (pool[k].reward_per_step if k in pool else 1.0) for k, p in sol.assignments.items())
    return Metrics(len(cov.counts), ov.entropy, 0.0 if ov.empty else ov.objective, float(cost))


@dataclass(frozen=True)
class Suggestion:
    template: str  # reroute_through_region | add_worker | remove_worker | swap | repair
    workers: tuple[int, ...]
    region: tuple[tuple[int, int], ...]
    region_name: str
    repairs: int  # violations this addresses
    estimated_gain: float
    rationale: str

    @property
    def rank_key(self):
        return (-self.repairs, -self.estimated_gain, self.template, self.workers)

    def to_json_obj(self) -> dict:
        return {"template": self.template, "workers": list(self.workers), "region": [list(c) for c in self.region],
                "region_name": self.region_name, "repairs": self.repairs,
                "estimated_gain": self.estimated_gain, "rationale": self.rationale}


@dataclass(frozen=True)
class EvalReport:
    metrics: Metrics
    baseline_metrics: Metrics
    handling: HandlingReport
    violations: tuple[str, ...]
    heatmaps: dict = field(repr=False, compare=False)
    suggestions: tuple[Suggestion, ...] = ()
    summary: str = ""

    @property
    def delta(self) -> MetricsDelta:
        return MetricsDelta.between(self.baseline_metrics, self.metrics)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def to_json_obj(self, with_heatmaps: bool = False) -> dict:
        d = {"metrics": self.metrics.to_dict(), "baseline_metrics": self.baseline_metrics.to_dict(),
             "delta": self.delta.to_dict(), "handling": self.handling.to_json_obj(),
             "violations": list(self.violations), "suggestions": [s.to_json_obj() for s in self.suggestions],
             "summary": self.summary}
        if with_heatmaps:
            d["heatmaps"] = {k: v.tolist() for k, v in self.heatmaps.items()}
        return d


def region_name(cells, width: int, height: int) -> str:
    """Coarse compass name of a cell group, with y growing downwards."""
    cx = sum(c[0] for c in cells) / len(cells)
    cy = sum(c[1] for c in cells) / len(cells)
    col = ("left", "center", "right")[min(2, int(3 * (cx + 0.5) / width))]
    row = ("top", "middle", "bottom")[min(2, int(3 * (cy + 0.5) / height))]
    if row == "middle" and col == "center":
        return "center"
    if row == "middle":
        return f"middle-{col}"
    return f"{row}-{col}" if col != "center" else f"{row}-center"


def regions(width: int, height: int) -> list[tuple[tuple[int, int], ...]]:
    """Square blocks of side ``min(W, H) // 4`` (at least 1) tiling the grid."""
    s = max(1, min(width, height) // 4)
    out = []
    for by in range(0, height, s):
        for bx in range(0, width, s):
            out.append(tuple((x, y) for x in range(bx, min(bx + s, width)) for y in range(by, min(by + s, height))))
    return out


def _dist_to(path, cells) -> int:
    return min(manhattan((x, y), c) for x, y, _ in path for c in cells)


def _suggest(candidate: Solution, disturbed: DisturbedInstance, judge: Judge, max_regions: int = 3) -> list[Suggestion]:
    g = disturbed.grid
    ctx = judge.ctx
    verdict = judge(candidate)
    out: list[Suggestion] = []
    W, H = g.width, g.height

    # violations first
    by_worker: dict[int, list[str]] = {}
    for v in verdict.validation.violations:
        by_worker.setdefault(v.worker, []).append(v.kind)
    for wid in sorted(k for k in by_worker if k != GLOBAL):
        kinds = sorted(set(by_worker[wid]))
        p = candidate.assignments.get(wid, ())
        if wid not in ctx.workers:
            out.append(Suggestion("remove_worker", (wid,), (), "", len(by_worker[wid]), 0.0,
                                  f"worker {wid} is no longer available"))
        else:
            cells = tuple(dict.fromkeys((x, y) for x, y, t in p if (x, y, t) in disturbed.blocked))
            out.append(Suggestion("repair", (wid,), cells, region_name(cells, W, H) if cells else "",
                                  len(by_worker[wid]), 0.0,
                                  f"reroute worker {wid} to fix {', '.join(kinds)}" +
                                  (f" near the {region_name(cells, W, H)} region" if cells else "")))
    cost = ctx.total_cost(candidate)
    slack = ctx.budget - cost
    state = ctx.state(candidate)
    contrib = []
    for wid, p in candidate.assignments.items():
        state.remove_path(p)
        rest = state.value() if state.q else 0.0
        state.add_path(p)
        contrib.append(((state.value() if state.q else 0.0) - rest, wid))
    contrib.sort()
    if GLOBAL in by_worker and contrib:
        loss, wid = contrib[0]
        out.append(Suggestion("remove_worker", (wid,), (), "", 1, -loss,
                              f"cost {cost:g} exceeds budget {ctx.budget:g}; worker {wid} contributes least"))
    for e in verdict.handling.unsatisfied:
        if e.type == "mid_path_visit":
            for w, x, y in disturbed.required_visits:
                p = candidate.assignments.get(w, ())
                if not any((s[0], s[1]) == (x, y) for s in p):
                    out.append(Suggestion("reroute_through_region", (w,), ((x, y),), region_name([(x, y)], W, H), 1,
                                          0.0, f"worker {w} must pass through ({x}, {y})"))
        elif e.type == "priority_area":
            cells = disturbed.priority[0]
            if candidate.assignments:
                wid = min(candidate.assignments, key=lambda k: (_dist_to(candidate.assignments[k], cells), k))
                out.append(Suggestion("reroute_through_region", (wid,), cells, region_name(cells, W, H), 1, 0.0,
                                      f"priority coverage dropped below the baseline ({e.detail}); "
                                      f"send worker {wid} through the {region_name(cells, W, H)} area"))

    # improvement hints
    gains = state.cell_gains() if state.q else np.ones((g.num_slots, W, H))
    counts = collect_coverage(candidate, g).dense()  # [t, y, x]
    regs = regions(W, H)
    per = [(int(sum(counts[:, y, x].sum() for x, y in r)), i) for i, r in enumerate(regs)]
    per.sort()
    cut = per[max(0, (len(per) + 3) // 4 - 1)][0]
    low = [regs[i] for n, i in per if n <= cut][:max_regions]
    for r in low:
        if not candidate.assignments:
            break
        wid = min(candidate.assignments, key=lambda k: (_dist_to(candidate.assignments[k], r), k))
        w = ctx.workers.get(wid)
        if w is None:
            continue
        ts = list(w.window)
        top = sorted((gains[t, x, y] for t in ts for x, y in r), reverse=True)[:len(r)]
        est = float(np.mean(top)) if top else 0.0
        name = region_name(r, W, H)
        n = int(sum(counts[:, y, x].sum() for x, y in r))
        out.append(Suggestion("reroute_through_region", (wid,), r, name, 0, est,
                              f"reroute worker {wid} into the low-coverage {name} region ({n} samples)"))
    pool = [w for k, w in sorted(ctx.workers.items()) if k not in candidate.assignments and w.min_cost() <= slack + 1e-9]
    best = None
    for w in pool:
        try:
            p = realize_path(w, [], g)
        except ValueError:
            continue
        if any(s in disturbed.blocked for s in p):
            continue
        v = state.value_with(p) - (state.value() if state.q else 0.0)
        if best is None or v > best[0] + 1e-12:
            best = (v, w.id)
    if best is not None:
        out.append(Suggestion("add_worker", (best[1],), (), "", 0, float(best[0]),
                              f"budget slack {slack:g} allows recruiting worker {best[1]}"))
    if contrib and not any(s.template == "remove_worker" for s in out):
        loss, wid = contrib[0]
        out.append(Suggestion("swap", (wid,), (), "", 0, 0.0,
                              f"worker {wid} adds least ({loss:+.4f}); consider replacing it"))
    out.sort(key=lambda s: s.rank_key)
    return out


def eval_report(baseline: Solution, candidate: Solution, disturbed: DisturbedInstance,
                judge: Judge | None = None) -> EvalReport:
    judge = judge or Judge(disturbed)
    verdict = judge(candidate)
    m0 = compute_metrics(baseline, disturbed)
    mt = compute_metrics(candidate, disturbed)
    g = disturbed.grid
    hb = collect_coverage(baseline, g).dense()
    hc = collect_coverage(candidate, g).dense()
    heat = {"baseline": hb, "candidate": hc, "diff": hc - hb}
    viol = tuple(f"worker {v.worker}: {v.kind}" if v.worker != GLOBAL else v.kind
                 for v in verdict.validation.violations)
    sugg = tuple(_suggest(candidate, disturbed, judge))
    rel = (mt.objective_value - m0.objective_value) / max(abs(m0.objective_value), 1e-12) * 100
    parts = [f"J {m0.objective_value:.4f} -> {mt.objective_value:.4f} ({rel:+.2f}%)",
             f"cost {m0.cost:g} -> {mt.cost:g} of {disturbed.effective_budget:g}",
             f"{mt.covered_count} cells covered"]
    if viol or verdict.handling.unsatisfied:
        parts.append(f"{len(viol) + len(verdict.handling.unsatisfied)} open issue(s)")
    else:
        parts.append("feasible, disturbance handled")
    if sugg:
        parts.append(f"top suggestion: {sugg[0].rationale}")
    return EvalReport(mt, m0, verdict.handling, viol, heat, sugg, "; ".join(parts))
