"""The refinement loop: solver step, evaluation, memory update, repeat."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ..disturbances import DisturbanceInstruction, DisturbedInstance, apply_disturbance
from ..grid import Instance, Solution
from ..planners import PlanResult
from .edits import Edit
from .evaluator import EvalReport, Metrics, compute_metrics, eval_report
from .judge import Judge
from .memory import MemoryQuery, MemoryStore, MetaOperation, extract_meta_operation
from .solver import SolverConfig, StepResult, solver_step

TEMPLATE_OPS = {"reroute_through_region": ("modify_path",), "repair": ("modify_path",),
                "add_worker": ("add_worker",), "remove_worker": ("remove_worker",),
                "swap": ("add_worker", "remove_worker")}


@dataclass(frozen=True)
class Outcome:
    value: Any
    tag: str = "deterministic"  # deterministic | llm | fallback
    tokens: int = 0


@dataclass
class Policies:
    """Callables for the three roles; each returns an :class:`Outcome`."""
    solver: Callable[..., Outcome]
    evaluator: Callable[..., Outcome]
    memory: Callable[..., Outcome]
    deterministic: bool = True


def deterministic_policies(config: SolverConfig | None = None) -> Policies:
    cfg = config or SolverConfig()

    def solve(current, judge, feedback, retrieved):
        return Outcome(solver_step(current, judge, feedback, retrieved, cfg))

    def evaluate(baseline, candidate, disturbed, judge):
        return Outcome(eval_report(baseline, candidate, disturbed, judge))

    def remember(s0, st, m0, mt, disturbed, disturbance):
        return Outcome(extract_meta_operation(s0, st, m0, mt, disturbed, disturbance))

    return Policies(solve, evaluate, remember, True)


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    solution: Solution
    report: EvalReport
    edits: tuple[Edit, ...]
    explanation: str
    success: bool
    tags: dict
    tokens: int  # cumulative

    def to_json_obj(self) -> dict:
        r = self.report
        return {"iter": self.iter, "solution": self.solution.to_json_obj(), "metrics": r.metrics.to_dict(),
                "handling": r.handling.to_json_obj(), "violations": list(r.violations),
                "edits": [e.to_json_obj() for e in self.edits], "explanation": self.explanation,
                "summary": r.summary, "suggestions": [s.to_json_obj() for s in r.suggestions[:5]],
                "success": self.success, "tags": self.tags, "tokens": self.tokens}


@dataclass(frozen=True)
class RefinementTrace:
    instruction: DisturbanceInstruction
    baseline: Solution
    baseline_objective: float
    baseline_cost: float
    iterations: tuple[IterationRecord, ...]
    final: Solution
    final_objective: float
    final_cost: float
    success: bool
    iterations_used: int
    max_iterations: int
    final_report: EvalReport | None = field(default=None, repr=False, compare=False)

    @property
    def tokens(self) -> int:
        return self.iterations[-1].tokens if self.iterations else 0

    def summary_obj(self) -> dict:
        return {"disturbance": self.instruction.type, "instruction": self.instruction.to_json_obj(),
                "baseline_objective": self.baseline_objective, "baseline_cost": self.baseline_cost,
                "final_objective": self.final_objective, "final_cost": self.final_cost,
                "final": self.final.to_json_obj(), "success": self.success,
                "iterations_used": self.iterations_used, "iterations_run": len(self.iterations),
                "max_iterations": self.max_iterations, "tokens": self.tokens}

    def to_jsonl(self) -> str:
        lines = [json.dumps(r.to_json_obj(), sort_keys=True) for r in self.iterations]
        lines.append(json.dumps({"summary": self.summary_obj()}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def write(self, path: str | os.PathLike) -> None:
        with open(path, "w") as f:
            f.write(self.to_jsonl())

    @classmethod
    def read_summary(cls, path: str | os.PathLike) -> dict:
        with open(path) as f:
            last = f.read().strip().splitlines()[-1]
        return json.loads(last)["summary"]


def succeeded(instr_type: str, report_ok: bool, j_final: float, j_base: float) -> bool:
    if not report_ok:
        return False
    if instr_type == "continue_optimize":
        return j_final > j_base + 1e-12
    return True


def _query(report: EvalReport, disturbance: str, grid) -> MemoryQuery:
    ops: list[str] = []
    for s in report.suggestions[:3]:
        for o in TEMPLATE_OPS.get(s.template, ()):
            if o not in ops:
                ops.append(o)
    centroid = (0.5, 0.5)
    top = next((s for s in report.suggestions if s.region), None)
    if top is not None:
        cx = sum(c[0] for c in top.region) / len(top.region) / max(1, grid.width - 1)
        cy = sum(c[1] for c in top.region) / len(top.region) / max(1, grid.height - 1)
        centroid = (cx, cy)
    return MemoryQuery(tuple(ops), disturbance, centroid)


def run_refinement(instance: Instance, baseline: PlanResult, instruction: DisturbanceInstruction,
                   policies: Policies | None = None, max_iterations: int = 10, memory: MemoryStore | None = None,
                   stale_limit: int = 2, retrieve_k: int = 3,
                   disturbed: DisturbedInstance | None = None) -> RefinementTrace:
    policies = policies or deterministic_policies()
    memory = MemoryStore() if memory is None else memory
    if disturbed is None:
        disturbed = apply_disturbance(instance, instruction)
    d = disturbed.with_baseline(baseline.solution)
    judge = Judge(d)
    s0 = baseline.solution
    j_base = 0.0 if baseline.objective.empty else baseline.objective.objective
    kind = instruction.type

    report = policies.evaluator(s0, s0, d, judge).value
    cur = s0
    m_prev: Metrics = compute_metrics(s0, d)
    best_key, best_iter, best_sol, best_report = judge(s0).key, 0, s0, report
    records: list[IterationRecord] = []
    tokens = 0
    stale = 0
    last_out, last_inputs = None, None
    for it in range(1, max_iterations + 1):
        retrieved = memory.retrieve(_query(report, kind, d.grid), retrieve_k) if len(memory) else []
        if policies.deterministic and records and records[-1].solution == cur and not records[-1].edits \
                and last_inputs == (len(memory), tuple(map(id, retrieved))):
            # same inputs to a deterministic policy: the step would be identical
            out = Outcome(last_out.value, last_out.tag, 0)
        else:
            out = policies.solver(cur, judge, report, retrieved)
        last_out, last_inputs = out, (len(memory), tuple(map(id, retrieved)))
        step: StepResult = out.value
        tokens += out.tokens
        tags = {"solver": out.tag}
        prev, cur = cur, step.solution
        ev = policies.evaluator(s0, cur, d, judge)
        report = ev.value
        tokens += ev.tokens
        tags["eval"] = ev.tag
        if cur != prev:
            m_now = compute_metrics(cur, d)
            mo = policies.memory(prev, cur, m_prev, m_now, d, kind)
            tokens += mo.tokens
            tags["memory"] = mo.tag
            meta: MetaOperation = mo.value
            if meta.op_type != "other":
                memory.add(meta)
            m_prev = m_now
        v = judge(cur)
        ok = succeeded(kind, v.ok, report.metrics.objective_value, j_base)
        records.append(IterationRecord(it, cur, report, step.edits, step.explanation, ok, tags, tokens))
        if v.key < best_key:
            best_key, best_iter, best_sol, best_report = v.key, it, cur, report
            stale = 0
        else:
            stale += 1
        best_ok = succeeded(kind, judge(best_sol).ok, best_report.metrics.objective_value, j_base)
        if stale >= stale_limit and (best_ok or (policies.deterministic and step.noop)):
            break
    fv = judge(best_sol)
    j_final = best_report.metrics.objective_value
    ok = succeeded(kind, fv.ok, j_final, j_base)
    return RefinementTrace(instruction, s0, j_base, baseline.cost, tuple(records), best_sol, j_final,
                           best_report.metrics.cost, ok, best_iter, max_iterations, best_report)


def write_heatmaps(report: EvalReport, prefix: str | os.PathLike) -> list[str]:
    """One PGM strip per heatmap (slots side by side) plus a JSON file with the raw matrices."""
    from PIL import Image

    written = []
    for name, arr in report.heatmaps.items():
        a = np.asarray(arr, dtype=float)
        strip = np.concatenate(list(a), axis=1) if a.ndim == 3 else a
        lo, hi = float(strip.min()), float(strip.max())
        if name == "diff":
            m = max(abs(lo), abs(hi), 1e-12)
            img = (strip + m) / (2 * m) * 255
        else:
            img = (strip - lo) / max(hi - lo, 1e-12) * 255
        p = f"{prefix}_{name}.pgm"
        Image.fromarray(np.round(img).astype(np.uint8)).save(p)  # 2-D uint8 -> mode L
        written.append(p)
    p = f"{prefix}_heatmaps.json"
    with open(p, "w") as f:
        json.dump({k: np.asarray(v).tolist() for k, v in report.heatmaps.items()}, f)
    written.append(p)
    return written
