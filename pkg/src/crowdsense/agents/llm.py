"""Model-backed solver/eval/memory policies with per-step deterministic fallback.

Prompts and replies never enter traces; only the tag (llm or fallback) and
the token counts do.
"""
from __future__ import annotations

import json
from dataclasses import replace

from ..gateway import ChatRequest, Gateway, parse_structured
from ..gateway import with_fallback
from ..grid import Solution
from .edits import diff_edits
from .evaluator import eval_report
from .loop import Outcome, Policies
from .memory import MetaOperation, extract_meta_operation
from .solver import SolverConfig, StepResult, solver_step

SOLVER_PROMPT = """You improve routes for people who collect city sensing data while they travel.
The city is a grid of cells and time is split into slots. You get the task settings, the candidate
workers, the current assignment, the latest review and an instruction (either keep improving, or a
change in conditions that must be respected).
Each assigned worker begins at its origin in the first slot of its window, finishes at its destination
no later than the last slot, and in each slot either stays or steps to one of the four neighbouring
cells. A worker with speed below 1 must wait between steps. A path costs its number of steps times the
worker's pay rate, and all paths together must fit the budget.
Answer with one JSON object and nothing else:
{"think_process": "<your reasoning, 200 words at most>",
 "refined_solution": {"<worker id>": [[x, y, t], ...]}}"""

EVAL_PROMPT = """You review a proposed route plan for city sensing workers against the plan it started from.
You are given measured numbers (distinct cells covered, entropy of the coverage, the combined objective
and the cost), a list of constraint checks and a few candidate fixes found by automatic analysis.
Say briefly how the plan performs and give concrete advice on what to change next.
Answer with one JSON object: {"eval_summary": "<short assessment>", "advice": "<specific next steps>"}"""

MEMORY_PROMPT = """You keep a log of which plan changes paid off. Compare the earlier and the later route
plan together with their numbers and name the one change that mattered most.
Answer with one JSON object: {"operation_type": "add_worker" | "remove_worker" | "modify_path" | "other",
"operation_details": "<what changed and what it did to the numbers>"}"""


def _solution_text(sol: Solution, limit: int) -> str:
    out, n = {}, 0
    for k, p in sol.assignments.items():
        if n >= limit:
            break
        out[str(k)] = [list(s) for s in p[: max(0, limit - n)]]
        n += len(out[str(k)])
    text = json.dumps(out, separators=(",", ":"))
    total = sum(len(p) for p in sol.assignments.values())
    if total > limit:
        text += f"\n(listing truncated: {limit} of {total} steps shown)"
    return text


def _settings(judge) -> str:
    d = judge.disturbed
    g = d.grid
    workers = [{"id": w.id, "origin": list(w.origin), "destination": list(w.destination), "window": list(w.window),
                "speed": w.speed, "rate": w.reward_per_step} for w in judge.ctx.workers.values()]
    return json.dumps({"grid": [g.width, g.height], "slots": g.num_slots, "budget": d.effective_budget,
                       "blocked": sorted(list(c) for c in d.blocked)[:200],
                       "required_visits": [list(r) for r in d.required_visits],
                       "priority_cells": [list(c) for c in d.priority[0]], "workers": workers})


def llm_policies(gateway: Gateway, config: SolverConfig | None = None) -> Policies:
    cfg = config or SolverConfig()
    gcfg = gateway.config

    def ask(system: str, user: str, kind: str, grid):
        def call():
            req = ChatRequest(system, (("user", user),), temperature=gcfg.temperature)
            c = gateway.complete(req)
            return parse_structured(c.text, kind, grid), c.usage.total
        return call

    def solve(current, judge, feedback, retrieved):
        d = judge.disturbed
        hints = "; ".join(getattr(r, "details", str(r)) for r in retrieved) or "none"
        user = (f"Settings: {_settings(judge)}\nCurrent assignment: {_solution_text(current, gcfg.max_path_steps)}\n"
                f"Review: {feedback.summary if feedback else 'none'}\nRecalled hints: {hints}\n"
                f"Instruction: {d.active[-1].description if d.active else 'continue optimizing'}")

        def fallback():
            return solver_step(current, judge, feedback, retrieved, cfg)

        res = with_fallback(ask(SOLVER_PROMPT, user, "solver", d.grid), fallback, gcfg.max_retries)
        if res.tag == "fallback":
            return Outcome(res.value, "fallback", res.tokens)
        out = res.value
        start = judge(current)
        cur, kept, rejected = current, [], []
        for e in diff_edits(current, out.refined_solution, "model edit"):
            if len(kept) >= cfg.batch_max:
                rejected.append(f"{e.describe()} (batch limit)")
                continue
            nxt = e.apply(cur)
            if judge(nxt).rank > start.rank:
                rejected.append(f"{e.describe()} (adds constraint violations)")
                continue
            kept.append(e)
            cur = nxt
        words = " ".join(out.think_process.split()[:200])
        expl = words if kept else f"no-op: {words}"
        return Outcome(StepResult(cur, tuple(kept), tuple(rejected), expl), "llm", res.tokens)

    def evaluate(baseline, candidate, disturbed, judge):
        rep = eval_report(baseline, candidate, disturbed, judge)
        user = (f"Metrics: {json.dumps(rep.metrics.to_dict())}\nBaseline metrics: "
                f"{json.dumps(rep.baseline_metrics.to_dict())}\nChecks: {json.dumps(rep.handling.to_json_obj())}\n"
                f"Violations: {list(rep.violations)[:20]}\n"
                f"Candidate fixes: {[s.rationale for s in rep.suggestions[:5]]}")
        res = with_fallback(ask(EVAL_PROMPT, user, "eval", disturbed.grid), lambda: None, gcfg.max_retries)
        if res.tag == "fallback":
            return Outcome(rep, "fallback", res.tokens)
        return Outcome(replace(rep, summary=f"{res.value.eval_summary} Advice: {res.value.advice}"), "llm", res.tokens)

    def remember(s0, st, m0, mt, disturbed, disturbance):
        op = extract_meta_operation(s0, st, m0, mt, disturbed, disturbance)
        user = (f"Earlier plan: {_solution_text(s0, gcfg.max_path_steps)}\nMetrics: {json.dumps(m0.to_dict())}\n"
                f"Later plan: {_solution_text(st, gcfg.max_path_steps)}\nMetrics: {json.dumps(mt.to_dict())}")
        res = with_fallback(ask(MEMORY_PROMPT, user, "memory", None), lambda: None, gcfg.max_retries)
        if res.tag == "fallback" or op.op_type == "other":
            return Outcome(op, res.tag, res.tokens)
        named = MetaOperation(res.value.operation_type, res.value.operation_details, op.context, op.metric_gap,
                              op.impact)
        return Outcome(named, "llm", res.tokens)

    return Policies(solve, evaluate, remember, deterministic=False)
