"""Command line entry point: ``crowdsense <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .grid import Instance


def _load_json(path):
    with open(path) as f:
        return json.load(f)


def _dump(obj, path=None):
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gen(a):
    from .harness.generate import generate_instance
    from .harness.scales import get_scale

    inst = generate_instance(get_scale(a.scale, a.dataset), a.seed, a.alpha)
    _dump(inst.to_dict(), a.out)


def cmd_ingest(a):
    from datetime import timedelta

    from .harness.ingest import ingest_trajectories, parse_time, read_grab, read_tdrive
    from .harness.scales import get_scale

    scale = get_scale(a.scale, a.dataset)
    reader = read_tdrive if a.format == "tdrive" else read_grab
    with open(a.input, newline="") as f:
        res = reader(f)
    start = parse_time(a.start)
    end = start + scale.horizon_minutes * 60
    workers = ingest_trajectories(res.records, a.bbox, scale, (start, end))
    if not workers:
        raise SystemExit("no usable trajectories in the window")
    inst = Instance(scale.grid_spec(), tuple(workers), a.budget if a.budget is not None else float(scale.budget),
                    name=f"{a.dataset}-{a.scale}-ingested")
    logging.info("read %d rows, skipped %d, kept %d workers", res.rows, res.skipped, len(workers))
    _dump(inst.to_dict(), a.out)


def cmd_plan(a):
    from .planners import PlannerConfig, plan

    inst = Instance.from_dict(_load_json(a.instance))
    res = plan(inst, PlannerConfig(a.algorithm, a.seed))
    _dump(res.to_json_obj(), a.out)
    if a.log:
        Path(a.log).write_text("".join(line + "\n" for line in res.planner_log))


def cmd_disturb(a):
    from .disturbances import DisturbanceInstruction, parse_disturbance

    inst = Instance.from_dict(_load_json(a.instance))
    instr = parse_disturbance(a.text, inst.grid, inst.workers)
    items = []
    if a.append and Path(a.append).exists():
        items = _load_json(a.append)
    if a.append:
        items.append(instr.to_json_obj())
        [DisturbanceInstruction.from_json_obj(d) for d in items]
        _dump(items, a.append)
    _dump(instr.to_json_obj(), None if a.append else a.out)


def _load_instructions(path):
    from .disturbances import DisturbanceInstruction

    d = _load_json(path)
    items = d if isinstance(d, list) else [d]
    if not items:
        raise SystemExit("disturbance file is empty")
    return [DisturbanceInstruction.from_json_obj(x) for x in items]


def _llm_policies(a):
    from .agents.llm import llm_policies
    from .gateway import Gateway, GatewayConfig, MockTransport

    cfg = GatewayConfig(endpoint=a.endpoint or "", model=a.model or "", temperature=a.temperature)
    transport = MockTransport.load(a.mock) if a.mock else None
    return llm_policies(Gateway(cfg, transport))


def cmd_refine(a):
    from .agents.loop import deterministic_policies, run_refinement, write_heatmaps
    from .agents.memory import MemoryStore
    from .disturbances import apply_disturbance
    from .planners import PlanResult

    inst = Instance.from_dict(_load_json(a.instance))
    base = PlanResult.from_json_obj(_load_json(a.baseline), inst)
    instrs = _load_instructions(a.disturbance)
    disturbed = inst
    for i in instrs:
        disturbed = apply_disturbance(disturbed, i)
    policies = deterministic_policies() if a.policy == "deterministic" else _llm_policies(a)
    memory = MemoryStore.load(a.memory) if a.memory and Path(a.memory).exists() else MemoryStore()
    tr = run_refinement(inst, base, instrs[-1], policies, a.max_iter, memory, disturbed=disturbed)
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tr.write(out / "trace.jsonl")
    if tr.final_report is not None:
        write_heatmaps(tr.final_report, out / "final")
    if a.memory:
        memory.save(a.memory)
    _dump(tr.summary_obj())


def cmd_experiment(a):
    from .harness.experiment import SuiteConfig, run_experiment

    cfg = SuiteConfig.load(a.config) if a.config else SuiteConfig()
    over = {k: v for k, v in (("trials", a.trials), ("seed", a.seed), ("workers", a.workers),
                              ("policy", a.policy)) if v is not None}
    if over:
        from dataclasses import asdict
        cfg = SuiteConfig(**{**asdict(cfg), **over})
    factory = None
    if cfg.policy == "llm":
        factory = _LLMFactory(a)
    res = run_experiment(cfg, a.out_dir, factory)
    sys.stdout.write(res.table.to_markdown())
    if res.errors:
        logging.warning("%d trial(s) failed; see errors.json", len(res.errors))


class _LLMFactory:
    # picklable so process pools can build their own gateway
    def __init__(self, a):
        self.a = argparse.Namespace(**vars(a))
        del self.a.func

    def __call__(self):
        return _llm_policies(self.a)


def cmd_report(a):
    from .harness.experiment import table_from_traces
    from .harness.metrics import MetricsTable

    if a.traces:
        table = table_from_traces(a.traces)
    else:
        table = MetricsTable.from_json(Path(a.metrics).read_text())
    text = table.to_csv() if a.format == "csv" else table.to_markdown()
    sys.stdout.write(text)


def _add_llm_flags(p):
    p.add_argument("--endpoint", help="chat-completion URL (key read from CROWDSENSE_API_KEY)")
    p.add_argument("--model")
    p.add_argument("--mock", help="JSON list of {match, reply} used instead of a live endpoint")
    p.add_argument("--temperature", type=float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crowdsense", description="Crowd sensing planning and refinement")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="generate a synthetic instance")
    p.add_argument("--scale", default="Small")
    p.add_argument("--dataset", default="tdrive", choices=("tdrive", "grab"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("ingest", help="build an instance from trajectory CSV")
    p.add_argument("--format", required=True, choices=("tdrive", "grab"))
    p.add_argument("--input", required=True)
    p.add_argument("--bbox", required=True, type=float, nargs=4, metavar=("LON0", "LAT0", "LON1", "LAT1"))
    p.add_argument("--start", required=True, help="window start (ISO time or epoch seconds)")
    p.add_argument("--scale", default="Small")
    p.add_argument("--dataset", default="tdrive", choices=("tdrive", "grab"))
    p.add_argument("--budget", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("plan", help="run a baseline planner")
    p.add_argument("--instance", required=True)
    p.add_argument("--algo", "--algorithm", dest="algorithm", default="GraphDP",
                   choices=("RN", "TVPG", "TCPG", "MSA", "MSAGI", "GraphDP"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--log", help="write the planner's progress log to this file")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("disturb", help="parse a free-text disturbance")
    p.add_argument("--instance", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--out")
    p.add_argument("--append", help="append to a JSON list file instead of writing a single instruction")
    p.set_defaults(func=cmd_disturb)

    p = sub.add_parser("refine", help="refine a baseline under a disturbance")
    p.add_argument("--instance", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--disturbance", required=True)
    p.add_argument("--policy", default="deterministic", choices=("deterministic", "llm"))
    p.add_argument("--max-iter", type=int, default=10)
    p.add_argument("--memory", help="memory store JSON (loaded if present, saved after the run)")
    p.add_argument("--out-dir", default="refine-out")
    _add_llm_flags(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("experiment", help="run a seeded suite")
    p.add_argument("--config", help="TOML suite file")
    p.add_argument("--out-dir", default="experiment-out")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--policy", choices=("deterministic", "llm"))
    _add_llm_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="print a metrics table")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--metrics", help="metrics.json from an experiment")
    g.add_argument("--traces", help="directory of trace .jsonl files")
    p.add_argument("--format", default="markdown", choices=("markdown", "csv"))
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        a.func(a)
    except (ValueError, OSError) as e:
        logging.error("%s", e)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
