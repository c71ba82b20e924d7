"""Seeded experiment suites: instances, baselines, refinement, metrics and artifacts."""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..agents.loop import RefinementTrace, deterministic_policies, run_refinement, write_heatmaps
from ..agents.memory import MemoryStore
from ..disturbances import TYPES
from ..planners import ALGORITHMS, PlannerConfig, PlanResult, derived_rng, plan
from .disturb import DisturbanceSettings, make_disturbance
from .generate import generate_instance
from .metrics import MetricsTable, TrialOutcome, aggregate
from .scales import get_scale

log = logging.getLogger(__name__)


@dataclass
class SuiteConfig:
    dataset: str = "tdrive"
    scales: tuple[str, ...] = ("Small",)
    planners: tuple[str, ...] = ("TVPG",)
    disturbances: tuple[str, ...] = ("continue_optimize",)
    trials: int = 20
    seed: int = 0  # trial i uses seed + i
    policy: str = "deterministic"  # deterministic | llm
    max_iterations: int = 10
    memory: str = "experiment"  # experiment: shared across trials of a cell; trial: fresh per trial
    workers: int = 1
    heatmaps: str = "first"  # none | first | all
    budget_frac: float = 0.25
    weather_factor: float = 0.5
    priority_weight: float = 1.0
    new_workers: int = 2

    def __post_init__(self):
        self.scales = tuple(self.scales)
        self.planners = tuple(self.planners)
        self.disturbances = tuple(self.disturbances)
        for p in self.planners:
            if p not in ALGORITHMS:
                raise ValueError(f"unknown planner {p!r}")
        for d in self.disturbances:
            if d not in TYPES:
                raise ValueError(f"unknown disturbance {d!r}")
        for s in self.scales:
            get_scale(s, self.dataset)
        if self.trials < 1 or self.max_iterations < 1 or self.workers < 1:
            raise ValueError("trials, max_iterations and workers must be positive")
        if self.policy not in ("deterministic", "llm"):
            raise ValueError("policy must be deterministic or llm")
        if self.memory not in ("experiment", "trial"):
            raise ValueError("memory must be experiment or trial")
        if self.heatmaps not in ("none", "first", "all"):
            raise ValueError("heatmaps must be none, first or all")

    @property
    def seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.trials)]

    def settings(self) -> DisturbanceSettings:
        return DisturbanceSettings(self.budget_frac, self.weather_factor, self.priority_weight, self.new_workers)

    @classmethod
    def from_mapping(cls, d) -> "SuiteConfig":
        known = {f.name for f in fields(cls)}
        d = dict(d.get("suite", d))
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown suite keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "SuiteConfig":
        try:
            import tomllib
        except ImportError:  # Python < 3.11
            import tomli as tomllib

        with open(path, "rb") as f:
            return cls.from_mapping(tomllib.load(f))


@dataclass
class TrialRecord:
    scale: str
    planner: str
    disturbance: str
    trial: int
    seed: int
    outcome: TrialOutcome
    trace: RefinementTrace | None = None
    error: str = ""


def _cell(args) -> list[TrialRecord]:
    cfg, scale_name, planner, kind, gateway_factory = args
    scale = get_scale(scale_name, cfg.dataset)
    policies = deterministic_policies() if gateway_factory is None else gateway_factory()
    memory = MemoryStore()
    out = []
    for i, seed in enumerate(cfg.seeds):
        base: PlanResult | None = None
        try:
            inst = generate_instance(scale, seed)
            base = plan(inst, PlannerConfig(planner, seed))
            instr = make_disturbance(kind, inst, base.solution, derived_rng(seed, f"disturb/{kind}"),
                                     cfg.settings(), scale)
            mem = memory if cfg.memory == "experiment" else MemoryStore()
            tr = run_refinement(inst, base, instr, policies, cfg.max_iterations, mem)
            out.append(TrialRecord(scale_name, planner, kind, i, seed, TrialOutcome.from_trace(tr), tr))
        except Exception as e:  # isolate the trial, keep the run going
            log.exception("trial %s/%s/%s/%d failed", scale_name, planner, kind, i)
            j = 0.0 if base is None or base.objective.empty else base.objective.objective
            c = 0.0 if base is None else base.cost
            out.append(TrialRecord(scale_name, planner, kind, i, seed, TrialOutcome(False, j, j, c, c, 0), None,
                                   f"{type(e).__name__}: {e}"))
    return out


@dataclass
class ExperimentResult:
    table: MetricsTable
    records: list[TrialRecord] = field(repr=False)

    @property
    def errors(self) -> list[TrialRecord]:
        return [r for r in self.records if r.error]


def run_experiment(cfg: SuiteConfig, out_dir: str | os.PathLike | None = None, gateway_factory=None
                   ) -> ExperimentResult:
    """Run every (scale, planner, disturbance) cell; results fold in a fixed order."""
    cells = [(cfg, s, p, d, gateway_factory) for s in cfg.scales for p in cfg.planners for d in cfg.disturbances]
    if cfg.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            results = list(ex.map(_cell, cells))
    else:
        results = [_cell(c) for c in cells]
    rows = []
    records: list[TrialRecord] = []
    for (_, s, p, d, _), recs in zip(cells, results):
        rows.append(aggregate([r.outcome for r in recs], f"{cfg.dataset}-{s}", f"{p}/{d}"))
        records += recs
    table = MetricsTable(tuple(rows))
    res = ExperimentResult(table, records)
    if out_dir is not None:
        write_artifacts(res, cfg, out_dir)
    return res


def write_artifacts(res: ExperimentResult, cfg: SuiteConfig, out_dir: str | os.PathLike) -> None:
    out = Path(out_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(res.table.to_csv())
    (out / "metrics.json").write_text(res.table.to_json())
    (out / "report.md").write_text(res.table.to_markdown())
    (out / "suite.json").write_text(json.dumps(asdict(cfg), indent=1, sort_keys=True) + "\n")
    errors = [{"scale": r.scale, "planner": r.planner, "disturbance": r.disturbance, "trial": r.trial,
               "error": r.error} for r in res.errors]
    (out / "errors.json").write_text(json.dumps(errors, indent=1) + "\n")
    hm = out / "heatmaps"
    for r in res.records:
        if r.trace is None:
            continue
        stem = f"{cfg.dataset}-{r.scale}-{r.planner}-{r.disturbance}-{r.trial:03d}"
        r.trace.write(out / "traces" / f"{stem}.jsonl")
        if cfg.heatmaps == "all" or (cfg.heatmaps == "first" and r.trial == 0):
            if r.trace.final_report is not None:
                hm.mkdir(exist_ok=True)
                write_heatmaps(r.trace.final_report, hm / stem)


def table_from_traces(trace_dir: str | os.PathLike) -> MetricsTable:
    """Rebuild the metrics table from exported trace files alone."""
    groups: dict[tuple[str, str], list[TrialOutcome]] = {}
    for p in sorted(Path(trace_dir).glob("*.jsonl")):
        dataset, scale, planner, kind, _ = p.stem.split("-", 4)
        s = RefinementTrace.read_summary(p)
        groups.setdefault((f"{dataset}-{scale}", f"{planner}/{kind}"), []).append(TrialOutcome.from_summary(s))
    return MetricsTable(tuple(aggregate(v, c, s) for (c, s), v in groups.items()))
