"""SR / AIR / ANI / ACS aggregation and table output."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

AIR_EPS = 1e-9
FOOTER = ("AIR is averaged over all trials (failed trials contribute their best iterate) and divides by "
          "max(|J_base|, 1e-9); an empty solution counts as J = 0. ACS = cost_base - cost_final, so negative "
          "values mean the refined plan costs more. ANI averages iterations over successful trials only.")


@dataclass(frozen=True)
class TrialOutcome:
    success: bool
    j_base: float
    j_final: float
    cost_base: float
    cost_final: float
    iterations_used: int

    @classmethod
    def from_trace(cls, trace) -> "TrialOutcome":
        return cls(trace.success, trace.baseline_objective, trace.final_objective, trace.baseline_cost,
                   trace.final_cost, trace.iterations_used)

    @classmethod
    def from_summary(cls, s: Mapping) -> "TrialOutcome":
        return cls(bool(s["success"]), float(s["baseline_objective"]), float(s["final_objective"]),
                   float(s["baseline_cost"]), float(s["final_cost"]), int(s["iterations_used"]))

    @property
    def air(self) -> float:
        return (self.j_final - self.j_base) / max(abs(self.j_base), AIR_EPS) * 100.0

    @property
    def acs(self) -> float:
        return self.cost_base - self.cost_final


@dataclass(frozen=True)
class MetricsRow:
    config: str
    setting: str
    trials: int
    sr: float
    air: float
    air_std: float
    ani: float | None
    acs: float

    def to_dict(self) -> dict:
        return asdict(self)


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


def _std(xs: Sequence[float]) -> float:
    if len(xs) < 2:
        return 0.0
    m = _mean(xs)
    return math.sqrt(math.fsum((x - m) ** 2 for x in xs) / (len(xs) - 1))


def aggregate(outcomes: Sequence[TrialOutcome], config: str = "", setting: str = "") -> MetricsRow:
    if not outcomes:
        raise ValueError("no trials to aggregate")
    ok = [o for o in outcomes if o.success]
    airs = [o.air for o in outcomes]
    return MetricsRow(config, setting, len(outcomes), len(ok) / len(outcomes) * 100.0, _mean(airs), _std(airs),
                      _mean([o.iterations_used for o in ok]) if ok else None, _mean([o.acs for o in outcomes]))


def compute_metrics(traces: Sequence, baselines: Sequence, config: str = "", setting: str = "") -> MetricsRow:
    """Aggregate refinement traces against their aligned baseline plans."""
    if len(traces) != len(baselines):
        raise ValueError(f"{len(traces)} traces but {len(baselines)} baselines")
    for i, (t, b) in enumerate(zip(traces, baselines)):
        if t.baseline != b.solution:
            raise ValueError(f"trace {i} was not refined from baseline {i}")
    return aggregate([TrialOutcome.from_trace(t) for t in traces], config, setting)


@dataclass(frozen=True)
class MetricsTable:
    rows: tuple[MetricsRow, ...]

    COLUMNS = ("config", "setting", "trials", "sr", "air", "air_std", "ani", "acs")

    def row(self, config: str, setting: str) -> MetricsRow:
        for r in self.rows:
            if r.config == config and r.setting == setting:
                return r
        raise KeyError((config, setting))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.rows:
            d = r.to_dict()
            w.writerow(["" if d[c] is None else (repr(d[c]) if isinstance(d[c], float) else d[c])
                        for c in self.COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"rows": [r.to_dict() for r in self.rows], "note": FOOTER}, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetricsTable":
        return cls(tuple(MetricsRow(**r) for r in json.loads(text)["rows"]))

    def to_markdown(self) -> str:
        lines = ["| config | setting | trials | SR (%) | AIR (%) | ANI | ACS |", "|---|---|---|---|---|---|---|"]
        for r in self.rows:
            ani = "--" if r.ani is None else f"{r.ani:.1f}"
            lines.append(f"| {r.config} | {r.setting} | {r.trials} | {r.sr:.1f} | {r.air:.3f} ± {r.air_std:.3f} | "
                         f"{ani} | {r.acs:.2f} |")
        lines += ["", FOOTER]
        return "\n".join(lines) + "\n"


def table_from_outcomes(groups: Iterable[tuple[str, str, Sequence[TrialOutcome]]]) -> MetricsTable:
    return MetricsTable(tuple(aggregate(list(o), c, s) for c, s, o in groups))
