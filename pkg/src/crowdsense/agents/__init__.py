"""Solver, evaluator and memory roles plus the refinement loop."""
from .edits import Edit, diff_edits, replay
from .evaluator import EvalReport, Metrics, MetricsDelta, compute_metrics, eval_report
from .judge import Judge, search_context
from .loop import Outcome, Policies, RefinementTrace, deterministic_policies, run_refinement
from .memory import MemoryQuery, MemoryStore, MetaOperation, extract_meta_operation
from .solver import SolverConfig, StepResult, solver_step
