import pytest
from hypothesis import given, settings, strategies as st

from crowdsense.grid import GridSpec, Instance, Solution, Worker, validate_solution
from crowdsense.planners import (
    ALGORITHMS, PlannerConfig, PlanResult, SAConfig, derived_rng, plan, worker_replacement,
)
from conftest import as_instance
from oracles import brute_force_best, micro_instance

FAST_SA = SAConfig(restarts=2, iters_per_restart=60)


@pytest.mark.parametrize("algo", ALGORITHMS)
def test_planners_are_feasible_and_deterministic(tiny, algo):
    cfg = PlannerConfig(algo, 3, FAST_SA)
    a, b = plan(tiny, cfg), plan(tiny, cfg)
    assert validate_solution(a.solution, tiny).feasible
    assert a.solution == b.solution and a.planner_log == b.planner_log
    assert a.cost <= tiny.budget
    assert a.algorithm == algo


@pytest.mark.parametrize("algo", ALGORITHMS)
def test_budget_below_cheapest_worker_gives_empty(tiny, algo):
    inst = Instance(tiny.grid, tiny.workers, 0.5)
    res = plan(inst, PlannerConfig(algo, 0, FAST_SA))
    assert len(res.solution) == 0 and res.objective.empty and res.cost == 0


@given(st.integers(0, 10_000), st.sampled_from(ALGORITHMS))
@settings(max_examples=25)
def test_random_micro_instances_feasible(seed, algo):
    ws, budget = micro_instance(seed, W=4, H=3, T=5, max_workers=3)
    inst = as_instance(ws, budget, 4, 3, 5)
    res = plan(inst, PlannerConfig(algo, seed, FAST_SA))
    assert validate_solution(res.solution, inst).feasible


@pytest.mark.parametrize("seed", [34, 45, 7])
def test_graphdp_reaches_optimum_when_budget_must_be_shared(seed):
    # a greedy long path for one worker starves the second; the shorten-then-add move recovers
    ws, budget = micro_instance(seed)
    inst = as_instance(ws, budget)
    res = plan(inst, PlannerConfig("GraphDP", 0))
    assert res.objective.objective == pytest.approx(brute_force_best(ws, 3, 3, 4, budget), abs=1e-9)


def test_worker_replacement_never_worsens(tiny):
    start = plan(tiny, PlannerConfig("RN", 1)).solution
    j0 = plan(tiny, PlannerConfig("RN", 1)).objective.objective
    out = worker_replacement(start, tiny)
    from crowdsense.planners import make_result
    assert make_result(out, tiny).objective.objective >= j0 - 1e-12
    assert validate_solution(out, tiny).feasible


def test_result_json_round_trip(tiny):
    res = plan(tiny, PlannerConfig("TVPG"))
    back = PlanResult.from_json_obj(res.to_json_obj(), tiny)
    assert back.solution == res.solution and back.objective == res.objective and back.cost == res.cost


def test_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig("ACO")
    with pytest.raises(ValueError):
        SAConfig(decay=1.0)


def test_derived_rng_is_stable():
    assert derived_rng(5, "x").random() == derived_rng(5, "x").random()
    assert derived_rng(5, "x").random() != derived_rng(5, "y").random()


def test_rn_depends_on_seed(small0):
    sols = {plan(small0, PlannerConfig("RN", s)).solution for s in range(4)}
    assert len(sols) > 1
