import json
import math

import pytest
from hypothesis import given, strategies as st

from crowdsense.agents.edits import EDIT_KINDS, META_KIND
from crowdsense.agents.evaluator import Metrics, MetricsDelta, compute_metrics
from crowdsense.agents.memory import (
    OP_TYPES, MemoryQuery, MemoryStore, MetaOperation, OpContext, cosine, entry_features, extract_meta_operation,
    features, impact,
)
from crowdsense.disturbances import DisturbanceInstruction, DisturbedInstance, apply_disturbance
from crowdsense.grid import Solution
from crowdsense.harness.generate import generate_instance
from crowdsense.harness.scales import get_scale
from crowdsense.planners import PlannerConfig, plan
from fixtures import single_edit_fixtures


def op(kind, dist="continue_optimize", centroid=(0.5, 0.5), gap=(0, 0, 1, 0), phi=0.1, details=""):
    return MetaOperation(kind, details, OpContext(dist, 40.0, centroid), MetricsDelta(*gap), phi)


def test_three_entry_retrieval_matches_hand_cosines():
    a = op("modify_path", gap=(1, 2, 0.3, 1))                    # signs (+, +, +, +)
    b = op("add_worker", centroid=(1.0, 1.0))                   # signs (0, 0, +, 0)
    c = op("modify_path", dist="budget_change", centroid=(0.0, 0.0), gap=(0, 0, -0.2, 0))
    store = MemoryStore([c, b, a])
    q = MemoryQuery(("modify_path",), "continue_optimize", (0.5, 0.5))
    # |q|^2 = 1 + 1 + 0.25 + 0.25 + 1 = 3.5
    want = {id(a): 3.5 / math.sqrt(3.5 * 6.5), id(b): 3.0 / math.sqrt(3.5 * 5.0), id(c): 0.0}
    for e in (a, b, c):
        assert cosine(q.vector(), entry_features(e)) == pytest.approx(want[id(e)], abs=1e-12)
    assert store.retrieve(q, 3) == [a, b, c]
    assert store.retrieve(q, 1) == [a]


def test_ties_prefer_recent_entries():
    old, new = op("add_worker", details="old"), op("add_worker", details="new")
    store = MemoryStore([old, new])
    assert store.retrieve(MemoryQuery(("add_worker",), "continue_optimize"), 2) == [new, old]


def test_capacity_evicts_oldest():
    store = MemoryStore(capacity=2)
    ops = [op("add_worker", details=str(i)) for i in range(3)]
    for o in ops:
        store.add(o)
    assert store.entries == tuple(ops[1:])
    with pytest.raises(ValueError):
        MemoryStore(capacity=0)
    with pytest.raises(ValueError):
        store.retrieve(MemoryQuery((), "continue_optimize"), 0)


@given(st.lists(st.tuples(st.sampled_from(OP_TYPES), st.floats(-5, 5), st.floats(0, 1), st.floats(0, 1)),
                max_size=8))
def test_persist_round_trip_is_bit_exact(tmp_path_factory, rows):
    store = MemoryStore([op(k, centroid=(cx, cy), gap=(1, -0.5, v, 2), phi=v * 0.3) for k, v, cx, cy in rows])
    p = tmp_path_factory.mktemp("mem") / "store.json"
    store.save(p)
    back = MemoryStore.load(p)
    assert back.entries == store.entries
    assert json.dumps(back.to_json_obj()) == json.dumps(store.to_json_obj())


def test_meta_operation_validation():
    with pytest.raises(ValueError):
        op("teleport")
    with pytest.raises(ValueError):
        op("add_worker", phi=math.inf)


def test_impact_weights_normalised_deltas():
    m0 = Metrics(10, 2.0, 4.0, 20.0)
    d = MetricsDelta(2, 0.5, 0.4, 4)
    # 0.1*2/10 + 0.2*0.5/2 + 1.0*0.4/4 - 0.1*4/20
    assert impact(d, m0) == pytest.approx(0.02 + 0.05 + 0.1 - 0.02, abs=1e-12)


def test_features_layout():
    v = features(("add_worker",), "bad_weather", (0.25, 0.75), (1, -1, 0, 1))
    assert len(v) == len(OP_TYPES) + 8 + 2 + 4
    assert v[0] == 1 and sum(v[:4]) == 1 and v[4 + 6] == 1 and v[12:14] == [0.25, 0.75]


FIXTURES = single_edit_fixtures()


def test_fixtures_cover_every_meta_kind():
    assert {e.kind for e, *_ in FIXTURES} == set(EDIT_KINDS)


@pytest.mark.parametrize("i", range(len(FIXTURES)))
def test_extraction_recovers_injected_edit(i):
    e, s0, s1, d = FIXTURES[i]
    m0, m1 = compute_metrics(s0, d), compute_metrics(s1, d)
    meta = extract_meta_operation(s0, s1, m0, m1, d, "budget_change")
    assert meta.op_type == META_KIND[e.kind], e.describe()
    assert 0 <= meta.context.centroid[0] <= 1 and 0 <= meta.context.centroid[1] <= 1


def test_identical_solutions_give_other():
    inst = generate_instance(get_scale("Small"), 0)
    s = plan(inst, PlannerConfig("TVPG")).solution
    d = DisturbedInstance.of(inst)
    m = compute_metrics(s, d)
    meta = extract_meta_operation(s, s, m, m, d)
    assert meta.op_type == "other" and meta.impact == 0.0
    assert extract_meta_operation(Solution(), s, compute_metrics(Solution(), d), m, d).op_type == "add_worker"
