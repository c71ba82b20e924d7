import pytest
from hypothesis import assume, given, settings, strategies as st

from crowdsense.disturbances import (
    TYPES, DisturbanceError, DisturbanceInstruction, DisturbanceParseError, DisturbedInstance, apply_disturbance,
    check_handling, parse_disturbance, priority_count, render, validate_disturbed,
)
from crowdsense.grid import GridSpec, Instance, Solution, Worker, realize_path

G = GridSpec(6, 5, 8)
cell = st.tuples(st.integers(0, 5), st.integers(0, 4))
nice = st.one_of(st.integers(1, 60).map(float), st.sampled_from([0.5, 2.5, 12.25]))


def _new_worker(i, o, span):
    t0 = span[0]
    return Worker(i, o, o, (t0, t0 + span[1]))


instructions = st.one_of(
    st.builds(lambda a, up: DisturbanceInstruction("budget_change", "", a if up else -a), nice, st.booleans()),
    st.builds(lambda cs: DisturbanceInstruction("area_blocked", "", cs),
              st.lists(st.one_of(cell, st.builds(lambda c, a, b: (*c, a, a + b), cell, st.integers(0, 5),
                                                 st.integers(0, 2))), min_size=1, max_size=3)),
    st.builds(lambda cs, w: DisturbanceInstruction("priority_area", "", (cs, w)),
              st.lists(cell, min_size=1, max_size=4, unique=True), nice),
    st.builds(lambda ps: DisturbanceInstruction("mid_path_visit", "", [(w, *c) for w, c in ps]),
              st.lists(st.tuples(st.integers(0, 3), cell), min_size=1, max_size=3)),
    st.builds(lambda ids: DisturbanceInstruction("worker_unavailable", "", ids),
              st.lists(st.integers(0, 3), min_size=1, max_size=3, unique=True)),
    st.builds(lambda ws: DisturbanceInstruction("new_worker_available", "", ws),
              st.lists(st.builds(_new_worker, st.integers(10, 99), cell,
                                 st.tuples(st.integers(0, 4), st.integers(1, 3))),
                       min_size=1, max_size=2, unique_by=lambda w: w.id)),
    st.builds(lambda f: DisturbanceInstruction("bad_weather", "", f), st.sampled_from([0.5, 0.25, 0.75, 1.0])),
    st.just(DisturbanceInstruction("continue_optimize", "")),
)


def same(a, b):
    return a.type == b.type and a.value == b.value


@given(instructions)
def test_render_parse_round_trip(instr):
    back = parse_disturbance(render(instr), G)
    assert same(back, instr)
    assert back.description == render(instr)


@given(instructions)
def test_json_round_trip(instr):
    back = DisturbanceInstruction.from_json_obj(instr.to_json_obj())
    assert same(back, instr)


@given(st.text(max_size=80))
@settings(max_examples=500)
def test_parser_fuzz_only_raises_parse_errors(text):
    try:
        instr = parse_disturbance(text, G)
    except DisturbanceParseError as e:
        assert e.text == text
    else:
        assert instr.type in TYPES


@pytest.mark.parametrize("text,kind,value", [
    ("the budget was raised by 15 units", "budget_change", 15.0),
    ("Budget cut by 4", "budget_change", -4.0),
    ("Road closure at (1, 2) during slots 2-5", "area_blocked", ((1, 2, 2, 5),)),
    ("Area (0,0) and (3,4) blocked", "area_blocked", ((0, 0), (3, 4))),
    ("Worker 3 should also visit (2,2)", "mid_path_visit", ((3, 2, 2),)),
    ("Workers 1 and 2 are unavailable today", "worker_unavailable", (1, 2)),
    ("Heavy rain: speed factor 0.25", "bad_weather", 0.25),
    ("Storm rolling in", "bad_weather", 0.5),
    ("Cells (1,1), (1,2) are important now", "priority_area", (((1, 1), (1, 2)), 1.0)),
    ("please keep optimizing", "continue_optimize", None),
])
def test_free_text_variants(text, kind, value):
    got = parse_disturbance(text, G)
    assert (got.type, got.value) == (kind, value)


@pytest.mark.parametrize("text", ["", "hello there", "Budget changed by 5", "Area blocked somewhere",
                                  "Worker 1 must visit somewhere", "Area blocked of (9, 9)"])
def test_parser_refuses_to_guess(text):
    with pytest.raises(DisturbanceParseError):
        parse_disturbance(text, G)


def test_parser_checks_worker_ids(tiny):
    with pytest.raises(DisturbanceParseError, match="unknown worker 9"):
        parse_disturbance("Worker 9 drops out", tiny.grid, tiny.workers)


def test_bad_payloads():
    with pytest.raises(DisturbanceError):
        DisturbanceInstruction("bad_weather", "", 0.0)
    with pytest.raises(DisturbanceError):
        DisturbanceInstruction("area_blocked", "", [])
    with pytest.raises(DisturbanceError):
        DisturbanceInstruction("earthquake", "")
    with pytest.raises(DisturbanceError):
        DisturbanceInstruction("mid_path_visit", "", [(1, 2)])


def test_apply_does_not_mutate(tiny):
    before = tiny.to_dict()
    d0 = DisturbedInstance.of(tiny)
    d1 = apply_disturbance(d0, DisturbanceInstruction("budget_change", "", 5))
    d2 = apply_disturbance(d1, DisturbanceInstruction("worker_unavailable", "", [1]))
    assert tiny.to_dict() == before
    assert d0.effective_budget == 14 and d1.effective_budget == 19 and not d1.removed
    assert set(d2.pool) == {0, 2, 3}


def test_apply_effects(tiny):
    d = apply_disturbance(tiny, DisturbanceInstruction("budget_change", "", -100))
    assert d.effective_budget == 0
    d = apply_disturbance(tiny, DisturbanceInstruction("bad_weather", "", 0.5))
    assert d.pool[0].speed == 0.5 and d.pool[2].speed == 0.25
    d = apply_disturbance(tiny, DisturbanceInstruction("area_blocked", "", [(0, 0, 0, 1)]))
    assert d.blocked == {(0, 0, 0), (0, 0, 1)}
    assert any("worker 0" in n for n in d.notes)
    new = Worker(7, (1, 1), (1, 1), (0, 2))
    d = apply_disturbance(tiny, DisturbanceInstruction("new_worker_available", "", [new]))
    assert d.pool[7] == new
    with pytest.raises(DisturbanceError):
        apply_disturbance(d, DisturbanceInstruction("new_worker_available", "", [new]))
    with pytest.raises(DisturbanceError):
        apply_disturbance(tiny, DisturbanceInstruction("worker_unavailable", "", [42]))
    with pytest.raises(DisturbanceError):
        apply_disturbance(tiny, DisturbanceInstruction("mid_path_visit", "", [(42, 0, 0)]))
    with pytest.raises(DisturbanceError):
        apply_disturbance(tiny, DisturbanceInstruction("priority_area", "", ([(8, 8)], 1)))


def _base_instance():
    ws = tuple(Worker(i, (i, 0), (i, 4), (0, 7)) for i in range(4))
    return Instance(G, ws, 30.0)


# budget decreases can saturate at zero, which does not commute with increases
commuting = instructions.filter(lambda i: not (i.type == "budget_change" and i.value < 0))


@given(st.lists(commuting, min_size=2, max_size=4), st.randoms(use_true_random=False))
def test_order_independence(instrs, rnd):
    inst = _base_instance()
    ids = [w.id for i in instrs if i.type == "new_worker_available" for w in i.value]
    assume(len(ids) == len(set(ids)))
    shuffled = list(instrs)
    rnd.shuffle(shuffled)
    try:
        a = b = inst
        for i in instrs:
            a = apply_disturbance(a, i)
        for i in shuffled:
            b = apply_disturbance(b, i)
    except DisturbanceError:
        assume(False)  # e.g. a visit for a worker that another instruction removes
    assert a.constraints() == b.constraints()
    assert a.pool == b.pool


@given(st.lists(commuting, min_size=1, max_size=4))
def test_handling_of_a_prefix_is_unchanged(instrs):
    inst = _base_instance()
    sol = Solution({w.id: realize_path(w, [], G) for w in inst.workers[:3]})
    d = DisturbedInstance.of(inst)
    seen = []
    for i in instrs:
        try:
            d = apply_disturbance(d, i)
        except DisturbanceError:
            continue
        rep = check_handling(sol, d)
        assert rep.entries[:len(seen)] == tuple(seen)
        seen = list(rep.entries)


def test_handling_entries(tiny):
    p0 = realize_path(tiny.worker(0), [], tiny.grid)
    sol = Solution({0: p0})
    d = apply_disturbance(tiny, DisturbanceInstruction("area_blocked", "", [(1, 0)]))
    assert not check_handling(sol, d).all_satisfied
    assert "blocked-cell" in validate_disturbed(sol, d).kinds()
    d = apply_disturbance(tiny, DisturbanceInstruction("worker_unavailable", "", [0]))
    assert check_handling(sol, d).unsatisfied[0].type == "worker_unavailable"
    d = apply_disturbance(tiny, DisturbanceInstruction("mid_path_visit", "", [(0, 1, 0)]))
    assert check_handling(sol, d).all_satisfied
    d = apply_disturbance(tiny, DisturbanceInstruction("bad_weather", "", 0.5))
    assert not check_handling(sol, d).all_satisfied  # moves on consecutive slots
    slow = ((0, 0, 0), (1, 0, 1), (1, 0, 2), (2, 0, 3))
    assert check_handling(Solution({0: slow}), d).all_satisfied
    pr = DisturbanceInstruction("priority_area", "", ([(1, 0)], 1.0))
    d = apply_disturbance(tiny, pr).with_baseline(Solution({0: slow}))
    assert priority_count(Solution({0: slow}), [(1, 0)]) == 2
    assert not check_handling(sol, d).all_satisfied
    assert check_handling(Solution({0: slow}), d).all_satisfied
    d = apply_disturbance(tiny, DisturbanceInstruction("budget_change", "", -10))
    assert check_handling(sol, d).all_satisfied
    assert not check_handling(Solution({0: p0, 3: realize_path(tiny.worker(3), [], tiny.grid)}), d).all_satisfied
