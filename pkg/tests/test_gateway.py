import json
import logging

import httpx
import pytest
from hypothesis import given, strategies as st

from crowdsense.agents.llm import _solution_text, llm_policies
from crowdsense.agents.loop import run_refinement
from crowdsense.disturbances import DisturbanceInstruction
from crowdsense.gateway import (
    ChatRequest, EvalOutput, Gateway, GatewayConfig, GatewayTimeout, HttpTransport, MemoryOutput, MockTransport,
    SolverOutput, StructuredParseError, TokenBucket, TransportError, Usage, estimate_tokens, parse_structured,
    with_fallback,
)
from crowdsense.grid import GridSpec, Solution
from crowdsense.planners import PlannerConfig, plan

G = GridSpec(4, 4, 4)
REQ = ChatRequest("sys", (("user", "hello"),))


def test_parse_solver_reply_with_surrounding_prose():
    text = 'Sure! {"think_process": "move 1 right", "refined_solution": {"1": [[0,0,0],[1,0,1]]}} done'
    out = parse_structured(text, "solver", G)
    assert isinstance(out, SolverOutput)
    assert out.refined_solution == Solution({1: ((0, 0, 0), (1, 0, 1))})


def test_parse_skips_non_matching_objects():
    text = '{"note": 1} then {"eval_summary": "fine", "advice": "add worker 3"}'
    assert parse_structured(text, "eval") == EvalOutput("fine", "add worker 3")
    assert parse_structured('{"operation_type": "other", "operation_details": ""}', "memory") == \
        MemoryOutput("other", "")


@pytest.mark.parametrize("text,fragment", [
    ("no json here", "no JSON object"),
    ('{"think_process": "x", "refined_solution": {"1": [[0,0,9]]}}', "outside the grid"),
    ('{"think_process": "x", "refined_solution": {"1": [[0,0,true]]}}', "[x, y, t] integers"),
    ('{"think_process": "x", "refined_solution": {"a": [[0,0,0]]}}', "not an integer"),
    ('{"think_process": "x", "refined_solution": {"1": []}}', "non-empty"),
    ('{"think_process": ' + json.dumps("w " * 201) + ', "refined_solution": {}}', "exceeds 200"),
    ('{"operation_type": "fly", "operation_details": "x"}', "operation_type"),
])
def test_parse_errors_name_the_field(text, fragment):
    kind = "memory" if "operation" in text else "solver"
    with pytest.raises(StructuredParseError) as ei:
        parse_structured(text, kind, G)
    assert fragment in str(ei.value) + " ".join(ei.value.field_errors)


def test_parse_rejects_unknown_kind():
    with pytest.raises(ValueError):
        parse_structured("{}", "poem")


json_ish = st.recursive(st.none() | st.booleans() | st.integers() | st.text(max_size=5),
                        lambda c: st.lists(c, max_size=3) | st.dictionaries(
                            st.sampled_from(["think_process", "refined_solution", "1", "x", "advice",
                                             "eval_summary", "operation_type", "operation_details"]), c, max_size=3),
                        max_leaves=12)


@given(st.one_of(st.text(max_size=200), json_ish.map(json.dumps)), st.sampled_from(["solver", "eval", "memory"]))
def test_parse_only_raises_structured_errors(text, kind):
    try:
        parse_structured(text, kind, G)
    except StructuredParseError:
        pass


def test_mock_transport_script_and_failures():
    m = MockTransport([{"match": "hello", "reply": "<timeout>"}, {"match": "", "reply": "ok"}])
    gw = Gateway(GatewayConfig(max_retries=1), m)
    c = gw.complete(REQ)
    assert c.text == "ok" and c.attempts == 2 and m.calls == 2
    assert gw.usage.total == estimate_tokens(REQ.text()) + estimate_tokens("ok")
    gw2 = Gateway(GatewayConfig(max_retries=2), MockTransport([{"reply": "<error>"}]))
    with pytest.raises(TransportError, match="after 3 attempts"):
        gw2.complete(REQ)
    with pytest.raises(GatewayTimeout):
        Gateway(GatewayConfig(max_retries=0), MockTransport([{"reply": "<timeout>"}])).complete(REQ)
    with pytest.raises(TransportError, match="no matching"):
        Gateway(GatewayConfig(max_retries=0), MockTransport([{"match": "zzz", "reply": "a"}])).complete(REQ)


def test_request_validation_and_body():
    with pytest.raises(ValueError):
        ChatRequest("s", (("robot", "x"),))
    with pytest.raises(ValueError):
        ChatRequest("s", temperature=float("nan"))
    b = REQ.body("m")
    assert b["messages"][0] == {"role": "system", "content": "sys"} and b["model"] == "m"
    with pytest.raises(ValueError):
        GatewayConfig(max_retries=-1)


def test_with_fallback_counts_attempts():
    calls = []

    def bad():
        calls.append(1)
        raise StructuredParseError("nope")

    r = with_fallback(bad, lambda: "det", max_retries=2)
    assert (r.value, r.tag, r.attempts, len(calls), len(r.errors)) == ("det", "fallback", 3, 3, 3)
    r = with_fallback(lambda: ("v", 7), lambda: "det")
    assert (r.value, r.tag, r.tokens) == ("v", "llm", 7)


def test_token_bucket_waits():
    t = [0.0]
    slept = []

    def sleep(s):
        slept.append(s)
        t[0] += s

    b = TokenBucket(2.0, 1, clock=lambda: t[0], sleep=sleep)
    b.acquire()
    b.acquire()
    assert slept == [pytest.approx(0.5)]


def _fake_post(status=200, body=None, exc=None):
    def post(url, json=None, headers=None, timeout=None):
        post.headers = headers
        if exc:
            raise exc
        return httpx.Response(status, json=body, request=httpx.Request("POST", url))
    return post


def test_http_transport(monkeypatch, caplog):
    monkeypatch.setenv("CROWDSENSE_API_KEY", "sk-secret-123")
    cfg = GatewayConfig(endpoint="http://llm.invalid/v1/chat", model="m", max_retries=0)
    post = _fake_post(body={"choices": [{"message": {"content": "hi"}}],
                            "usage": {"prompt_tokens": 5, "completion_tokens": 2}})
    monkeypatch.setattr(httpx, "post", post)
    text, usage = HttpTransport(cfg)(REQ)
    assert text == "hi" and usage == Usage(5, 2)
    assert post.headers["Authorization"] == "Bearer sk-secret-123"
    caplog.set_level(logging.DEBUG)
    for fake in (_fake_post(status=401, body={"error": "bad key sk-secret-123"}),
                 _fake_post(exc=httpx.ConnectError("sk-secret-123 refused")),
                 _fake_post(body={"unexpected": True})):
        monkeypatch.setattr(httpx, "post", fake)
        with pytest.raises(TransportError) as ei:
            Gateway(cfg).complete(REQ)
        assert "sk-secret-123" not in str(ei.value)
    monkeypatch.setattr(httpx, "post", _fake_post(exc=httpx.ReadTimeout("slow")))
    with pytest.raises(GatewayTimeout):
        Gateway(cfg).complete(REQ)
    assert "sk-secret-123" not in caplog.text
    with pytest.raises(TransportError, match="no endpoint"):
        HttpTransport(GatewayConfig())(REQ)


def test_solution_text_truncates():
    s = Solution({1: tuple((0, 0, t) for t in range(5)), 2: tuple((1, 1, t) for t in range(5))})
    text = _solution_text(s, 7)
    assert "7 of 10 steps" in text
    assert json.loads(text.splitlines()[0]) == {"1": [[0, 0, t] for t in range(5)], "2": [[1, 1, 0], [1, 1, 1]]}


def test_llm_policies_use_valid_model_output(small0):
    base = plan(small0, PlannerConfig("TVPG"))
    wid = sorted(base.solution.assignments)[0]
    reply = json.dumps({"think_process": "drop one worker",
                        "refined_solution": {str(k): [list(s) for s in p]
                                             for k, p in base.solution.assignments.items() if k != wid}})
    script = [{"match": "route plan together", "reply": '{"operation_type": "remove_worker", '
                                                        '"operation_details": "dropped a worker"}'},
              {"match": "review a proposed", "reply": '{"eval_summary": "ok", "advice": "none"}'},
              {"match": "", "reply": reply}]
    # entries are consumed, so give each role enough copies
    gw = Gateway(GatewayConfig(max_retries=0), MockTransport(script[:2] * 3 + script[2:] * 1))
    pol = llm_policies(gw)
    tr = run_refinement(small0, base, DisturbanceInstruction("worker_unavailable", "", [wid]), pol,
                        max_iterations=1)
    rec = tr.iterations[0]
    assert rec.tags["solver"] == "llm" and rec.edits[0].kind == "remove_worker"
    assert tr.success and tr.tokens > 0
