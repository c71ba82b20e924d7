"""Chat-completion client, structured-output parsing and deterministic fallback.

The wire format is the common ``{"model", "messages", "temperature"}`` JSON
body answered with ``{"choices": [{"message": {"content": ...}}], "usage": ...}``.
A scripted mock transport makes every test hermetic.
"""
from __future__ import annotations

import json
import logging
import math
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

from .grid import GridSpec, Solution

log = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant", "tool")
OPERATION_TYPES = ("add_worker", "remove_worker", "modify_path", "other")
MAX_THINK_WORDS = 200


class GatewayError(Exception):
    pass


class TransportError(GatewayError):
    pass


class GatewayTimeout(TransportError):
    pass


class StructuredParseError(GatewayError):
    def __init__(self, message: str, span: str = "", field_errors: Sequence[str] = ()):
        super().__init__(message)
        self.span = span[:500]
        self.field_errors = tuple(field_errors)


@dataclass(frozen=True)
class ChatRequest:
    system: str
    messages: tuple[tuple[str, str], ...] = ()
    tools: tuple[Mapping, ...] = ()
    temperature: float = 0.1
    max_tokens: int = 1024

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple((str(r), str(t)) for r, t in self.messages))
        for role, _ in self.messages:
            if role not in ROLES:
                raise ValueError(f"unknown role {role!r}")
        if not math.isfinite(self.temperature) or self.temperature < 0:
            raise ValueError("temperature must be finite and non-negative")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    def text(self) -> str:
        return "\n".join([self.system, *(t for _, t in self.messages)])

    def body(self, model: str) -> dict:
        msgs = [{"role": "system", "content": self.system}]
        msgs += [{"role": r, "content": t} for r, t in self.messages]
        d = {"model": model, "messages": msgs, "temperature": self.temperature, "max_tokens": self.max_tokens}
        if self.tools:
            d["tools"] = [dict(t) for t in self.tools]
        return d


@dataclass
class GatewayConfig:
    endpoint: str = ""
    model: str = ""
    api_key_env: str = "CROWDSENSE_API_KEY"
    timeout: float = 60.0
    max_retries: int = 2
    count_tokens: bool = True
    temperature: float = 0.1
    max_path_steps: int = 400  # prompt truncation for large solutions
    rate_per_sec: float | None = None
    burst: int = 4

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env)


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    @property
    def total(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def __add__(self, other: "Usage") -> "Usage":
        return Usage(self.prompt_tokens + other.prompt_tokens, self.completion_tokens + other.completion_tokens)


@dataclass(frozen=True)
class Completion:
    text: str
    usage: Usage
    attempts: int = 1


def estimate_tokens(text: str) -> int:
    """Rough count (about four characters per token) for servers that report no usage."""
    return (len(text) + 3) // 4


class TokenBucket:
    def __init__(self, rate: float, capacity: int, clock=time.monotonic, sleep=time.sleep):
        self.rate, self.capacity = rate, capacity
        self.tokens = float(capacity)
        self.clock, self.sleep = clock, sleep
        self.last = clock()
        self.lock = threading.Lock()

    def acquire(self) -> None:
        with self.lock:
            while True:
                now = self.clock()
                self.tokens = min(self.capacity, self.tokens + (now - self.last) * self.rate)
                self.last = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                self.sleep((1 - self.tokens) / self.rate)


# ---------------------------------------------------------------------------
# transports

class HttpTransport:
    def __init__(self, config: GatewayConfig):
        self.config = config

    def __call__(self, request: ChatRequest) -> tuple[str, Usage | None]:
        import httpx

        cfg = self.config
        if not cfg.endpoint:
            raise TransportError("no endpoint configured")
        headers = {"Content-Type": "application/json"}
        key = cfg.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            r = httpx.post(cfg.endpoint, json=request.body(cfg.model), headers=headers, timeout=cfg.timeout)
        except httpx.TimeoutException as e:
            raise GatewayTimeout(f"request timed out after {cfg.timeout}s") from e
        except httpx.HTTPError as e:
            raise TransportError(f"transport failure: {type(e).__name__}") from e
        if r.status_code >= 400:
            raise TransportError(f"HTTP {r.status_code}")
        try:
            d = r.json()
            text = d["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise TransportError("malformed completion body") from e
        u = d.get("usage") or {}
        usage = None
        if "prompt_tokens" in u:
            usage = Usage(int(u.get("prompt_tokens", 0)), int(u.get("completion_tokens", 0)))
        return str(text), usage


class MockTransport:
    """Scripted replies: ordered ``{match, reply}`` entries, each used once.

    The first unused entry whose ``match`` substring occurs in the request is
    consumed; the final remaining entry is never consumed, so a one-entry
    script answers every request.  A reply of ``"<timeout>"`` or ``"<error>"``
    simulates a transport failure.
    """

    def __init__(self, script: Sequence[Mapping[str, str]]):
        self.entries = [{"match": str(e.get("match", "")), "reply": str(e["reply"])} for e in script]
        self.calls = 0
        self.lock = threading.Lock()

    @classmethod
    def load(cls, path) -> "MockTransport":
        with open(path) as f:
            return cls(json.load(f))

    def __call__(self, request: ChatRequest) -> tuple[str, Usage | None]:
        text = request.text()
        with self.lock:
            self.calls += 1
            for i, e in enumerate(self.entries):
                if e["match"] in text:
                    if len(self.entries) > 1:
                        del self.entries[i]
                    reply = e["reply"]
                    break
            else:
                raise TransportError("mock script has no matching entry")
        if reply == "<timeout>":
            raise GatewayTimeout("mock timeout")
        if reply == "<error>":
            raise TransportError("mock transport failure")
        return reply, None


class Gateway:
    def __init__(self, config: GatewayConfig | None = None, transport: Callable | None = None):
        self.config = config or GatewayConfig()
        self.transport = transport or HttpTransport(self.config)
        self.usage = Usage()
        self._bucket = TokenBucket(self.config.rate_per_sec, self.config.burst) if self.config.rate_per_sec else None
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> Completion:
        """One completion, retrying transport failures up to ``max_retries`` times."""
        last: TransportError | None = None
        for attempt in range(1, self.config.max_retries + 2):
            if self._bucket is not None:
                self._bucket.acquire()
            try:
                text, usage = self.transport(request)
            except TransportError as e:
                last = e
                log.warning("completion attempt %d failed: %s", attempt, type(e).__name__)
                continue
            if usage is None:
                usage = Usage(estimate_tokens(request.text()), estimate_tokens(text)) \
                    if self.config.count_tokens else Usage()
            with self._lock:
                self.usage = self.usage + usage
            return Completion(text, usage, attempt)
        assert last is not None
        raise type(last)(f"{last} (after {self.config.max_retries + 1} attempts)")


def complete(request: ChatRequest, config: GatewayConfig, transport: Callable | None = None) -> Completion:
    return Gateway(config, transport).complete(request)


# ---------------------------------------------------------------------------
# structured output

@dataclass(frozen=True)
class SolverOutput:
    think_process: str
    refined_solution: Solution


@dataclass(frozen=True)
class EvalOutput:
    eval_summary: str
    advice: str


@dataclass(frozen=True)
class MemoryOutput:
    operation_type: str
    operation_details: str


def _objects(text: str):
    dec = json.JSONDecoder()
    i = text.find("{")
    while i != -1:
        try:
            obj, end = dec.raw_decode(text, i)
        except (ValueError, RecursionError):
            obj, end = None, i + 1
        if isinstance(obj, dict):
            yield obj, text[i:end]
            i = text.find("{", end)
        else:
            i = text.find("{", i + 1)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_solver(obj: dict, grid: GridSpec | None) -> tuple[Any, list[str]]:
    errs = []
    tp = obj.get("think_process")
    if not isinstance(tp, str):
        errs.append("think_process: expected text")
    elif len(tp.split()) > MAX_THINK_WORDS:
        errs.append(f"think_process: {len(tp.split())} words exceeds {MAX_THINK_WORDS}")
    sol = obj.get("refined_solution")
    if not isinstance(sol, dict):
        errs.append("refined_solution: expected an object mapping worker ids to step lists")
        return None, errs
    paths = {}
    for k, steps in sol.items():
        try:
            wid = int(k)
        except (TypeError, ValueError):
            errs.append(f"refined_solution.{k}: worker id is not an integer")
            continue
        if not isinstance(steps, list) or not steps:
            errs.append(f"refined_solution.{k}: expected a non-empty list of [x, y, t]")
            continue
        path = []
        for j, st in enumerate(steps):
            if not (isinstance(st, list) and len(st) == 3 and all(_is_int(v) for v in st)):
                errs.append(f"refined_solution.{k}[{j}]: expected [x, y, t] integers")
                break
            if grid is not None and not grid.contains(*st):
                errs.append(f"refined_solution.{k}[{j}]: step {tuple(st)} lies outside the grid")
                break
            path.append(tuple(st))
        else:
            paths[wid] = tuple(path)
    if errs:
        return None, errs
    return SolverOutput(tp, Solution(paths)), []


def _check_eval(obj: dict, grid) -> tuple[Any, list[str]]:
    errs = [f"{k}: expected text" for k in ("eval_summary", "advice") if not isinstance(obj.get(k), str)]
    return (None if errs else EvalOutput(obj["eval_summary"], obj["advice"])), errs


def _check_memory(obj: dict, grid) -> tuple[Any, list[str]]:
    errs = []
    if obj.get("operation_type") not in OPERATION_TYPES:
        errs.append(f"operation_type: expected one of {', '.join(OPERATION_TYPES)}")
    if not isinstance(obj.get("operation_details"), str):
        errs.append("operation_details: expected text")
    return (None if errs else MemoryOutput(obj["operation_type"], obj["operation_details"])), errs


CHECKS = {"solver": _check_solver, "eval": _check_eval, "memory": _check_memory}


def parse_structured(text: str, expected: str, grid: GridSpec | None = None):
    """First JSON object in ``text`` that fits the ``expected`` schema.

    Raises :class:`StructuredParseError`; never anything else.
    """
    if expected not in CHECKS:
        raise ValueError(f"unknown output kind {expected!r}")
    if not isinstance(text, str):
        raise StructuredParseError("reply is not text")
    first = None
    try:
        for obj, span in _objects(text):
            try:
                got, errs = CHECKS[expected](obj, grid)
            except (TypeError, ValueError, AttributeError) as e:  # defensive: odd payloads
                got, errs = None, [f"schema check failed: {type(e).__name__}"]
            if got is not None:
                return got
            if first is None:
                first = (span, errs)
    except RecursionError:
        raise StructuredParseError("reply nests too deeply", text) from None
    if first is None:
        raise StructuredParseError("no JSON object found in reply", text)
    raise StructuredParseError(f"reply does not match the {expected} schema", first[0], first[1])


# ---------------------------------------------------------------------------
# fallback

@dataclass(frozen=True)
class FallbackResult:
    value: Any
    tag: str  # llm | fallback
    attempts: int
    tokens: int
    errors: tuple[str, ...] = ()


def with_fallback(call: Callable[[], tuple[Any, int]], fallback: Callable[[], Any], max_retries: int = 2
                  ) -> FallbackResult:
    """Try ``call`` (returning ``(value, tokens)``) up to ``max_retries + 1`` times, then ``fallback``."""
    errors = []
    tokens = 0
    for attempt in range(1, max_retries + 2):
        try:
            value, used = call()
            tokens += used
            return FallbackResult(value, "llm", attempt, tokens, tuple(errors))
        except GatewayError as e:
            errors.append(f"{type(e).__name__}: {e}"[:200])
    return FallbackResult(fallback(), "fallback", max_retries + 1, tokens, tuple(errors))
