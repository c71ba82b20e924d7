"""Atomic solution edits.

Every edit carries the full new path of the worker it touches, so a list of
edits replays exactly from one solution to the next.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from ..grid import Path, Solution

EDIT_KINDS = ("add_worker", "remove_worker", "swap_workers", "reroute_segment", "insert_waypoint",
              "remove_waypoint")
# what each edit kind counts as for the memory store
META_KIND = {"add_worker": "add_worker", "remove_worker": "remove_worker", "swap_workers": "add_worker",
             "reroute_segment": "modify_path", "insert_waypoint": "modify_path", "remove_waypoint": "modify_path"}


class EditError(ValueError):
    pass


@dataclass(frozen=True)
class Edit:
    kind: str
    target: tuple[int, ...]
    payload: Mapping[str, Any] = field(default_factory=dict)
    reason: str = ""

    def __post_init__(self):
        if self.kind not in EDIT_KINDS:
            raise EditError(f"unknown edit kind {self.kind!r}")
        object.__setattr__(self, "target", tuple(int(t) for t in self.target))
        want = 2 if self.kind == "swap_workers" else 1
        if len(self.target) != want:
            raise EditError(f"{self.kind} needs {want} target worker(s)")
        p = dict(self.payload)
        if self.kind != "remove_worker":
            if "path" not in p:
                raise EditError(f"{self.kind} needs a path payload")
            p["path"] = tuple(tuple(int(a) for a in s) for s in p["path"])
        if self.kind in ("insert_waypoint", "remove_waypoint"):
            if "cell" not in p:
                raise EditError(f"{self.kind} needs a cell payload")
            p["cell"] = tuple(int(a) for a in p["cell"])
        object.__setattr__(self, "payload", p)

    @property
    def path(self) -> Path | None:
        return self.payload.get("path")

    @property
    def workers(self) -> tuple[int, ...]:
        return self.target

    def apply(self, sol: Solution) -> Solution:
        if self.kind == "remove_worker":
            if self.target[0] not in sol:
                raise EditError(f"worker {self.target[0]} is not assigned")
            return sol.without(self.target[0])
        if self.kind == "swap_workers":
            out, into = self.target
            if out not in sol:
                raise EditError(f"worker {out} is not assigned")
            return sol.without(out).with_path(into, self.path)
        if self.kind == "add_worker" and self.target[0] in sol:
            raise EditError(f"worker {self.target[0]} is already assigned")
        if self.kind != "add_worker" and self.target[0] not in sol:
            raise EditError(f"worker {self.target[0]} is not assigned")
        return sol.with_path(self.target[0], self.path)

    def describe(self) -> str:
        k, t = self.kind, self.target
        if k == "add_worker":
            s = f"add worker {t[0]} ({len(self.path)} steps)"
        elif k == "remove_worker":
            s = f"remove worker {t[0]}"
        elif k == "swap_workers":
            s = f"replace worker {t[0]} with worker {t[1]} ({len(self.path)} steps)"
        elif k == "insert_waypoint":
            s = f"route worker {t[0]} through {self.payload['cell']}"
        elif k == "remove_waypoint":
            s = f"route worker {t[0]} around {self.payload['cell']}"
        else:
            s = f"reroute worker {t[0]} ({len(self.path)} steps)"
        return f"{s}: {self.reason}" if self.reason else s

    def to_json_obj(self) -> dict:
        p = {}
        if "path" in self.payload:
            p["path"] = [list(s) for s in self.payload["path"]]
        if "cell" in self.payload:
            p["cell"] = list(self.payload["cell"])
        return {"kind": self.kind, "target": list(self.target), "payload": p, "reason": self.reason}

    @classmethod
    def from_json_obj(cls, d: Mapping) -> "Edit":
        return cls(d["kind"], tuple(d["target"]), d.get("payload", {}), d.get("reason", ""))


def replay(sol: Solution, edits) -> Solution:
    for e in edits:
        sol = e.apply(sol)
    return sol


def diff_edits(s0: Solution, s1: Solution, reason: str = "") -> list[Edit]:
    """Edits turning ``s0`` into ``s1`` (removals, then reroutes, then additions)."""
    a, b = s0.assignments, s1.assignments
    out = [Edit("remove_worker", (w,), reason=reason) for w in a if w not in b]
    out += [Edit("reroute_segment", (w,), {"path": b[w]}, reason) for w in a if w in b and a[w] != b[w]]
    out += [Edit("add_worker", (w,), {"path": b[w]}, reason) for w in b if w not in a]
    return out
