"""Independent reference implementations used only by the tests.

Nothing here imports the objective or path code under test.
"""
from __future__ import annotations

import itertools
import math
import random

import numpy as np


def objective_oracle(steps, W, H, T, alpha=0.5, levels=None, time_h=None):
    """J computed from a dense count tensor with block sums by padding and reshaping."""
    steps = list(steps)
    if not steps:
        return float("-inf")
    if levels is None:
        levels = int(math.floor(math.log2(min(W, H))))
    if time_h is None:
        time_h = W == H == T
    c = np.zeros((W, H, T))
    for x, y, t in steps:
        c[x, y, t] += 1
    q = c.sum()
    hs = []
    for lv in range(levels + 1):
        b = 2 ** lv
        bt = b if time_h else 1
        pw, ph, pt = -W % b, -H % b, -T % bt
        a = np.pad(c, ((0, pw), (0, ph), (0, pt)))
        a = a.reshape(a.shape[0] // b, b, a.shape[1] // b, b, a.shape[2] // bt, bt).sum(axis=(1, 3, 5))
        p = a[a > 0] / q
        hs.append(float(-(p * np.log2(p)).sum()))
    return alpha * (sum(hs) / len(hs)) + (1 - alpha) * math.log2(q)


def feasible_paths(origin, dest, t0, t1, W, H, speed=1.0, blocked=frozenset()):
    """All paths from (origin, t0) that end at ``dest`` at some slot <= t1."""
    period = max(1, math.ceil(1 / speed - 1e-9))
    out = []

    def rec(path, last_move):
        x, y, t = path[-1]
        if (x, y) == tuple(dest):
            out.append(tuple(path))
        if t == t1:
            return
        opts = [(x, y)]
        if last_move is None or t + 1 - last_move >= period:
            opts += [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]
        for nx, ny in opts:
            if 0 <= nx < W and 0 <= ny < H and (nx, ny, t + 1) not in blocked:
                moved = (nx, ny) != (x, y)
                rec(path + [(nx, ny, t + 1)], (t + 1) if moved else last_move)

    if tuple(origin) + (t0,) not in blocked:
        rec([(origin[0], origin[1], t0)], None)
    return out


def brute_force_best(workers, W, H, T, budget, alpha=0.5):
    """Best J over every budget-feasible combination of per-worker paths (None = not recruited)."""
    options = []
    for w in workers:
        ps = [p for p in feasible_paths(w["origin"], w["destination"], w["t0"], w["t1"], W, H, w.get("speed", 1.0))
              if len(p) * w.get("rate", 1.0) <= budget + 1e-9]
        options.append([None] + ps)
    best = float("-inf")
    for combo in itertools.product(*options):
        cost = sum(len(p) * w.get("rate", 1.0) for p, w in zip(combo, workers) if p)
        if cost > budget + 1e-9:
            continue
        steps = [s for p in combo if p for s in p]
        best = max(best, objective_oracle(steps, W, H, T, alpha))
    return best


def micro_instance(seed, W=3, H=3, T=4, max_workers=2):
    rng = random.Random(seed)
    ws = []
    for i in range(rng.randint(1, max_workers)):
        t0 = rng.randint(0, T - 2)
        t1 = rng.randint(t0 + 1, T - 1)
        o = (rng.randrange(W), rng.randrange(H))
        for _ in range(20):
            d = (rng.randrange(W), rng.randrange(H))
            if abs(d[0] - o[0]) + abs(d[1] - o[1]) <= t1 - t0:
                break
        else:
            d = o
        ws.append({"id": i, "origin": o, "destination": d, "t0": t0, "t1": t1})
    return ws, float(rng.randint(2, 8))
