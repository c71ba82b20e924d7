"""Dynamic programming over a worker's time-expanded location graph.

Nodes are ``(x, y, t)`` for ``t`` inside the worker's window; every node has
five out-edges (four moves and a stay).  The DP state additionally tracks the
move cooldown imposed by reduced speed and a bitmask of required cells already
visited, so one pass yields the best path to the destination for every
possible arrival slot.
"""
from __future__ import annotations

import numpy as np

from .grid import Cell, GridSpec, Path, Worker, manhattan, min_transitions, move_period

NEG = -np.inf
# (dx, dy); action 0 is stay
MOVES = ((1, 0), (-1, 0), (0, 1), (0, -1))


def _shift(a: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """out[..., x, y] = a[..., x - dx, y - dy], padding with -inf."""
    out = np.full_like(a, NEG)
    W, H = a.shape[-2:]
    xs_dst = slice(max(dx, 0), W + min(dx, 0))
    xs_src = slice(max(-dx, 0), W + min(-dx, 0))
    ys_dst = slice(max(dy, 0), H + min(dy, 0))
    ys_src = slice(max(-dy, 0), H + min(-dy, 0))
    out[..., xs_dst, ys_dst] = a[..., xs_src, ys_src]
    return out


def blocked_mask(blocked, grid: GridSpec) -> np.ndarray:
    m = np.zeros((grid.num_slots, grid.width, grid.height), dtype=bool)
    for x, y, t in blocked:
        if grid.contains(x, y, t):
            m[t, x, y] = True
    return m


def dp_paths(worker: Worker, grid: GridSpec, rewards: np.ndarray, blocked: np.ndarray | None = None,
             required: tuple[Cell, ...] = (), max_cost: float | None = None) -> dict[int, tuple[Path, float]]:
    """Best path (by summed node reward) for each feasible arrival slot.

    ``rewards`` and ``blocked`` are indexed ``[t, x, y]``.  Every cell in
    ``required`` must be visited at least once.  Returns ``{arrival_slot:
    (path, surrogate_value)}``; empty when the destination is unreachable.
    """
    t0, t1 = worker.t_start, min(worker.t_end, grid.num_slots - 1)
    if max_cost is not None:
        if worker.reward_per_step > 0:
            t1 = min(t1, t0 + int(np.floor(max_cost / worker.reward_per_step + 1e-9)) - 1)
    req = list(dict.fromkeys((int(c[0]), int(c[1])) for c in required))
    dmin = min_transitions(manhattan(worker.origin, worker.destination), worker.speed)
    if t1 < t0 + dmin:
        return {}
    W, H = grid.width, grid.height
    K = move_period(worker.speed)
    R = len(req)
    M = 1 << R
    full = M - 1
    bit = np.zeros((W, H), dtype=np.int64)
    for j, (x, y) in enumerate(req):
        if not grid.contains(x, y):
            return {}
        bit[x, y] = 1 << j
    if blocked is None:
        blocked = np.zeros((grid.num_slots, W, H), dtype=bool)
    ox, oy = worker.origin
    dx_, dy_ = worker.destination
    if blocked[t0, ox, oy]:
        return {}

    V = np.full((M, K, W, H), NEG)
    V[int(bit[ox, oy]), 0, ox, oy] = rewards[t0, ox, oy]
    parents: list[np.ndarray] = []
    results: dict[int, tuple[Path, float]] = {}

    def backtrack(t_end: int, m: int, c: int) -> Path:
        x, y = dx_, dy_
        out = [(x, y, t_end)]
        for t in range(t_end, t0, -1):
            code = int(parents[t - t0 - 1][m, c, x, y])
            a = code % 5
            c = (code // 5) % K
            m = code // (5 * K)
            if a:
                mx, my = MOVES[a - 1]
                x, y = x - mx, y - my
            out.append((x, y, t - 1))
        out.reverse()
        return tuple(out)

    def record(t: int):
        vals = V[full, :, dx_, dy_]
        c = int(np.argmax(vals))
        if vals[c] > NEG:
            results[t] = (backtrack(t, full, c), float(vals[c]))

    if t0 + dmin == t0:
        record(t0)
    # cells that carry a required bit; everything else keeps the mask
    plain = bit == 0
    for t in range(t0, t1):
        pre = np.full((M, K, W, H), NEG)
        ppar = np.full((M, K, W, H), -1, dtype=np.int64)
        for m in range(M):
            src0 = V[m, 0]
            for a, (mx, my) in enumerate(MOVES, start=1):
                cand = _shift(src0, mx, my)
                tgt = K - 1
                better = cand > pre[m, tgt]
                pre[m, tgt][better] = cand[better]
                ppar[m, tgt][better] = (m * K + 0) * 5 + a
            for c in range(K):
                tc = max(c - 1, 0)
                src = V[m, c]
                better = src > pre[m, tc]
                pre[m, tc][better] = src[better]
                ppar[m, tc][better] = (m * K + c) * 5
        if R:
            new = np.full_like(pre, NEG)
            npar = np.full_like(ppar, -1)
            for m in range(M):
                keep = plain | ((bit & m) == bit)
                for c in range(K):
                    sel = keep & (pre[m, c] > new[m, c])
                    new[m, c][sel] = pre[m, c][sel]
                    npar[m, c][sel] = ppar[m, c][sel]
                for (x, y) in req:
                    b = int(bit[x, y])
                    if m & b:
                        continue
                    m2 = m | b
                    for c in range(K):
                        if pre[m, c, x, y] > new[m2, c, x, y]:
                            new[m2, c, x, y] = pre[m, c, x, y]
                            npar[m2, c, x, y] = ppar[m, c, x, y]
            pre, ppar = new, npar
        pre = pre + rewards[t + 1][None, None]
        pre[:, :, blocked[t + 1]] = NEG
        V = pre
        parents.append(ppar)
        if t + 1 >= t0 + dmin:
            record(t + 1)
    return results
