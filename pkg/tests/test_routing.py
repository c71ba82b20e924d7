import numpy as np
import pytest
from hypothesis import given, strategies as st

from crowdsense.grid import GridSpec, Worker, validate_path
from crowdsense.routing import blocked_mask, dp_paths
from oracles import feasible_paths

G = GridSpec(3, 3, 4)


def worker_st(draw_speed=True):
    cell = st.tuples(st.integers(0, 2), st.integers(0, 2))
    return st.builds(lambda o, d, t0, span, sp: (o, d, t0, min(3, t0 + span), sp),
                     cell, cell, st.integers(0, 2), st.integers(1, 3),
                     st.sampled_from([1.0, 0.5]) if draw_speed else st.just(1.0))


@given(worker_st(), st.integers(0, 2**31 - 1))
def test_dp_matches_enumeration(spec, seed):
    o, d, t0, t1, sp = spec
    w = Worker(0, o, d, (t0, t1), sp)
    rewards = np.random.default_rng(seed).random((G.num_slots, G.width, G.height))
    got = dp_paths(w, G, rewards)
    brute = feasible_paths(o, d, t0, t1, 3, 3, sp)
    best = {}
    for p in brute:
        v = sum(rewards[t, x, y] for x, y, t in p)
        best[p[-1][2]] = max(best.get(p[-1][2], -1), v)
    assert set(got) == set(best)
    for t, (path, val) in got.items():
        assert validate_path(path, w, G).feasible
        assert path[-1][2] == t
        assert val == pytest.approx(best[t], abs=1e-9)


def test_required_cells_and_blocking():
    w = Worker(0, (0, 0), (2, 0), (0, 3))
    r = np.zeros((4, 3, 3))
    w2 = Worker(1, (0, 0), (2, 1), (0, 3))
    got = dp_paths(w2, G, r, required=((1, 1),))
    assert set(got) == {3} and all((1, 1) in {s[:2] for s in p} for p, _ in got.values())
    blk = blocked_mask({(1, 0, 1), (1, 0, 2)}, G)
    assert dp_paths(w, G, r, blk) == {}  # no detour fits the window
    assert dp_paths(w, G, r, max_cost=2) == {}
    assert set(dp_paths(w, G, r, max_cost=3)) == {2}
