"""Synthetic instance generator with skewed (Gaussian-mixture) urban density."""
from __future__ import annotations

import numpy as np

from ..grid import Instance, Worker, manhattan
from .scales import ScaleConfig

N_CENTRES = 3


def _sampler(rng: np.random.Generator, W: int, H: int):
    centres = rng.uniform([0, 0], [W, H], size=(N_CENTRES, 2))
    sigma = max(W, H) / 6.0
    weights = rng.dirichlet(np.ones(N_CENTRES))

    def draw() -> tuple[int, int]:
        k = rng.choice(N_CENTRES, p=weights)
        x, y = rng.normal(centres[k], sigma)
        return int(np.clip(np.floor(x), 0, W - 1)), int(np.clip(np.floor(y), 0, H - 1))

    return draw


def generate_workers(scale: ScaleConfig, rng: np.random.Generator, n: int, first_id: int = 0,
                     draw=None) -> list[Worker]:
    W, H = scale.grid
    T = scale.num_slots
    draw = draw or _sampler(rng, W, H)
    workers = []
    for i in range(n):
        t0 = int(rng.integers(0, T - 1))
        t1 = int(rng.integers(t0 + 1, T))
        origin = draw()
        dest = origin
        for _ in range(20):
            cand = draw()
            if manhattan(origin, cand) <= t1 - t0:
                dest = cand
                break
        workers.append(Worker(first_id + i, origin, dest, (t0, t1)))
    return workers


def generate_instance(scale: ScaleConfig, seed: int, alpha: float = 0.5) -> Instance:
    """Deterministic synthetic instance for ``(scale, seed)``."""
    rng = np.random.default_rng([seed, scale.grid[0], scale.grid[1], scale.num_slots])
    workers = generate_workers(scale, rng, scale.workers)
    return Instance(scale.grid_spec(), tuple(workers), float(scale.budget), alpha,
                    name=f"{scale.dataset}-{scale.name}-{seed}")
