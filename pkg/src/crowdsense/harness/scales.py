"""Dataset scale presets (grid size, pool size, budget, horizon)."""
from __future__ import annotations

from dataclasses import dataclass

from ..grid import GridSpec


@dataclass(frozen=True)
class ScaleConfig:
    name: str
    workers: int
    grid: tuple[int, int]
    regions: int
    budget: float
    horizon_minutes: int
    slot_minutes: int
    dataset: str = "synthetic"

    def __post_init__(self):
        if self.regions != self.grid[0] * self.grid[1]:
            raise ValueError("regions must equal W x H")
        if self.horizon_minutes % self.slot_minutes:
            raise ValueError("horizon must be a multiple of the slot length")

    @property
    def num_slots(self) -> int:
        return self.horizon_minutes // self.slot_minutes

    def grid_spec(self) -> GridSpec:
        return GridSpec(self.grid[0], self.grid[1], self.num_slots, self.slot_minutes)


SCALES = {
    ("tdrive", "Small"): ScaleConfig("Small", 20, (8, 8), 64, 40, 120, 15, "tdrive"),
    ("tdrive", "Medium"): ScaleConfig("Medium", 40, (16, 16), 256, 60, 240, 15, "tdrive"),
    ("tdrive", "Large"): ScaleConfig("Large", 60, (32, 32), 1024, 100, 360, 15, "tdrive"),
    ("grab", "Small"): ScaleConfig("Small", 15, (8, 4), 32, 40, 40, 5, "grab"),
    ("grab", "Medium"): ScaleConfig("Medium", 30, (16, 8), 128, 60, 80, 5, "grab"),
    ("grab", "Large"): ScaleConfig("Large", 45, (32, 16), 512, 100, 160, 5, "grab"),
}


def get_scale(name: str, dataset: str = "tdrive") -> ScaleConfig:
    try:
        return SCALES[(dataset.lower(), name.capitalize())]
    except KeyError:
        raise KeyError(f"unknown scale {dataset}/{name}") from None
