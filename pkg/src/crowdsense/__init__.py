"""Budget-constrained spatio-temporal sensing schedules with disturbance-aware refinement."""

__version__ = "0.1.0"
