import pytest
from hypothesis import HealthCheck, settings

from crowdsense.grid import GridSpec, Instance, Worker
from crowdsense.harness.generate import generate_instance
from crowdsense.harness.scales import get_scale

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def as_instance(workers, budget, W=3, H=3, T=4, alpha=0.5):
    """Oracle-style worker dicts -> Instance."""
    ws = tuple(Worker(w["id"], w["origin"], w["destination"], (w["t0"], w["t1"]), w.get("speed", 1.0),
                      w.get("rate", 1.0)) for w in workers)
    return Instance(GridSpec(W, H, T), ws, budget, alpha)


@pytest.fixture
def tiny():
    ws = (Worker(0, (0, 0), (2, 0), (0, 3)),
          Worker(1, (3, 3), (3, 1), (1, 4)),
          Worker(2, (1, 2), (1, 2), (0, 4), speed=0.5),
          Worker(3, (0, 3), (2, 3), (2, 5), reward_per_step=2.0))
    return Instance(GridSpec(4, 4, 6), ws, 14.0)


@pytest.fixture(scope="session")
def small0():
    return generate_instance(get_scale("Small"), 0)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
