import time

import numpy as np
import pytest

from inekf import sim

DEG = np.pi / 180.0


def _nav_Q(q):
    return np.diag([q] * 6 + [0.0] * 3)


def _timed_run(scn):
    start = time.perf_counter()
    log = sim.run(scn)
    log.extra["elapsed_s"] = time.perf_counter() - start
    return log


@pytest.fixture(scope="session")
def fig1_small_log():
    return _timed_run(sim.Scenario(model="car", heading_error_deg=1.0))


@pytest.fixture(scope="session")
def fig1_large_log():
    return _timed_run(sim.Scenario(model="car", heading_error_deg=45.0))


@pytest.fixture(scope="session")
def fig2_q1_log():
    return _timed_run(sim.Scenario(model="nav", duration_s=30.0,
                                   Q=_nav_Q(1e-8), seed=8611))


@pytest.fixture(scope="session")
def fig2_q2_log():
    return _timed_run(sim.Scenario(model="nav", duration_s=30.0,
                                   Q=_nav_Q(1e-4), seed=8611))


@pytest.fixture(scope="session")
def all_scenario_logs(fig1_small_log, fig1_large_log, fig2_q1_log,
                      fig2_q2_log):
    return {
        "fig1_small": fig1_small_log,
        "fig1_large": fig1_large_log,
        "fig2_q1": fig2_q1_log,
        "fig2_q2": fig2_q2_log,
    }
