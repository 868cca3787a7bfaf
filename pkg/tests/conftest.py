from __future__ import annotations

import pytest

from artifact import TrapSpec, TrappedOracle, default_model, make_grid, make_schedule, rollout


@pytest.fixture(scope="session")
def sched():
    return make_schedule()


@pytest.fixture(scope="session")
def model():
    return default_model()


@pytest.fixture(scope="session")
def grid25(sched):
    return make_grid(sched, 25)


@pytest.fixture(scope="session")
def model_trap_traj(sched, model, grid25):
    """One uncorrected spike-trap trajectory shared by read-only tests."""
    spec = TrapSpec(region=(4, 5, 7, 7), trigger_step=680, spike_gain=8.0)
    oracle = TrappedOracle(model, sched, [spec])
    traj = rollout(oracle, sched, grid25, seed=101)
    return traj, spec
