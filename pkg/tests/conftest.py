import numpy as np
import pytest

from netgame import Dataset, GameState, PayoffParams, generate_random, make_rng, solve_equilibrium
from netgame.simulate import draw_actions

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, passed: bool, detail: str) -> None:
    line = f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def simulated(n=300, beta=((0.3, 1.0, -0.7),), alpha=((0.8,),), seed=0, K=None):
    """Random network, covariates with an intercept, equilibrium draws."""
    rng = make_rng(seed)
    params = PayoffParams(beta, alpha)
    net = generate_random(n, rng)
    X = np.column_stack([np.ones(n), rng.uniform(-0.5, 0.5, n), rng.normal(size=n)])[:, : params.d]
    state = GameState(net, X)
    profile, _ = solve_equilibrium(state, params)
    Y = draw_actions(profile, rng).Y
    return Dataset(state, Y), params


@pytest.fixture
def small_data():
    return simulated()
