import itertools
import sys

import numpy as np
import pytest

from stmdp.gridworld import build_mdp, case_study_spec
from stmdp.mdp import MdpModel, SolverConfig, classic_value_iteration

BETA = 0.95
T_BAR = 6


def random_model(rng, n, m, zero_prob=0.3):
    p = rng.random((m, n, n))
    p[rng.random((m, n, n)) < zero_prob] = 0.0
    # keep every row non-empty
    p[:, np.arange(n), rng.integers(0, n, size=n)] += 0.1
    p /= p.sum(axis=2, keepdims=True)
    c = rng.random((n, m)) * 10.0
    return MdpModel(p, c)


def enumerate_policies(n, m):
    return (np.array(pol) for pol in itertools.product(range(m), repeat=n))


@pytest.fixture(scope="session")
def calm():
    return build_mdp(case_study_spec(windy=False))


@pytest.fixture(scope="session")
def windy():
    return build_mdp(case_study_spec(windy=True))


@pytest.fixture(scope="session")
def calm_classic(calm):
    return classic_value_iteration(calm[0], SolverConfig(BETA))


@pytest.fixture(scope="session")
def windy_classic(windy):
    return classic_value_iteration(windy[0], SolverConfig(BETA))


@pytest.fixture
def chain():
    """Two states: 0 -> 1 deterministically, 1 absorbing; cost 1 at state 0 only."""
    p = np.array([[[0.0, 1.0], [0.0, 1.0]]])
    return MdpModel(p, np.array([[1.0], [0.0]]))


def expanded_mdp(model, beta, t_bar, penalty):
    """Classic MDP over actions (a, dt) equivalent to the lookahead DP.

    The per-decision discount beta**dt is realised as: with probability
    beta**(dt - 1) follow the dt-step kernel, otherwise drop into an extra
    zero-cost sink. One-step discounting by beta then gives beta**dt overall.
    """
    n, m = model.num_states, model.num_actions
    p = np.zeros((m * t_bar, n + 1, n + 1))
    c = np.zeros((n + 1, m * t_bar))
    for a in range(m):
        pa = model.transitions[a]
        power = np.eye(n)
        acc = np.zeros(n)
        for dt in range(1, t_bar + 1):
            acc = acc + beta ** (dt - 1) * (power @ model.costs[:, a])
            power = power @ pa
            k = (dt - 1) * m + a
            stay = beta ** (dt - 1)
            p[k, :n, :n] = stay * power
            p[k, :n, n] = 1.0 - stay
            p[k, n, n] = 1.0
            c[:n, k] = acc + beta**dt * penalty
    return MdpModel(p, c)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])
