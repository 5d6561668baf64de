"""Acceptance checks, one test per criterion.

Each test records a one-line verdict; the lines are printed in the pytest
terminal summary (see ``pytest_terminal_summary`` in conftest.py) and also
when this file is run directly.
"""
import itertools
import time
from contextlib import contextmanager

import numpy as np
import pytest

from stmdp import kernels
from stmdp.gridworld import EAST, NORTH, build_mdp, display_index, case_study_spec
from stmdp.mdp import SolverConfig, classic_value_iteration, policy_matrix
from stmdp.sim import estimate_cost, rollout, savings_ratio
from stmdp.trigger import (
    TriggerConfig,
    build_lookahead_tables,
    evaluate_self_triggered,
    lookahead_iterates,
    solve_problem1,
    solve_problem2,
    verify_guarantee,
)

from conftest import BETA, T_BAR, enumerate_policies, expanded_mdp, random_model

RESULTS = {}
ALPHAS = (1.0, 1.1, 1.4, 2.0)
PENALTIES = (0.0, 0.1, 40.0, 80.0)
FIXED_POINT_TOL = 1e-11


@contextmanager
def criterion(number, title):
    detail = {}
    start = time.perf_counter()
    try:
        yield detail
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        reason = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        RESULTS[number] = f"criterion {number:2d} FAIL  {title} [{elapsed:.2f}s] {reason}"
        raise
    elapsed = time.perf_counter() - start
    note = detail.get("note", "")
    RESULTS[number] = f"criterion {number:2d} PASS  {title} [{elapsed:.2f}s] {note}".rstrip()


def check(cond, message):
    if not cond:
        raise AssertionError(message)


@pytest.fixture(scope="module", autouse=True)
def warm_up():
    """Compile the accelerated kernels before any timed section."""
    model, index = build_mdp(case_study_spec(windy=True))
    cfg = TriggerConfig(BETA, T_BAR, 0.1, max_iterations=3, tolerance=1e3)
    policy = solve_problem1(model, cfg).policy
    estimate_cost(model, policy, index.start_state, 5, 2, cfg)
    kernels.argmin_first(np.zeros((2, 3)), kernels.TIE_ATOL)


@pytest.fixture(scope="module")
def grids():
    return {windy: build_mdp(case_study_spec(windy=windy)) for windy in (False, True)}


def test_criterion_01_zero_penalty_reduction(grids):
    with criterion(1, "O=0 reduction: |V_st - V| <= 2e-5, tau == 1, < 1 s") as d:
        t0 = time.perf_counter()
        gaps = []
        for windy, (model, _) in grids.items():
            v = classic_value_iteration(model, SolverConfig(BETA)).values
            res = solve_problem1(model, TriggerConfig(BETA, T_BAR, 0.0))
            gap = float(np.max(np.abs(res.values - v)))
            gaps.append(gap)
            check(gap <= 2e-5, f"windy={windy}: sup gap {gap:.3g}")
            check(np.all(res.policy.tau == 1), f"windy={windy}: tau {res.policy.tau.tolist()}")
        elapsed = time.perf_counter() - t0
        check(elapsed < 1.0, f"took {elapsed:.2f}s")
        d["note"] = f"max gap {max(gaps):.2e}"


def test_criterion_02_convergence_budget(grids):
    model, _ = grids[False]
    counts = {}
    with criterion(2, "lookahead VI within 25 iterations for O in {0, 0.1, 40, 80}, < 1 s each") as d:
        for penalty in PENALTIES:
            t0 = time.perf_counter()
            res = solve_problem1(model, TriggerConfig(BETA, T_BAR, penalty))
            counts[penalty] = res.iterations
            check(time.perf_counter() - t0 < 1.0, f"O={penalty:g} too slow")
        summary = ", ".join(f"O={o:g}: {k}" for o, k in counts.items())
        d["note"] = summary
        check(all(k <= 25 for k in counts.values()), f"iterations {summary}")


def test_criterion_03_high_penalty_saturation(grids):
    model, index = grids[False]
    with criterion(3, "O=80: tau = 6 except display states 3 and 4 (>= 18 of 20)") as d:
        tau = solve_problem1(model, TriggerConfig(BETA, T_BAR, 80.0)).policy.tau
        others = [x for x in range(model.num_states) if display_index(index, x) not in ("3", "4")]
        check(np.all(tau[others] == T_BAR), f"tau {tau.tolist()}")
        saturated = int(np.count_nonzero(tau == T_BAR))
        check(saturated >= 18, f"only {saturated} states at tau = {T_BAR}")
        d["note"] = f"{saturated}/20 states at tau = {T_BAR}"


def test_criterion_04_calm_rollout(grids):
    model, index = grids[False]
    with criterion(4, "O=0.1 rollout: 12 steps, 4 updates, savings 8/12") as d:
        cfg = TriggerConfig(BETA, T_BAR, 0.1)
        policy = solve_problem1(model, cfg).policy
        traj = rollout(model, policy, index.start_state, 100, seed=0, config=cfg)
        steps = traj.first_hit((index.target_state, index.absorbing_state))
        updates = traj.updates_before(steps)
        ratio = savings_ratio(updates, steps)
        check(steps == 12 and updates == 4, f"steps {steps}, updates {updates}")
        check(abs(ratio - 8 / 12) < 1e-12, f"ratio {ratio}")
        d["note"] = f"ratio {ratio:.4f}"


def test_criterion_05_absorbing_closed_form(grids):
    model, index = grids[False]
    with criterion(5, "V_st(absorbing) = b^T O / (1 - b^T) within 1e-6") as d:
        b = BETA**T_BAR
        errs = []
        for penalty in (0.1, 40.0, 80.0):
            cfg = TriggerConfig(BETA, T_BAR, penalty, tolerance=1e-10)
            v = solve_problem1(model, cfg).values[index.absorbing_state]
            errs.append(abs(v - b * penalty / (1 - b)))
            check(errs[-1] <= 1e-6, f"O={penalty:g}: V {v!r} vs {b * penalty / (1 - b)!r}")
        d["note"] = f"max error {max(errs):.1e}"


def test_criterion_06_guarantee_soundness(grids):
    model, _ = grids[True]
    with criterion(6, "greedy guarantee sound on the windy grid for alpha in {1, 1.1, 1.4, 2}, < 2 s") as d:
        t0 = time.perf_counter()
        v = classic_value_iteration(model, SolverConfig(BETA)).values
        tables = build_lookahead_tables(model, TriggerConfig(BETA, T_BAR))
        for alpha in ALPHAS:
            cfg = TriggerConfig(BETA, T_BAR, alpha=alpha)
            policy = solve_problem2(model, v, cfg, tables).policy
            check(np.all(policy.tau >= 1), f"alpha={alpha}: tau {policy.tau.tolist()}")
            report = verify_guarantee(model, policy, v, cfg, tables)
            check(report.condition_holds.all(), f"alpha={alpha}: per-state condition fails")
            f = evaluate_self_triggered(model, policy, cfg, include_penalty=False, tables=tables)
            check(np.all(f <= alpha * v + 1e-4), f"alpha={alpha}: bound exceeded by {np.max(f - alpha * v):.3g}")
            if alpha == 1.0:
                gap = float(np.max(np.abs(f - v)))
                check(gap <= 1e-4, f"alpha=1: |v_mu - V| = {gap:.3g}")
                check(np.any(policy.tau > 1), "alpha=1: tau == 1 everywhere")
                d["note"] = f"alpha=1 gap {gap:.1e}, {int(np.count_nonzero(policy.tau > 1))} states with tau > 1"
        elapsed = time.perf_counter() - t0
        check(elapsed < 2.0, f"took {elapsed:.2f}s")


def test_criterion_07_alpha_monotonicity(grids):
    model, _ = grids[True]
    with criterion(7, "tau_2 non-decreasing across alpha = 1, 1.1, 1.4, 2") as d:
        v = classic_value_iteration(model, SolverConfig(BETA)).values
        taus = [solve_problem2(model, v, TriggerConfig(BETA, T_BAR, alpha=a)).policy.tau for a in ALPHAS]
        for a, lo, hi in zip(ALPHAS[1:], taus, taus[1:]):
            check(np.all(lo <= hi), f"decrease at alpha={a}")
        d["note"] = "mean tau " + " -> ".join(f"{t.mean():.2f}" for t in taus)


def test_criterion_08_consolidated_equivalence():
    rng = np.random.default_rng(20240808)
    with criterion(8, "lookahead fixed point equals classic VI on expanded MDP, 200 models, < 10 s") as d:
        t0 = time.perf_counter()
        worst = 0.0
        for i in range(200):
            n, m, t_bar = int(rng.integers(1, 6)), int(rng.integers(1, 3)), int(rng.integers(1, 4))
            beta = float(rng.uniform(0.5, 0.99))
            penalty = float(rng.choice([0.0, rng.uniform(0, 5)]))
            model = random_model(rng, n, m)
            cfg = TriggerConfig(beta, t_bar, penalty, tolerance=FIXED_POINT_TOL, max_iterations=100_000)
            v_st = solve_problem1(model, cfg).values
            big = expanded_mdp(model, beta, t_bar, penalty)
            v_big = classic_value_iteration(big, SolverConfig(beta, FIXED_POINT_TOL, 100_000)).values[:n]
            err = float(np.max(np.abs(v_st - v_big)))
            worst = max(worst, err)
            check(err <= 1e-6, f"model {i}: gap {err:.3g}")
        elapsed = time.perf_counter() - t0
        check(elapsed < 10.0, f"took {elapsed:.2f}s")
        d["note"] = f"max gap {worst:.1e}"


def test_criterion_09_classic_vi_oracle():
    rng = np.random.default_rng(9)
    with criterion(9, "classic VI equals exhaustive policy enumeration, 200 models") as d:
        worst = 0.0
        for i in range(200):
            n, m = int(rng.integers(1, 7)), int(rng.integers(1, 4))
            beta = float(rng.uniform(0.5, 0.99))
            model = random_model(rng, n, m)
            best = None
            for pol in enumerate_policies(n, m):
                p, c = policy_matrix(model, pol)
                v = np.linalg.solve(np.eye(n) - beta * p, c)
                best = v if best is None else np.minimum(best, v)
            vi = classic_value_iteration(model, SolverConfig(beta, FIXED_POINT_TOL, 100_000)).values
            err = float(np.max(np.abs(vi - best)))
            worst = max(worst, err)
            check(err <= 1e-6, f"model {i}: gap {err:.3g}")
        d["note"] = f"max gap {worst:.1e}"


def test_criterion_10_rate_bound(grids):
    with criterion(10, "every iterate within b^k/(1-b) |V_0 - V_1| of the fixed point") as d:
        checked = 0
        for windy, (model, _) in grids.items():
            tables = build_lookahead_tables(model, TriggerConfig(BETA, T_BAR))
            for penalty in PENALTIES:
                cfg = TriggerConfig(BETA, T_BAR, penalty, tolerance=1e-12, max_iterations=100_000)
                v_star = solve_problem1(model, cfg, tables).values
                iterates = lookahead_iterates(tables, cfg)
                v0, v1 = next(iterates), next(iterates)
                first = float(np.max(np.abs(v0 - v1)))
                for k, vk in zip(range(200), [v0, v1, *itertools.islice(iterates, 198)]):
                    err = float(np.max(np.abs(vk - v_star)))
                    check(err <= BETA**k / (1 - BETA) * first + 1e-9, f"windy={windy} O={penalty:g} k={k}")
                    checked += 1
        d["note"] = f"{checked} iterates"


def test_criterion_11_monte_carlo(grids):
    model, index = grids[True]
    with criterion(11, "windy O=0.1 Monte Carlo mean matches analytic value, 10k seeds, < 30 s") as d:
        t0 = time.perf_counter()
        cfg = TriggerConfig(BETA, T_BAR, 0.1)
        policy = solve_problem1(model, cfg).policy
        f = evaluate_self_triggered(model, policy, cfg, method="direct")[index.start_state]
        stats = estimate_cost(model, policy, index.start_state, 400, 10_000, cfg, seed=0)
        slack = 3 * stats.stderr_total + stats.truncation_bound
        gap = abs(stats.mean_total - f)
        check(gap <= slack, f"mean {stats.mean_total:.4f} vs {f:.4f}, gap {gap:.4f} > {slack:.4f}")
        elapsed = time.perf_counter() - t0
        check(elapsed < 30.0, f"took {elapsed:.2f}s")
        d["note"] = f"mean {stats.mean_total:.4f} vs analytic {f:.4f} (gap {gap:.4f}, allowed {slack:.4f})"


def test_criterion_12_transition_fidelity(grids):
    with criterion(12, "windy P(.|11,east) = 0.8/0.1/0.1 and calm P(6|1,north) = 1 exactly"):
        windy, _ = grids[True]
        calm, _ = grids[False]
        row = windy.transitions[EAST, 10]
        check(row[11] == 0.8 and row[9] == 0.1 and row[15] == 0.1, f"row {row.tolist()}")
        check(calm.transitions[NORTH, 0, 5] == 1.0, "calm north from 1")


if __name__ == "__main__":
    import sys

    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(code)
