"""Time the numba kernels against their pure-numpy counterparts.

    python3 benchmarks/bench_kernels.py [--episodes 10000] [--horizon 400] [--states 20]

The rollout workload is the windy case-study grid under its O=0.1 policy; the
lookahead workload is one DP backup on a random dense model of the given size.
"""
import argparse
import time

import numpy as np

from stmdp import kernels, sim
from stmdp.gridworld import build_mdp, case_study_spec
from stmdp.trigger import TriggerConfig, build_lookahead_tables, solve_problem1


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def rollout_case(episodes, horizon):
    model, index = build_mdp(case_study_spec(windy=True))
    cfg = TriggerConfig(0.95, 6, 0.1)
    policy = solve_problem1(model, cfg).policy
    u = np.stack([sim.episode_uniforms(0, e, horizon) for e in range(episodes)])
    args = (
        sim.cumulative_rows(model), np.ascontiguousarray(model.costs), np.ascontiguousarray(policy.tau),
        np.ascontiguousarray(policy.pi), index.start_state, u, 0.95 ** np.arange(horizon), 0.1,
    )
    return args


def lookahead_case(states, actions, t_bar, seed=0):
    from stmdp.mdp import MdpModel

    rng = np.random.default_rng(seed)
    p = rng.random((actions, states, states))
    p /= p.sum(axis=2, keepdims=True)
    model = MdpModel(p, rng.random((states, actions)))
    tables = build_lookahead_tables(model, TriggerConfig(0.95, t_bar))
    ccost_t = np.ascontiguousarray(np.transpose(tables.ccost, (2, 1, 0)))
    w = rng.random(states)
    return tables.skip, ccost_t, tables.discounts, w


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--episodes", type=int, default=10_000)
    parser.add_argument("--horizon", type=int, default=400)
    parser.add_argument("--states", type=int, default=200)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    cases = {
        f"rollout_batch ({args.episodes} x {args.horizon})": (
            kernels.rollout_batch_nb, kernels.rollout_batch_np, rollout_case(args.episodes, args.horizon)),
        f"lookahead_q (N={args.states}, M=4, T=6)": (
            kernels.lookahead_q_nb, kernels.lookahead_q_np, lookahead_case(args.states, 4, 6)),
        "argmin_first (24 x 2000)": (
            kernels.argmin_first_nb, kernels.argmin_first_np,
            (np.random.default_rng(1).random((24, 2000)), kernels.TIE_ATOL)),
    }
    print(f"numba active: {kernels.HAS_NUMBA}")
    print(f"{'kernel':40s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, (fast, slow, call_args) in cases.items():
        if kernels.HAS_NUMBA:
            fast(*call_args)  # compile
        t_fast = best_of(lambda: fast(*call_args), args.repeat)
        t_slow = best_of(lambda: slow(*call_args), args.repeat)
        print(f"{name:40s} {1e3 * t_fast:11.2f} {1e3 * t_slow:11.2f} {t_slow / t_fast:7.1f}x")


if __name__ == "__main__":
    main()
