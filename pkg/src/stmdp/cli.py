"""Command-line interface: ``stmdp solve|guarantee|simulate|render|export|import``."""
import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import documents, gridworld, render, sim
from .mdp import ConvergenceError, SolverConfig, classic_value_iteration
from .trigger import (
    InfeasibleGuarantee,
    TriggerConfig,
    build_lookahead_tables,
    solve_problem1,
    solve_problem2,
    verify_guarantee,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_CONVERGENCE = 4
EXIT_GUARANTEE = 5
EXIT_STALE = 6

DEFAULT_BETA = 0.95
DEFAULT_TBAR = 6


def _alpha(text):
    value = float(text)
    if not value >= 1.0:
        raise argparse.ArgumentTypeError(f"alpha must be >= 1, got {text}")
    return value


def _penalty(text):
    value = float(text)
    if not value >= 0.0:
        raise argparse.ArgumentTypeError(f"penalty must be >= 0, got {text}")
    return value


def _load_spec(args):
    path = args.map
    if path is None or (not os.path.exists(path) and os.path.basename(path) == "paper.grid"):
        spec = gridworld.parse_map(gridworld.case_study_map_text())
    else:
        spec = gridworld.load_map(path)
    if args.windy:
        spec = spec.with_wind(gridworld.CASE_STUDY_WIND, gridworld.CASE_STUDY_WIND)
    return spec


def _setup(args):
    spec = _load_spec(args)
    model, index = gridworld.build_mdp(spec)
    beta = args.beta if args.beta is not None else (spec.beta or DEFAULT_BETA)
    t_bar = args.tbar if args.tbar is not None else (spec.t_bar or DEFAULT_TBAR)
    return spec, model, index, beta, t_bar


def _label(index):
    return lambda s: gridworld.display_index(index, s)


def _fmt(x):
    return f"{x:g}"


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _sweep(fn, params, jobs):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(fn, params))
    else:
        results = [fn(p) for p in params]
    return sorted(zip(params, results), key=lambda pr: pr[0])


def cmd_solve(args):
    spec, model, index, beta, t_bar = _setup(args)
    base = TriggerConfig(beta, t_bar, tolerance=args.tolerance, max_iterations=args.max_iterations)
    tables = build_lookahead_tables(model, base)

    def run(penalty):
        cfg = TriggerConfig(beta, t_bar, penalty, tolerance=args.tolerance, max_iterations=args.max_iterations)
        res = solve_problem1(model, cfg, tables)
        return documents.policy_document(
            model, res.policy, res.values, problem=1, parameter=penalty, beta=beta, t_bar=t_bar,
            tolerance=args.tolerance, iterations=res.iterations, residual=res.residual, label=_label(index),
        )

    for penalty, doc in _sweep(run, sorted(set(args.penalty)), args.jobs):
        picture = render.render_policy(doc, spec, unicode=args.unicode)
        print(f"# problem 1, penalty O={_fmt(penalty)}: {doc.iterations} iterations, residual {doc.residual:.3g}")
        print(picture, end="")
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            stem = os.path.join(args.out, f"policy_p1_O{_fmt(penalty)}")
            _write(stem + ".txt", documents.dump_policy(doc))
            _write(stem + ".render.txt", picture)
    return EXIT_OK


def cmd_guarantee(args):
    spec, model, index, beta, t_bar = _setup(args)
    classic = classic_value_iteration(model, SolverConfig(beta, args.tolerance, args.max_iterations))
    base = TriggerConfig(beta, t_bar, tolerance=args.tolerance, max_iterations=args.max_iterations)
    tables = build_lookahead_tables(model, base)

    def run(alpha):
        cfg = TriggerConfig(beta, t_bar, alpha=alpha, tolerance=args.tolerance, max_iterations=args.max_iterations)
        res = solve_problem2(model, classic.values, cfg, tables)
        report = verify_guarantee(model, res.policy, classic.values, cfg, tables)
        doc = documents.policy_document(
            model, res.policy, report.policy_values, problem=2, parameter=alpha, beta=beta, t_bar=t_bar,
            tolerance=args.tolerance, iterations=classic.iterations, residual=classic.residual,
            label=_label(index),
        )
        return doc, report

    status = EXIT_OK
    for alpha, (doc, report) in _sweep(run, sorted(set(args.alpha)), args.jobs):
        picture = render.render_policy(doc, spec, unicode=args.unicode)
        print(f"# problem 2, alpha={_fmt(alpha)}")
        print(picture, end="")
        print("state\ttau\taction\tV\tv_mu\talpha*V\tcondition\tbound")
        for x, rec in enumerate(doc.records):
            print(
                f"{rec.display}\t{rec.tau}\t{rec.action}\t{classic.values[x]:.6f}\t"
                f"{report.policy_values[x]:.6f}\t{alpha * classic.values[x]:.6f}\t"
                f"{'ok' if report.condition_holds[x] else 'FAIL'}\t{'ok' if report.bound_holds[x] else 'FAIL'}"
            )
        print(f"guarantee {'holds' if report.ok else 'VIOLATED'}; max(v_mu - alpha*V) = "
              f"{np.max(report.policy_values - alpha * classic.values):.3g}")
        if not report.ok:
            status = EXIT_GUARANTEE
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            stem = os.path.join(args.out, f"policy_p2_alpha{_fmt(alpha)}")
            _write(stem + ".txt", documents.dump_policy(doc))
            _write(stem + ".render.txt", picture)
    return status


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def cmd_simulate(args):
    spec, model, index, beta, t_bar = _setup(args)
    doc = documents.load_policy(_read(args.policy), model)
    policy = doc.policy(model)
    penalty = doc.parameter if doc.problem == 1 else 0.0
    cfg = TriggerConfig(doc.beta, doc.t_bar, penalty, tolerance=doc.tolerance)
    start = index.start_state if args.start is None else gridworld.state_from_display(index, args.start)
    horizon = args.horizon or sim.default_horizon(model, cfg)
    goal = (index.target_state, index.absorbing_state)
    label = _label(index)
    if args.seeds == 1:
        traj = sim.rollout(model, policy, start, horizon, args.seed, cfg)
        steps = traj.first_hit(goal)
        reached = steps is not None
        steps = steps if reached else horizon
        updates = traj.updates_before(steps)
        ratio = sim.savings_ratio(updates, steps)
        print(f"start state: {label(start)}")
        print(f"steps to target: {steps}" + ("" if reached else " (not reached within horizon)"))
        print(f"updates after the initial one: {updates}")
        print(f"update states: {' '.join(label(int(traj.states[t])) for t in traj.trigger_times if 0 < t < steps)}")
        print(f"savings ratio: ({steps} - {updates})/{steps} = {ratio:.4f} ({100 * ratio:.2f}%)")
        print(f"discounted cost: {traj.discounted_cost:.6f}")
        print(f"discounted penalty: {traj.discounted_penalty:.6f}")
        if args.log:
            with open(args.log, "w", encoding="utf-8", newline="\n") as fh:
                sim.write_trajectory_log(fh, traj, model, label)
        return EXIT_OK
    stats = sim.estimate_cost(model, policy, start, horizon, args.seeds, cfg, seed=args.seed, goal=goal)
    print(f"episodes: {stats.num_episodes} (horizon {horizon}, base seed {args.seed})")
    print(f"mean discounted cost: {stats.mean_cost:.6f} +/- {stats.stderr_cost:.6f}")
    print(f"mean discounted penalty: {stats.mean_penalty:.6f} +/- {stats.stderr_penalty:.6f}")
    print(f"mean total: {stats.mean_total:.6f} +/- {stats.stderr_total:.6f}")
    print(f"truncation bound: {stats.truncation_bound:.3g}")
    print(f"mean steps to target: {stats.mean_steps:.4f} (reached in {stats.goal_reached} episodes)")
    print(f"mean updates: {stats.mean_updates:.4f}")
    print(f"savings ratio: {stats.savings_ratio:.4f} ({100 * stats.savings_ratio:.2f}%)")
    if args.log:
        traj = sim.rollout(model, policy, start, horizon, args.seed, cfg)
        with open(args.log, "w", encoding="utf-8", newline="\n") as fh:
            sim.write_trajectory_log(fh, traj, model, label)
    return EXIT_OK


def cmd_render(args):
    spec, model, _, _, _ = _setup(args)
    doc = documents.load_policy(_read(args.policy), model)
    print(render.render_policy(doc, spec, unicode=args.unicode, top="value" if args.values else "tau"), end="")
    return EXIT_OK


def _emit(text, out):
    if out:
        _write(out, text)
    else:
        sys.stdout.write(text)


def cmd_export(args):
    _, model, _, _, _ = _setup(args)
    if args.policy:
        doc = documents.load_policy(_read(args.policy), model)
        _emit(documents.dump_policy(doc), args.out)
    else:
        _emit(documents.dump_model(model), args.out)
    return EXIT_OK


def cmd_import(args):
    text = _read(args.document)
    if text.startswith(documents.MODEL_MAGIC):
        model = documents.load_model(text)
        if args.map is not None or args.windy:
            _, expected, _, _, _ = _setup(args)
            if documents.fingerprint(expected) != documents.fingerprint(model):
                raise documents.FingerprintMismatch("imported model does not match the map")
        _emit(documents.dump_model(model), args.out)
    else:
        model = None
        if args.map is not None or args.windy:
            _, model, _, _, _ = _setup(args)
        doc = documents.load_policy(text, model)
        _emit(documents.dump_policy(doc), args.out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="stmdp", description="Self-triggered MDP toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--map", help="map document (default: bundled paper.grid)")
        p.add_argument("--windy", action="store_true", help="10%% north / 10%% west wind")
        p.add_argument("--beta", type=float)
        p.add_argument("--tbar", type=int)
        p.add_argument("--tolerance", type=float, default=1e-5)
        p.add_argument("--max-iterations", type=int, default=10_000)
        p.add_argument("--unicode", action="store_true", help="arrow glyphs instead of ^ v > <")
        p.add_argument("--out", help="output directory (solve/guarantee) or file (export/import)")
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("solve", help="optimal policy under update penalties")
    common(p)
    p.add_argument("--penalty", type=_penalty, action="append", help="update penalty O (repeatable)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("guarantee", help="greedy policy with an alpha-suboptimality guarantee")
    common(p)
    p.add_argument("--alpha", type=_alpha, action="append", help="suboptimality factor (repeatable)")
    p.set_defaults(func=cmd_guarantee)

    p = sub.add_parser("simulate", help="roll out a stored policy")
    common(p)
    p.add_argument("--policy", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=1, help="number of episodes")
    p.add_argument("--horizon", type=int)
    p.add_argument("--start", help="display label of the start state (default: S)")
    p.add_argument("--log", help="write a tab-separated trajectory log of the base-seed episode")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("render", help="draw a stored policy on its grid")
    common(p)
    p.add_argument("--policy", required=True)
    p.add_argument("--values", action="store_true", help="show values instead of waiting times")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("export", help="write the model (or a re-serialised policy) document")
    common(p)
    p.add_argument("--policy")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("import", help="read and validate a model or policy document")
    common(p)
    p.add_argument("document")
    p.set_defaults(func=cmd_import)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "penalty", False) is None:
        args.penalty = [0.0]
    if getattr(args, "alpha", False) is None:
        args.alpha = [1.0]
    if getattr(args, "seeds", 1) < 1:
        parser.error("--seeds must be at least 1")
    try:
        return args.func(args)
    except documents.FingerprintMismatch as exc:
        print(f"stmdp: {exc}", file=sys.stderr)
        return EXIT_STALE
    except (gridworld.MapParseError, documents.DocumentError) as exc:
        print(f"stmdp: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConvergenceError as exc:
        print(f"stmdp: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except InfeasibleGuarantee as exc:
        print(f"stmdp: {exc}", file=sys.stderr)
        return EXIT_GUARANTEE
    except (ValueError, OSError) as exc:
        print(f"stmdp: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
