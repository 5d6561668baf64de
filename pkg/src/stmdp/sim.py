"""Seeded Monte Carlo rollouts of self-triggered policies.

Random streams: episode ``e`` of base seed ``s`` draws its uniforms from
``numpy.random.Generator(PCG64(SeedSequence([s, e])))`` via ``.random(horizon)``,
one uniform per time step. The next state is the first index whose cumulative
transition probability exceeds the uniform.
"""
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import kernels
from .mdp import MdpModel
from .trigger import SelfTriggeredPolicy, TriggerConfig


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray  # length horizon + 1
    actions: np.ndarray
    triggered: np.ndarray
    stage_costs: np.ndarray
    discounted_cost: float
    discounted_penalty: float

    @property
    def trigger_times(self) -> np.ndarray:
        return np.flatnonzero(self.triggered)

    @property
    def horizon(self) -> int:
        return len(self.actions)

    def first_hit(self, goal: Iterable[int]) -> Optional[int]:
        hits = np.flatnonzero(np.isin(self.states, list(goal)))
        return int(hits[0]) if hits.size else None

    def updates_before(self, t: int) -> int:
        """Post-initial updates strictly before time ``t``."""
        times = self.trigger_times
        return int(np.count_nonzero((times > 0) & (times < t)))

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            np.array_equal(self.states, other.states)
            and np.array_equal(self.actions, other.actions)
            and np.array_equal(self.triggered, other.triggered)
            and self.discounted_cost == other.discounted_cost
            and self.discounted_penalty == other.discounted_penalty
        )


@dataclass(frozen=True)
class RolloutStats:
    num_episodes: int
    mean_cost: float
    stderr_cost: float
    mean_penalty: float
    stderr_penalty: float
    mean_total: float
    stderr_total: float
    mean_updates: float
    mean_steps: float
    savings_ratio: float
    truncation_bound: float
    goal_reached: int


def cumulative_rows(model: MdpModel) -> np.ndarray:
    """Cumulative transition rows with everything after the last positive mass pinned to 1."""
    p = model.transitions
    cum = np.cumsum(p, axis=2)
    positive = p > 0.0
    n = p.shape[2]
    last = n - 1 - np.argmax(positive[:, :, ::-1], axis=2)
    cols = np.arange(n)
    cum[cols[None, None, :] >= last[:, :, None]] = 1.0
    return np.ascontiguousarray(cum)


def episode_uniforms(seed: int, episode: int, horizon: int) -> np.ndarray:
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(episode)])))
    return gen.random(horizon)


def default_horizon(model: MdpModel, config: TriggerConfig, bias: float = 1e-4) -> int:
    """Smallest horizon with truncation bias ``beta**h * c_max / (1 - beta)`` below ``bias``."""
    c_max = float(model.costs.max()) + config.update_penalty
    if c_max <= 0.0:
        return 1
    h = math.log(bias * (1.0 - config.beta) / c_max) / math.log(config.beta)
    return max(1, math.ceil(h))


def truncation_bound(model: MdpModel, config: TriggerConfig, horizon: int) -> float:
    c_max = float(model.costs.max()) + config.update_penalty
    return config.beta**horizon * c_max / (1.0 - config.beta)


def _simulate(model, policy, start, uniforms, config):
    policy.validate(model, config.t_bar)
    if not 0 <= start < model.num_states:
        raise ValueError(f"start state {start} out of range")
    disc = config.beta ** np.arange(uniforms.shape[1])
    return kernels.rollout_batch(
        cumulative_rows(model),
        np.ascontiguousarray(model.costs),
        np.ascontiguousarray(policy.tau),
        np.ascontiguousarray(policy.pi),
        int(start),
        np.ascontiguousarray(uniforms),
        disc,
        float(config.update_penalty),
    )


def rollout(
    model: MdpModel,
    policy: SelfTriggeredPolicy,
    start: int,
    horizon: int,
    seed: int,
    config: TriggerConfig,
    episode: int = 0,
) -> Trajectory:
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    u = episode_uniforms(seed, episode, horizon)[None, :]
    states, actions, triggered, cost, pen = _simulate(model, policy, start, u, config)
    stage = model.costs[states[0, :-1], actions[0]]
    return Trajectory(states[0], actions[0], triggered[0], stage, float(cost[0]), float(pen[0]))


def _stderr(x):
    if len(x) < 2 or np.all(x == x[0]):
        return 0.0
    return float(np.std(x, ddof=1) / math.sqrt(len(x)))


def estimate_cost(
    model: MdpModel,
    policy: SelfTriggeredPolicy,
    start: int,
    horizon: Optional[int],
    num_seeds: int,
    config: TriggerConfig,
    seed: int = 0,
    goal: Optional[Iterable[int]] = None,
) -> RolloutStats:
    """Average discounted cost and penalty over ``num_seeds`` independent episodes.

    ``goal`` (for example the target and absorbing states of a gridworld)
    defines when an episode counts as finished for the step and update
    statistics; without it the full horizon is used.
    """
    if num_seeds < 1:
        raise ValueError("num_seeds must be at least 1")
    if horizon is None:
        horizon = default_horizon(model, config)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    u = np.stack([episode_uniforms(seed, e, horizon) for e in range(num_seeds)])
    states, _, triggered, cost, pen = _simulate(model, policy, start, u, config)
    total = cost + pen
    if goal is not None:
        in_goal = np.isin(states, list(goal))
        reached = in_goal.any(axis=1)
        steps = np.where(reached, np.argmax(in_goal, axis=1), horizon)
    else:
        reached = np.zeros(num_seeds, dtype=bool)
        steps = np.full(num_seeds, horizon)
    t = np.arange(horizon)
    updates = np.count_nonzero(triggered & (t > 0) & (t < steps[:, None]), axis=1)
    total_steps = int(steps.sum())
    savings = 1.0 - updates.sum() / total_steps if total_steps else 0.0
    return RolloutStats(
        num_episodes=num_seeds,
        mean_cost=float(cost.mean()),
        stderr_cost=_stderr(cost),
        mean_penalty=float(pen.mean()),
        stderr_penalty=_stderr(pen),
        mean_total=float(total.mean()),
        stderr_total=_stderr(total),
        mean_updates=float(updates.mean()),
        mean_steps=float(steps.mean()),
        savings_ratio=float(savings),
        truncation_bound=truncation_bound(model, config, horizon),
        goal_reached=int(reached.sum()),
    )


def savings_ratio(updates: int, steps: int) -> float:
    """Fraction of elapsed steps without a post-initial update."""
    if steps < 1:
        raise ValueError("steps must be positive")
    return 1.0 - updates / steps


def trajectory_records(traj: Trajectory, model: MdpModel, label=str):
    """Per-step log rows ``(t, state_label, action_label, triggered, stage_cost)``."""
    for t in range(traj.horizon):
        yield (
            t,
            label(int(traj.states[t])),
            model.action_label(int(traj.actions[t])),
            bool(traj.triggered[t]),
            float(traj.stage_costs[t]),
        )


def write_trajectory_log(fh, traj: Trajectory, model: MdpModel, label=str):
    fh.write("t\tstate\taction\ttriggered\tstage_cost\n")
    for t, s, a, trig, c in trajectory_records(traj, model, label):
        fh.write(f"{t}\t{s}\t{a}\t{int(trig)}\t{c!r}\n")
