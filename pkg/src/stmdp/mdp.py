"""Finite discounted MDPs and classic Bellman machinery."""
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import kernels

STOCHASTIC_ATOL = 1e-12


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver hits its iteration cap.

    The last iterate and its sup-norm change are kept on the exception.
    """

    def __init__(self, message, values, residual, iterations, policy=None):
        super().__init__(message)
        self.values = values
        self.residual = residual
        self.iterations = iterations
        self.policy = policy


@dataclass(frozen=True, eq=False)
class MdpModel:
    """Finite MDP ``{X, A, P, c}``.

    ``transitions[a, x, y]`` is ``P(y | x, a)`` and ``costs[x, a]`` is the
    stage cost. Arrays are copied and made read-only on construction.
    """

    transitions: np.ndarray
    costs: np.ndarray
    action_labels: Optional[Sequence[str]] = None

    def __post_init__(self):
        p = np.array(self.transitions, dtype=np.float64)
        c = np.array(self.costs, dtype=np.float64)
        if p.ndim != 3 or p.shape[1] != p.shape[2]:
            raise ValueError(f"transitions must have shape (M, N, N), got {p.shape}")
        m, n, _ = p.shape
        if c.shape != (n, m):
            raise ValueError(f"costs must have shape ({n}, {m}), got {c.shape}")
        if not np.all(np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0:
            raise ValueError("transition probabilities must lie in [0, 1]")
        row_err = np.abs(p.sum(axis=2) - 1.0).max()
        if row_err > STOCHASTIC_ATOL:
            raise ValueError(f"transition rows must sum to 1 (max error {row_err:.3g})")
        if not np.all(np.isfinite(c)) or c.min() < 0.0:
            raise ValueError("costs must be finite and nonnegative")
        labels = self.action_labels
        if labels is not None:
            labels = tuple(str(s) for s in labels)
            if len(labels) != m:
                raise ValueError(f"expected {m} action labels, got {len(labels)}")
        p.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "transitions", p)
        object.__setattr__(self, "costs", c)
        object.__setattr__(self, "action_labels", labels)

    @property
    def num_states(self) -> int:
        return self.transitions.shape[1]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[0]

    def action_label(self, a: int) -> str:
        if self.action_labels is None:
            return str(a)
        return self.action_labels[a]

    def same_as(self, other: "MdpModel") -> bool:
        return (
            self.transitions.shape == other.transitions.shape
            and np.array_equal(self.transitions, other.transitions)
            and np.array_equal(self.costs, other.costs)
            and all(self.action_label(a) == other.action_label(a) for a in range(self.num_actions))
        )


@dataclass(frozen=True)
class SolverConfig:
    beta: float
    tolerance: float = 1e-5
    max_iterations: int = 10_000

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.tolerance > 0.0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


class VIResult(NamedTuple):
    values: np.ndarray
    policy: np.ndarray
    iterations: int
    residual: float


def _check_values(model, v):
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (model.num_states,):
        raise ValueError(f"value function must have shape ({model.num_states},), got {v.shape}")
    return v


def _check_policy(model, policy):
    policy = np.asarray(policy)
    if policy.shape != (model.num_states,):
        raise ValueError(f"policy must have shape ({model.num_states},), got {policy.shape}")
    if not np.issubdtype(policy.dtype, np.integer):
        raise ValueError("policy entries must be integer action indices")
    if policy.min() < 0 or policy.max() >= model.num_actions:
        raise ValueError("policy contains an invalid action index")
    return policy.astype(np.int64)


def q_values(model: MdpModel, beta: float, v) -> np.ndarray:
    """One-step lookahead values, shape (M, N)."""
    v = _check_values(model, v)
    return model.costs.T + beta * (model.transitions @ v)


def bellman_backup(model: MdpModel, beta: float, v):
    """Apply the Bellman optimality operator once.

    Returns the backed-up values and the greedy policy; ties go to the lowest
    action index.
    """
    q = q_values(model, beta, v)
    best, idx = kernels.argmin_first(np.ascontiguousarray(q), kernels.TIE_ATOL)
    return best, idx


def classic_value_iteration(model: MdpModel, config: SolverConfig, v0=None) -> VIResult:
    """Value iteration from ``v0`` (zeros by default) to sup-norm tolerance."""
    v = np.zeros(model.num_states) if v0 is None else _check_values(model, v0).copy()
    residual = np.inf
    for k in range(1, config.max_iterations + 1):
        new_v, policy = bellman_backup(model, config.beta, v)
        residual = float(np.max(np.abs(new_v - v)))
        v = new_v
        if residual <= config.tolerance:
            return VIResult(v, policy, k, residual)
    raise ConvergenceError(
        f"value iteration did not reach tolerance {config.tolerance} in "
        f"{config.max_iterations} iterations (last change {residual:.3g})",
        v,
        residual,
        config.max_iterations,
        policy,
    )


def policy_matrix(model: MdpModel, policy):
    """Transition matrix and cost vector induced by a stationary policy."""
    policy = _check_policy(model, policy)
    rows = np.arange(model.num_states)
    return model.transitions[policy, rows, :], model.costs[rows, policy]


def classic_policy_evaluation(model: MdpModel, policy, config: SolverConfig, method: str = "iterative"):
    """Discounted cost ``v^phi`` of a stationary policy.

    ``method="iterative"`` runs fixed-point iteration from zero to the
    configured tolerance; ``method="direct"`` solves the linear system.
    """
    p, c = policy_matrix(model, policy)
    if method == "direct":
        return np.linalg.solve(np.eye(model.num_states) - config.beta * p, c)
    if method != "iterative":
        raise ValueError(f"unknown evaluation method {method!r}")
    v = np.zeros(model.num_states)
    residual = np.inf
    for _ in range(config.max_iterations):
        new_v = c + config.beta * (p @ v)
        residual = float(np.max(np.abs(new_v - v)))
        v = new_v
        if residual <= config.tolerance:
            return v
    raise ConvergenceError(
        f"policy evaluation did not converge in {config.max_iterations} iterations",
        v,
        residual,
        config.max_iterations,
    )
