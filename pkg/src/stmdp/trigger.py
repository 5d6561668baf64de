"""Self-triggered policies: lookahead tables, penalised DP, greedy guarantee synthesis."""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .mdp import ConvergenceError, MdpModel, _check_values


@dataclass(frozen=True)
class SelfTriggeredPolicy:
    """Waiting times ``tau`` (1-based steps) and held actions ``pi`` per state."""

    tau: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        tau = np.array(self.tau, dtype=np.int64)
        pi = np.array(self.pi, dtype=np.int64)
        if tau.ndim != 1 or tau.shape != pi.shape:
            raise ValueError("tau and pi must be 1-d arrays of equal length")
        if tau.size and tau.min() < 1:
            raise ValueError("waiting times must be at least 1")
        tau.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "pi", pi)

    def __eq__(self, other):
        if not isinstance(other, SelfTriggeredPolicy):
            return NotImplemented
        return np.array_equal(self.tau, other.tau) and np.array_equal(self.pi, other.pi)

    def validate(self, model: MdpModel, t_bar: int):
        n = model.num_states
        if self.tau.shape != (n,):
            raise ValueError(f"policy covers {self.tau.size} states, model has {n}")
        if self.tau.max() > t_bar:
            raise ValueError(f"waiting time exceeds t_bar={t_bar}")
        if self.pi.min() < 0 or self.pi.max() >= model.num_actions:
            raise ValueError("policy contains an invalid action index")


@dataclass(frozen=True)
class TriggerConfig:
    beta: float
    t_bar: int
    update_penalty: float = 0.0
    alpha: float = 1.0
    tolerance: float = 1e-5
    max_iterations: int = 10_000

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if int(self.t_bar) != self.t_bar or self.t_bar < 1:
            raise ValueError(f"t_bar must be a positive integer, got {self.t_bar}")
        if not self.update_penalty >= 0.0:
            raise ValueError(f"update penalty must be nonnegative, got {self.update_penalty}")
        if not self.alpha >= 1.0:
            raise ValueError(f"alpha must be at least 1, got {self.alpha}")
        if not self.tolerance > 0.0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True, eq=False)
class LookaheadTables:
    """Precomputed multi-step quantities for ``dt = 1..t_bar``.

    ``skip[dt - 1, a]`` is ``P_a ** dt``; ``ccost[x, a, dt - 1]`` is the expected
    discounted cost of holding ``a`` for ``dt`` steps from ``x``.
    """

    skip: np.ndarray
    ccost: np.ndarray
    beta: float

    @property
    def t_bar(self) -> int:
        return self.skip.shape[0]

    @property
    def discounts(self) -> np.ndarray:
        return self.beta ** np.arange(1, self.t_bar + 1)

    def skip_transition(self, action: int, dt: int) -> np.ndarray:
        _check_dt(dt, self.t_bar)
        return self.skip[dt - 1, action]

    def consolidated_cost(self, x: int, action: int, dt: int) -> float:
        _check_dt(dt, self.t_bar)
        return float(self.ccost[x, action, dt - 1])


def _check_dt(dt, t_bar=None):
    if int(dt) != dt or dt < 1 or (t_bar is not None and dt > t_bar):
        upper = "" if t_bar is None else f", {t_bar}"
        raise ValueError(f"dt must be an integer in [1{upper}], got {dt}")


def skip_transition(model: MdpModel, action: int, dt: int, t_bar=None) -> np.ndarray:
    """Distribution after holding ``action`` for ``dt`` steps: ``P_a ** dt``."""
    _check_dt(dt, t_bar)
    p = model.transitions[action]
    power = np.eye(model.num_states)
    for _ in range(dt):
        power = power @ p
    return power


def consolidated_cost(model: MdpModel, x: int, action: int, dt: int, beta: float, t_bar=None) -> float:
    """Expected discounted cost over ``dt`` steps from ``x`` with ``action`` held."""
    _check_dt(dt, t_bar)
    p = model.transitions[action]
    c = model.costs[:, action]
    power = np.eye(model.num_states)
    acc = np.zeros(model.num_states)
    for t in range(dt):
        acc = acc + beta**t * (power @ c)
        power = power @ p
    return float(acc[x])


def build_lookahead_tables(model: MdpModel, config: TriggerConfig) -> LookaheadTables:
    m, n = model.num_actions, model.num_states
    t_bar = int(config.t_bar)
    skip = np.empty((t_bar, m, n, n))
    ccost = np.empty((n, m, t_bar))
    for a in range(m):
        p = model.transitions[a]
        c = model.costs[:, a]
        power = np.eye(n)
        acc = np.zeros(n)
        for dt in range(1, t_bar + 1):
            # power == P_a ** (dt - 1) here
            acc = acc + config.beta ** (dt - 1) * (power @ c)
            ccost[:, a, dt - 1] = acc
            power = power @ p
            skip[dt - 1, a] = power
    skip.setflags(write=False)
    ccost.setflags(write=False)
    return LookaheadTables(skip, ccost, config.beta)


class LookaheadResult(NamedTuple):
    values: np.ndarray
    policy: SelfTriggeredPolicy
    iterations: int
    residual: float


def lookahead_q(tables: LookaheadTables, v, penalty: float) -> np.ndarray:
    """Candidate values for every (dt, action, state), shape (T, M, N)."""
    ccost_t = np.ascontiguousarray(tables.ccost.transpose(2, 1, 0))
    w = np.ascontiguousarray(np.asarray(v, dtype=np.float64) + penalty)
    return kernels.lookahead_q(np.ascontiguousarray(tables.skip), ccost_t, tables.discounts, w)


def lookahead_backup(tables: LookaheadTables, config: TriggerConfig, v):
    """One application of the DP operator with optimised lookahead.

    Ties go to the smallest waiting time, then the lowest action index.
    """
    v = np.asarray(v, dtype=np.float64)
    n = tables.skip.shape[2]
    if v.shape != (n,):
        raise ValueError(f"value function must have shape ({n},), got {v.shape}")
    q = lookahead_q(tables, v, config.update_penalty)
    t_bar, m, _ = q.shape
    best, idx = kernels.argmin_first(q.reshape(t_bar * m, n), kernels.TIE_ATOL)
    return best, SelfTriggeredPolicy(idx // m + 1, idx % m)


def lookahead_iterates(tables: LookaheadTables, config: TriggerConfig, v0=None):
    """Yield successive value-iteration iterates, starting with ``v0``."""
    n = tables.skip.shape[2]
    v = np.zeros(n) if v0 is None else np.asarray(v0, dtype=np.float64)
    yield v
    while True:
        v, _ = lookahead_backup(tables, config, v)
        yield v


def solve_problem1(model: MdpModel, config: TriggerConfig, tables=None) -> LookaheadResult:
    """Optimal self-triggered policy under an update penalty.

    Value iteration on the lookahead DP operator from zero; the returned policy
    is greedy with respect to the returned values.
    """
    if tables is None:
        tables = build_lookahead_tables(model, config)
    v = np.zeros(model.num_states)
    residual = np.inf
    for k in range(1, config.max_iterations + 1):
        new_v, policy = lookahead_backup(tables, config, v)
        residual = float(np.max(np.abs(new_v - v)))
        v = new_v
        if residual <= config.tolerance:
            _, policy = lookahead_backup(tables, config, v)
            return LookaheadResult(v, policy, k, residual)
    raise ConvergenceError(
        f"lookahead value iteration did not reach tolerance {config.tolerance} in "
        f"{config.max_iterations} iterations (last change {residual:.3g})",
        v,
        residual,
        config.max_iterations,
        policy,
    )


def _held_policy_operator(model, policy, config, tables):
    policy.validate(model, config.t_bar)
    if tables is None:
        tables = build_lookahead_tables(model, config)
    rows = np.arange(model.num_states)
    dt = policy.tau - 1
    cost = tables.ccost[rows, policy.pi, dt]
    step = tables.skip[dt, policy.pi, rows, :]
    disc = config.beta**policy.tau
    return cost, step, disc


def evaluate_self_triggered(
    model: MdpModel,
    policy: SelfTriggeredPolicy,
    config: TriggerConfig,
    include_penalty: bool = True,
    tables=None,
    method: str = "iterative",
):
    """Discounted cost of a self-triggered policy.

    With ``include_penalty`` each decision pays ``beta**tau * O`` for the next
    update (the initial update is free); without it the result is the plain
    discounted stage cost of the held-action trajectory.
    """
    cost, step, disc = _held_policy_operator(model, policy, config, tables)
    if include_penalty:
        cost = cost + disc * config.update_penalty
    b = disc[:, None] * step
    if method == "direct":
        return np.linalg.solve(np.eye(model.num_states) - b, cost)
    if method != "iterative":
        raise ValueError(f"unknown evaluation method {method!r}")
    v = np.zeros(model.num_states)
    residual = np.inf
    for _ in range(config.max_iterations):
        new_v = cost + b @ v
        residual = float(np.max(np.abs(new_v - v)))
        v = new_v
        if residual <= config.tolerance:
            return v
    raise ConvergenceError(
        f"self-triggered evaluation did not converge in {config.max_iterations} iterations",
        v,
        residual,
        config.max_iterations,
    )


def guarantee_objective(tables: LookaheadTables, classic_v, alpha: float, dt: int) -> np.ndarray:
    """``ccost(x, a, dt) + alpha * beta**dt * E[V(x_dt)]`` with shape (M, N)."""
    ev = tables.skip[dt - 1] @ classic_v
    return tables.ccost[:, :, dt - 1].T + alpha * tables.beta**dt * ev


class GuaranteeResult(NamedTuple):
    policy: SelfTriggeredPolicy
    values: np.ndarray


class InfeasibleGuarantee(RuntimeError):
    """No action satisfies the sufficient condition even with dt = 1."""


def solve_problem2(model: MdpModel, classic_v, config: TriggerConfig, tables=None) -> GuaranteeResult:
    """Greedy longest waiting time subject to the alpha-suboptimality condition.

    For each state the waiting time starts at ``t_bar`` and is decremented
    until some action keeps the objective within ``alpha * V(x)`` (plus the
    solver tolerance as slack). Returns the policy and the accepted objective.
    """
    if not config.alpha >= 1.0:
        raise ValueError(f"alpha must be at least 1, got {config.alpha}")
    classic_v = _check_values(model, classic_v)
    if tables is None:
        tables = build_lookahead_tables(model, config)
    n = model.num_states
    bound = config.alpha * classic_v + config.tolerance
    tau = np.zeros(n, dtype=np.int64)
    pi = np.zeros(n, dtype=np.int64)
    v_tilde = np.full(n, np.nan)
    pending = np.ones(n, dtype=bool)
    for dt in range(int(config.t_bar), 0, -1):
        best, idx = kernels.argmin_first(guarantee_objective(tables, classic_v, config.alpha, dt), kernels.TIE_ATOL)
        accept = pending & (best <= bound)
        tau[accept] = dt
        pi[accept] = idx[accept]
        v_tilde[accept] = best[accept]
        pending &= ~accept
        if not pending.any():
            break
    if pending.any():
        bad = np.flatnonzero(pending).tolist()
        raise InfeasibleGuarantee(
            f"no feasible action at dt=1 for states {bad}; classic values are not a converged optimum"
        )
    return GuaranteeResult(SelfTriggeredPolicy(tau, pi), v_tilde)


class GuaranteeReport(NamedTuple):
    objective: np.ndarray
    condition_holds: np.ndarray
    policy_values: np.ndarray
    bound_holds: np.ndarray

    @property
    def ok(self) -> bool:
        return bool(self.condition_holds.all() and self.bound_holds.all())


def verify_guarantee(model: MdpModel, policy: SelfTriggeredPolicy, classic_v, config: TriggerConfig, tables=None):
    """Check the per-state sufficient condition and the end-to-end bound ``v^mu <= alpha V``."""
    classic_v = _check_values(model, classic_v)
    if tables is None:
        tables = build_lookahead_tables(model, config)
    cost, step, disc = _held_policy_operator(model, policy, config, tables)
    objective = cost + config.alpha * disc * (step @ classic_v)
    bound = config.alpha * classic_v + config.tolerance
    v_mu = evaluate_self_triggered(model, policy, config, include_penalty=False, tables=tables)
    return GuaranteeReport(objective, objective <= bound, v_mu, v_mu <= bound)
