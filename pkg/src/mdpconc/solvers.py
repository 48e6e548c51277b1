"""Planning equations: average-reward, discounted and finite-horizon.

Policy evaluation uses dense LAPACK solves; the optimality equations use
value iteration (relative and damped for the average-reward case).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .classify import classify_model, in_pi_ar
from .core import (
    FiniteHorizonPolicy,
    MdpModel,
    StationaryPolicy,
    as_policy,
    induced_chain,
)
from .errors import NoConvergence, NotInPiAR, NotSolvableHint, SingularSystem

ARPE_TOL = 1e-9
TIE_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class AverageEvalSolution:
    lam: float
    v: np.ndarray
    ref_state: int

    @property
    def lambda_(self) -> float:
        return self.lam


@dataclass(frozen=True, eq=False)
class AverageOptimalSolution:
    lambda_star: float
    v_star: np.ndarray
    ref_state: int
    optimal_actions: tuple[tuple[int, ...], ...]
    iterations: int
    final_span: float

    @property
    def optimal_policies(self) -> list[StationaryPolicy]:
        return [StationaryPolicy(d) for d in itertools.product(*self.optimal_actions)]

    @property
    def policy(self) -> StationaryPolicy:
        """Greedy policy with the lowest action index in every state."""
        return StationaryPolicy(tuple(a[0] for a in self.optimal_actions))


@dataclass(frozen=True, eq=False)
class DiscountedSolution:
    gamma: float
    v: np.ndarray
    optimal_actions: tuple[tuple[int, ...], ...] | None = None

    @property
    def policy(self) -> StationaryPolicy | None:
        if self.optimal_actions is None:
            return None
        return StationaryPolicy(tuple(a[0] for a in self.optimal_actions))

    @property
    def optimal_policies(self) -> list[StationaryPolicy]:
        if self.optimal_actions is None:
            return []
        return [StationaryPolicy(d) for d in itertools.product(*self.optimal_actions)]


@dataclass(frozen=True, eq=False)
class FiniteHorizonSolution:
    horizon: int
    v: tuple[np.ndarray, ...]  # V_0 .. V_{h+1}
    policy: FiniteHorizonPolicy | None = None


def _greedy_sets(q: np.ndarray) -> tuple[tuple[int, ...], ...]:
    qmax = q.max(axis=1, keepdims=True)
    tol = TIE_RTOL * np.maximum(1.0, np.abs(qmax))
    return tuple(tuple(np.flatnonzero(row >= m - t).tolist())
                 for row, m, t in zip(q, qmax[:, 0], tol[:, 0]))


def q_values(model: MdpModel, v: np.ndarray, gamma: float = 1.0) -> np.ndarray:
    return model.reward + gamma * (model.transition @ v)


# -- average reward ---------------------------------------------------------


def arpe_residual(model: MdpModel, policy, lam: float, v: np.ndarray) -> float:
    chain = induced_chain(model, as_policy(policy))
    return float(np.max(np.abs(lam + v - chain.reward - chain.transition @ v)))


def solve_arpe(model: MdpModel, policy, ref_state: int = 0,
               check: bool = True) -> AverageEvalSolution:
    """Gain and differential value of a stationary policy, V(ref_state) = 0."""
    policy = as_policy(policy).check(model)
    if not 0 <= ref_state < model.n_states:
        raise ValueError(f"ref_state {ref_state} out of range")
    if check and not in_pi_ar(model, policy):
        raise NotInPiAR(f"policy {policy} induces recurrent classes with different gains")
    chain = induced_chain(model, policy)
    n = model.n_states
    # unknowns: V(0..n-1) with V(ref) replaced by lambda
    A = np.eye(n) - chain.transition
    A[:, ref_state] = 1.0
    b = chain.reward.copy()
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        x, *_ = np.linalg.lstsq(A, b, rcond=None)
    lam = float(x[ref_state])
    v = x.copy()
    v[ref_state] = 0.0
    res = float(np.max(np.abs(lam + v - chain.reward - chain.transition @ v)))
    if not np.all(np.isfinite(x)) or res > ARPE_TOL * max(1.0, model.r_max):
        raise SingularSystem(f"ARPE system for policy {policy} is singular (residual {res:.3g})")
    v.setflags(write=False)
    return AverageEvalSolution(lam, v, ref_state)


def solve_aroe(model: MdpModel, tol: float = 1e-10, max_iter: int = 1_000_000,
               ref_state: int = 0, damping: float = 0.5, force: bool = False,
               cap: int = 10**6) -> AverageOptimalSolution:
    """Relative value iteration on the damped Bellman operator.

    Stops when span(T V - V) <= tol.  The gain estimate is the midpoint of
    the one-step change, so its error is at most tol / 2.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    if not force:
        cls = classify_model(model, cap)
        if cls.weakly_communicating is False:
            raise NotSolvableHint(
                "model is not weakly communicating; pass force=True to iterate anyway")
    v = np.zeros(model.n_states)
    sp = np.inf
    for k in range(1, max_iter + 1):
        tv = q_values(model, v).max(axis=1)
        diff = tv - v
        sp = float(diff.max() - diff.min())
        if sp <= tol:
            break
        v = (1.0 - damping) * v + damping * tv
        v -= v[ref_state]
    else:
        raise NoConvergence(max_iter, sp, "relative value iteration")
    lam = 0.5 * float(diff.max() + diff.min())
    v = v - v[ref_state]
    v.setflags(write=False)
    return AverageOptimalSolution(lam, v, ref_state, _greedy_sets(q_values(model, v)), k, sp)


# -- discounted -------------------------------------------------------------


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    return gamma


def solve_drpe(model: MdpModel, policy, gamma: float) -> DiscountedSolution:
    gamma = _check_gamma(gamma)
    chain = induced_chain(model, as_policy(policy))
    v = np.linalg.solve(np.eye(model.n_states) - gamma * chain.transition, chain.reward)
    v.setflags(write=False)
    return DiscountedSolution(gamma, v)


def solve_droe(model: MdpModel, gamma: float, tol: float = 1e-10,
               max_iter: int = 10_000_000) -> DiscountedSolution:
    """Value iteration; the stopping rule keeps ||V - V*|| <= tol."""
    gamma = _check_gamma(gamma)
    stop = tol * (1.0 - gamma) / (2.0 * gamma)
    v = np.zeros(model.n_states)
    for _ in range(max_iter):
        nv = q_values(model, v, gamma).max(axis=1)
        delta = float(np.max(np.abs(nv - v)))
        v = nv
        if delta <= stop:
            break
    else:
        raise NoConvergence(max_iter, delta, "discounted value iteration")
    v.setflags(write=False)
    return DiscountedSolution(gamma, v, _greedy_sets(q_values(model, v, gamma)))


# -- finite horizon ---------------------------------------------------------


def solve_fhpe(model: MdpModel, fh_policy: FiniteHorizonPolicy) -> FiniteHorizonSolution:
    fh_policy.check(model)
    h = fh_policy.horizon
    idx = np.arange(model.n_states)
    vs = [np.zeros(model.n_states)]
    for t in range(h, -1, -1):
        a = fh_policy[t].as_array()
        vs.append(model.reward[idx, a] + model.transition[idx, a, :] @ vs[-1])
    vs.reverse()
    for x in vs:
        x.setflags(write=False)
    return FiniteHorizonSolution(h, tuple(vs), fh_policy)


def solve_fhdp(model: MdpModel, horizon: int) -> FiniteHorizonSolution:
    """Backward induction; ties go to the lowest action index."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    vs = [np.zeros(model.n_states)]
    stages = []
    for _ in range(horizon + 1):
        q = q_values(model, vs[-1])
        a = q.argmax(axis=1)
        stages.append(StationaryPolicy(a))
        vs.append(q[np.arange(model.n_states), a])
    vs.reverse()
    stages.reverse()
    for x in vs:
        x.setflags(write=False)
    return FiniteHorizonSolution(horizon, tuple(vs), FiniteHorizonPolicy(tuple(stages)))
