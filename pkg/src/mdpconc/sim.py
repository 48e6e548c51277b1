"""Seeded simulation, martingale traces and Monte Carlo validation experiments.

Random draws come from `rng` keyed by (seed, stream, run, counter):
counter 0 draws the initial state, counter t+1 draws S_{t+1}.  Streams:
0 for the primary policy, 1 for a second policy (or learner), 2 for a
learner's own action randomness.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from . import bounds as B
from .classify import structure_of
from .core import (
    FiniteHorizonPolicy,
    MdpModel,
    StationaryPolicy,
    as_policy,
    induced_chain,
)
from .errors import DomainError, InconsistentValueFunction, SigmaDegenerate
from .rng import inverse_cdf, run_keys, sampling_cdf, uniforms_from_keys
from .solvers import (
    AverageEvalSolution,
    AverageOptimalSolution,
    DiscountedSolution,
    FiniteHorizonSolution,
    solve_arpe,
)
from .stats import _kdev, _sigma, diameter, dispersion, fh_dispersion, span

STREAM_PRIMARY, STREAM_SECOND, STREAM_LEARNER = 0, 1, 2
BLOCK = 4096
CHUNK = 1000
IDENTITY_RTOL = 1e-9
VALUE_TOL = 1e-6


def n_threads() -> int:
    env = os.environ.get("MDPCONC_THREADS")
    if env:
        return max(1, int(env))
    return max(1, min(4, os.cpu_count() or 1))


# -- learning policies ------------------------------------------------------


class LearningPolicy:
    """A possibly history-dependent policy.

    Subclasses implement `act`; `act_batch` may be overridden for speed.
    `u` is a uniform in [0, 1) reserved for the policy's own randomness.
    """

    name = "learning"

    def act(self, t: int, state: int, u: float, past_states: np.ndarray,
            past_actions: np.ndarray) -> int:
        raise NotImplementedError

    def act_batch(self, t: int, states: np.ndarray, u: np.ndarray,
                  past_states: np.ndarray, past_actions: np.ndarray) -> np.ndarray:
        return np.array([self.act(t, int(s), float(x), ps, pa)
                         for s, x, ps, pa in zip(states, u, past_states, past_actions)],
                        dtype=np.intp)


class UniformRandomPolicy(LearningPolicy):
    name = "uniform-random"

    def __init__(self, n_actions: int):
        self.n_actions = n_actions

    def act(self, t, state, u, past_states, past_actions):
        return int(u * self.n_actions)

    def act_batch(self, t, states, u, past_states, past_actions):
        return np.minimum((u * self.n_actions).astype(np.intp), self.n_actions - 1)


class FixedPolicy(LearningPolicy):
    """Wraps a stationary policy in the learner interface."""

    def __init__(self, policy):
        self.policy = as_policy(policy)
        self.name = f"fixed[{self.policy}]"
        self._table = self.policy.as_array()

    def act(self, t, state, u, past_states, past_actions):
        return int(self._table[state])

    def act_batch(self, t, states, u, past_states, past_actions):
        return self._table[states]


# -- trajectories -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    seed: int
    run: int = 0
    policy_id: str = ""

    @property
    def T(self) -> int:
        return len(self.actions)


def _policy_id(policy) -> str:
    if isinstance(policy, StationaryPolicy):
        return f"stationary[{policy}]"
    if isinstance(policy, FiniteHorizonPolicy):
        return f"finite-horizon[h={policy.horizon}]"
    return getattr(policy, "name", type(policy).__name__)


def _initial_states(model: MdpModel, initial, keys: np.ndarray) -> np.ndarray:
    n = keys.shape[0]
    if np.ndim(initial) == 0:
        s0 = int(initial)
        if not 0 <= s0 < model.n_states:
            raise DomainError(f"initial state {s0} out of range")
        return np.full(n, s0, dtype=np.intp)
    rho = np.asarray(initial, dtype=float)
    if rho.shape != (model.n_states,) or abs(rho.sum() - 1.0) > 1e-12 or (rho < 0).any():
        raise DomainError("initial distribution must be a probability vector over states")
    u = uniforms_from_keys(keys, 0, 1)[:, 0]
    return inverse_cdf(np.broadcast_to(sampling_cdf(rho), (n, model.n_states)), u)


def simulate_batch(model: MdpModel, policy, T: int, seed: int, runs, initial=0,
                   stream: int = STREAM_PRIMARY,
                   learner_stream: int = STREAM_LEARNER) -> tuple[np.ndarray, np.ndarray]:
    """States [run, 0..T] and actions [run, 0..T-1] for the given run indices."""
    if T < 1:
        raise DomainError("T must be >= 1")
    runs = np.atleast_1d(np.asarray(runs, dtype=np.int64))
    keys = run_keys(seed, stream, runs)
    n = runs.size
    cdf = sampling_cdf(model.transition)  # (S, A, S)
    states = np.empty((n, T + 1), dtype=np.intp)
    actions = np.empty((n, T), dtype=np.intp)
    states[:, 0] = _initial_states(model, initial, keys)

    learner = None
    if isinstance(policy, LearningPolicy):
        learner = policy
        lkeys = run_keys(seed, learner_stream, runs)
    elif isinstance(policy, FiniteHorizonPolicy):
        policy.check(model)
        if T > policy.horizon + 1:
            raise DomainError(f"T={T} exceeds horizon+1={policy.horizon + 1}")
        table = policy.as_array()
    else:
        table = as_policy(policy).check(model).as_array()

    for b0 in range(0, T, BLOCK):
        nb = min(BLOCK, T - b0)
        u = uniforms_from_keys(keys, b0 + 1, nb)
        ul = uniforms_from_keys(lkeys, b0, nb) if learner is not None else None
        for j in range(nb):
            t = b0 + j
            s = states[:, t]
            if learner is not None:
                a = learner.act_batch(t, s, ul[:, j], states[:, : t + 1], actions[:, :t])
            elif table.ndim == 2:
                a = table[t, s]
            else:
                a = table[s]
            actions[:, t] = a
            states[:, t + 1] = inverse_cdf(cdf[s, a], u[:, j])
    return states, actions


def simulate(model: MdpModel, policy, T: int, seed: int, initial=0, run: int = 0,
             stream: int = STREAM_PRIMARY) -> Trajectory:
    states, actions = simulate_batch(model, policy, T, seed, [run], initial, stream)
    s, a = states[0], actions[0]
    r = model.reward[s[:-1], a]
    for x in (s, a, r):
        x.setflags(write=False)
    return Trajectory(s, a, r, int(seed), int(run), _policy_id(policy))


def cumulative_reward(traj: Trajectory) -> float:
    return float(np.sum(traj.rewards))


def discounted_reward(traj: Trajectory, gamma: float) -> float:
    return float(np.sum(gamma ** np.arange(traj.T) * traj.rewards))


# -- martingale traces ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MartingaleTrace:
    m: np.ndarray  # terms for t = 1..T
    partial_sums: np.ndarray  # prefix sums, index t-1 holds sum_{tau<=t}
    sigma_cum: np.ndarray  # Sigma_0 .. Sigma_T
    reward: float  # R_T (discounted for that flavour)
    remainder: float  # the non-martingale part of the decomposition
    identity_residual: float

    @property
    def relative_residual(self) -> float:
        return abs(self.identity_residual) / (1.0 + abs(self.reward))


def _value_vector(v) -> np.ndarray:
    if isinstance(v, (AverageEvalSolution, DiscountedSolution)):
        return np.asarray(v.v, dtype=float)
    if isinstance(v, AverageOptimalSolution):
        return np.asarray(v.v_star, dtype=float)
    return np.asarray(v, dtype=float)


def martingale_trace(model: MdpModel, policy, v, traj: Trajectory, flavor: str = "average",
                     lam: float | None = None, gamma: float | None = None) -> MartingaleTrace:
    """Martingale difference terms and the decomposition residual of one path.

    flavor "average": M_t = V(S_t) - (P V)(S_{t-1}); needs lam (or an
    AverageEvalSolution as v).  "discounted": N_t with the same form; needs
    gamma (or a DiscountedSolution).  "finite_horizon": v is the list of
    stage values V_0..V_{h+1} (or a FiniteHorizonSolution) and policy a
    FiniteHorizonPolicy.
    """
    s = np.asarray(traj.states, dtype=np.intp)
    r = np.asarray(traj.rewards, dtype=float)
    T = len(r)
    if flavor == "finite_horizon":
        return _fh_trace(model, policy, v, s, r)
    if isinstance(v, AverageEvalSolution) and lam is None:
        lam = v.lam
    if isinstance(v, DiscountedSolution) and gamma is None:
        gamma = v.gamma
    V = _value_vector(v)
    chain = induced_chain(model, as_policy(policy))
    P, rp = chain.transition, chain.reward
    PV = P @ V
    m = V[s[1:]] - PV[s[:-1]]
    sig_cum = np.concatenate(([0.0], np.cumsum(_sigma(P, V)[s[:-1]] ** 2)))
    if flavor == "average":
        if lam is None:
            d = rp + PV - V
            lam = 0.5 * float(d.max() + d.min())
        res = float(np.max(np.abs(lam + V - rp - PV)))
        if res > VALUE_TOL * max(1.0, model.r_max):
            raise InconsistentValueFunction(f"ARPE residual {res:.3g} for the supplied (lam, V)")
        R = float(np.sum(r))
        rem = T * lam + V[s[0]] - V[s[-1]]
        resid = R - float(np.sum(m)) - rem
        return MartingaleTrace(m, np.cumsum(m), sig_cum, R, rem, resid)
    if flavor == "discounted":
        if gamma is None:
            raise DomainError("discounted flavor needs gamma")
        res = float(np.max(np.abs(V - rp - gamma * PV)))
        if res > VALUE_TOL * max(1.0, float(np.max(np.abs(V)))):
            raise InconsistentValueFunction(f"DRPE residual {res:.3g} for the supplied V")
        disc = gamma ** np.arange(T + 1)
        R = float(np.sum(disc[:-1] * r))
        wm = disc[1:] * m
        rem = V[s[0]] - disc[-1] * V[s[-1]]
        resid = R - float(np.sum(wm)) - rem
        return MartingaleTrace(m, np.cumsum(wm), sig_cum, R, rem, resid)
    raise ValueError(f"unknown flavor {flavor!r}")


def _stage_values(v) -> list[np.ndarray]:
    if isinstance(v, FiniteHorizonSolution):
        return [np.asarray(x, dtype=float) for x in v.v]
    return [np.asarray(x, dtype=float) for x in v]


def _fh_trace(model, fh_policy: FiniteHorizonPolicy, v, s, r) -> MartingaleTrace:
    vs = _stage_values(v)
    h = fh_policy.horizon
    T = len(r)
    if len(vs) != h + 2:
        raise InconsistentValueFunction("need stage values V_0..V_{h+1}")
    if T > h + 1:
        raise DomainError(f"trajectory length {T} exceeds h+1")
    Ps, rs = [], []
    for t in range(h + 1):
        c = induced_chain(model, fh_policy[t])
        Ps.append(c.transition)
        rs.append(c.reward)
    res = max(float(np.max(np.abs(vs[t] - rs[t] - Ps[t] @ vs[t + 1]))) for t in range(h + 1))
    if res > VALUE_TOL * max(1.0, float(np.max(np.abs(vs[0])))):
        raise InconsistentValueFunction(f"FHPE residual {res:.3g} for the supplied stage values")
    # W_t = V_t(S_t) - E[V_t(S_t) | S_{t-1}, pi_{t-1}]
    w = np.array([vs[t][s[t]] - Ps[t - 1][s[t - 1]] @ vs[t] for t in range(1, T + 1)])
    sig = np.array([_sigma(Ps[t], vs[t + 1])[s[t]] ** 2 for t in range(T)])
    R = float(np.sum(r))
    rem = vs[0][s[0]] - vs[T][s[T]]
    resid = R - float(np.sum(w)) - rem
    return MartingaleTrace(w, np.cumsum(w), np.concatenate(([0.0], np.cumsum(sig))), R, rem, resid)


# -- bound requests from solved models --------------------------------------


def build_request(kind: str, T: int, delta: float, model: MdpModel, policy=None, solution=None,
                  policy2=None, solution2=None, conservative: bool = False,
                  support_only: bool = False, diam: float | None = None) -> B.BoundRequest:
    """Compute the dispersion inputs a bound kind needs and package them."""
    common = dict(kind=kind, T=T, delta=delta, r_max=model.r_max, conservative=conservative)
    if kind.startswith("policy_independent") or kind.startswith("regret_gap_model"):
        return B.BoundRequest(D=diameter(model) if diam is None else diam, **common)
    if kind.startswith("fh"):
        fh = fh_dispersion(model, policy, solution, support_only)
        fh2 = None
        if kind.startswith("fh_two_policy"):
            fh2 = fh_dispersion(model, policy2, solution2, support_only)
        return B.BoundRequest(fh=fh, fh2=fh2, **common)
    P = induced_chain(model, as_policy(policy)).transition
    V = _value_vector(solution)
    K, H = _kdev(P, V, support_only), span(V)
    K2 = H2 = None
    if kind.startswith("two_policy") or kind.startswith("disc_two_policy"):
        P2 = induced_chain(model, as_policy(policy2)).transition
        V2 = _value_vector(solution2)
        K2, H2 = _kdev(P2, V2, support_only), span(V2)
    gamma = solution.gamma if isinstance(solution, DiscountedSolution) else None
    return B.BoundRequest(K=K, H=H, K2=K2, H2=H2, gamma=gamma, **common)


# -- coverage ---------------------------------------------------------------


@dataclass(frozen=True)
class CoverageReport:
    bound_kind: str
    delta: float
    T: int
    reading: str
    n_runs: int
    violations: int
    bound_value: float
    applicable: bool
    threshold_T0: int | None
    margin_quantiles: dict = field(default_factory=dict)

    @property
    def coverage(self) -> float:
        return 1.0 - self.violations / self.n_runs

    @property
    def required(self) -> float:
        d = self.delta
        return 1.0 - d - 3.0 * math.sqrt(d * (1.0 - d) / self.n_runs)

    @property
    def passed(self) -> bool:
        return self.coverage >= self.required

    def to_dict(self) -> dict:
        return {
            "bound_kind": self.bound_kind, "delta": self.delta, "T": self.T,
            "reading": self.reading, "n_runs": self.n_runs, "violations": self.violations,
            "coverage": self.coverage, "required": self.required, "passed": self.passed,
            "bound_value": self.bound_value, "applicable": self.applicable,
            "threshold_T0": self.threshold_T0, "margin_quantiles": self.margin_quantiles,
        }


QUANTILES = (0.0, 0.01, 0.05, 0.5, 0.95, 1.0)


def _reward_paths(model, states, actions, gamma=None) -> np.ndarray:
    r = model.reward[states[:, :-1], actions]
    if gamma is not None:
        r = r * gamma ** np.arange(r.shape[1])
    out = np.zeros((r.shape[0], r.shape[1] + 1))
    np.cumsum(r, axis=1, out=out[:, 1:])
    return out


def _centre_paths(family: str, sol, states) -> np.ndarray:
    """Value-function correction V(S_0) - [discount] V(S_t), per run and t."""
    t = np.arange(states.shape[1])
    if family == "average":
        V = _value_vector(sol)
        return V[states[:, :1]] - V[states]
    if family == "discounted":
        V = _value_vector(sol)
        return V[states[:, :1]] - (sol.gamma ** t) * V[states]
    vs = _stage_values(sol)
    return vs[0][states[:, :1]] - np.stack([vs[k][states[:, k]] for k in t], axis=1)


def _lhs_paths(kind: str, family: str, model, sol, st, ac, sol2=None, st2=None, ac2=None):
    gamma = sol.gamma if family == "discounted" else None
    R = _reward_paths(model, st, ac, gamma)
    t = np.arange(R.shape[1])
    two = "two_policy" in kind or "two_optimal" in kind
    if family == "average":
        lam = sol.lam if isinstance(sol, AverageEvalSolution) else sol.lambda_star
        if not two:
            dev = R - t * lam
            if kind in ("azuma_centered", "lil_centered"):
                dev = dev - _centre_paths(family, sol, st)
            return np.abs(dev)
        R2 = _reward_paths(model, st2, ac2)
        if "two_optimal" in kind:
            return np.abs(R - R2)
        lam2 = sol2.lam
        return np.abs(np.abs(R - R2) - t * abs(lam - lam2))
    if not two:
        if "uncentered" in kind:
            V0 = _value_vector(sol) if family == "discounted" else _stage_values(sol)[0]
            return np.abs(R - V0[st[:, :1]])
        return np.abs(R - _centre_paths(family, sol, st))
    R2 = _reward_paths(model, st2, ac2, gamma)
    c1 = _centre_paths(family, sol, st)
    c2 = _centre_paths(family, sol2, st2)
    return np.abs(np.abs(R - R2) - np.abs(c1 - c2))


def coverage_experiment(model: MdpModel, policy, solution, request: B.BoundRequest,
                        n_runs: int, T: int | None = None, base_seed: int = 0,
                        reading: str = "per_T", initial=0, policy2=None, solution2=None,
                        chunk: int = CHUNK, threads: int | None = None) -> CoverageReport:
    """Fraction of seeded runs on which the bound's inequality holds.

    per_T checks the inequality at T only; uniform checks every t in
    [T0, T] (T0 = 1 for Azuma-type kinds) and counts a run as violating if
    any of those times fails.
    """
    reading = reading.replace("-", "_")
    if reading not in ("per_T", "per_t", "uniform"):
        raise DomainError(f"reading must be per_T or uniform, got {reading!r}")
    reading = "uniform" if reading == "uniform" else "per_T"
    T = request.T if T is None else int(T)
    req = request.with_T(T)
    final = B.evaluate(req)
    family = req.family
    two = "two_policy" in req.kind or "two_optimal" in req.kind
    if two and policy2 is None:
        raise DomainError(f"{req.kind} needs policy2")
    if "two_optimal" in req.kind and solution2 is None:
        solution2 = solution
    if reading == "uniform":
        t_lo = min(final.threshold_T0 or 1, T)
        env = np.array([B.evaluate(req.with_T(t)).value for t in range(t_lo, T + 1)])
    else:
        t_lo = T
        env = np.array([final.value])

    def run_chunk(c0: int):
        runs = np.arange(c0, min(c0 + chunk, n_runs))
        st, ac = simulate_batch(model, policy, T, base_seed, runs, initial, STREAM_PRIMARY)
        st2 = ac2 = None
        if two:
            st2, ac2 = simulate_batch(model, policy2, T, base_seed, runs, initial, STREAM_SECOND)
        lhs = _lhs_paths(req.kind, family, model, solution, st, ac, solution2, st2, ac2)
        margin = (env[None, :] - lhs[:, t_lo: T + 1]).min(axis=1)
        return int(np.sum(margin < 0.0)), margin

    starts = list(range(0, n_runs, chunk))
    workers = threads or n_threads()
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run_chunk, starts))
    else:
        parts = [run_chunk(c) for c in starts]
    violations = sum(p[0] for p in parts)
    margins = np.concatenate([p[1] for p in parts])
    q = {f"{x:g}": float(np.quantile(margins, x)) for x in QUANTILES}
    return CoverageReport(req.kind, float(req.delta), T, reading, int(n_runs), violations,
                          final.value, final.applicable, final.threshold_T0, q)


# -- asymptotic experiments -------------------------------------------------


@dataclass(frozen=True)
class LlnReport:
    T: int
    n_runs: int
    lam: float
    max_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation < self.tolerance

    def to_dict(self) -> dict:
        return {"T": self.T, "n_runs": self.n_runs, "lambda": self.lam,
                "max_deviation": self.max_deviation, "tolerance": self.tolerance,
                "passed": self.passed}


def lln_experiment(model: MdpModel, policy, T: int, n_runs: int, base_seed: int = 0,
                   tolerance: float = 0.02, initial=0, lam: float | None = None) -> LlnReport:
    if lam is None:
        lam = solve_arpe(model, policy).lam
    runs = np.arange(n_runs)
    st, ac = simulate_batch(model, policy, T, base_seed, runs, initial)
    R = model.reward[st[:, :-1], ac].sum(axis=1)
    dev = float(np.max(np.abs(R / T - lam)))
    return LlnReport(int(T), int(n_runs), float(lam), dev, tolerance)


def _omega0_proxy(P: np.ndarray, sigma: np.ndarray) -> bool:
    """sigma > 0 somewhere in every recurrent class (sufficient for Sigma_t -> inf)."""
    cs = structure_of(P > 0.0)
    return all(any(sigma[i] > 0.0 for i in cls) for cls in cs.recurrent_classes)


@dataclass(frozen=True)
class CltReport:
    t_level: float
    n_samples: int
    ks_statistic: float
    p_value: float
    mean_nu: float
    max_nu: int
    tolerance: float = 0.05

    @property
    def passed(self) -> bool:
        return self.ks_statistic < self.tolerance

    def to_dict(self) -> dict:
        return {"t_level": self.t_level, "n_samples": self.n_samples,
                "ks_statistic": self.ks_statistic, "p_value": self.p_value,
                "mean_nu": self.mean_nu, "max_nu": self.max_nu,
                "tolerance": self.tolerance, "passed": self.passed}


def clt_experiment(model: MdpModel, policy, solution: AverageEvalSolution, t_level: float,
                   n_samples: int, base_seed: int = 0, initial=0, sigma=None,
                   tolerance: float = 0.05) -> CltReport:
    """KS distance of (R_nu - nu lam)/sqrt(t) to N(0,1), nu the first T with Sigma_T >= t."""
    policy = as_policy(policy).check(model)
    chain = induced_chain(model, policy)
    V = _value_vector(solution)
    sig = _sigma(chain.transition, V) if sigma is None else np.asarray(sigma, float)
    if not np.any(sig > 0.0) or not _omega0_proxy(chain.transition, sig):
        raise SigmaDegenerate("sigma vanishes on a recurrent class; Sigma_t stays bounded")
    cap = int(math.ceil(100.0 * t_level / float(np.min(sig[sig > 0.0])) ** 2))
    sig2 = sig**2
    table = policy.as_array()
    cdf = sampling_cdf(model.transition)
    keys = run_keys(base_seed, STREAM_PRIMARY, np.arange(n_samples))
    s = _initial_states(model, initial, keys)
    n = n_samples
    Sigma = np.zeros(n)
    R = np.zeros(n)
    nu = np.zeros(n, dtype=np.int64)
    z = np.full(n, np.nan)
    active = np.arange(n)
    t = 0
    while active.size:
        if t >= cap:
            raise SigmaDegenerate(f"stopping time exceeded the cap of {cap} steps")
        nb = min(BLOCK, cap - t)
        u = uniforms_from_keys(keys[active], t + 1, nb)
        cur = s[active]
        for j in range(nb):
            a = table[cur]
            R[active] += chain.reward[cur]
            Sigma[active] += sig2[cur]
            cur = inverse_cdf(cdf[cur, a], u[:, j])
            done = Sigma[active] >= t_level
            if done.any():
                idx = active[done]
                nu[idx] = t + j + 1
                z[idx] = (R[idx] - nu[idx] * solution.lam) / math.sqrt(t_level)
                keep = ~done
                active, cur, u = active[keep], cur[keep], u[keep]
                if not active.size:
                    break
        s[active] = cur
        t += nb
    ks = sps.kstest(z, "norm")
    return CltReport(float(t_level), int(n), float(ks.statistic), float(ks.pvalue),
                     float(nu.mean()), int(nu.max()), tolerance)


@dataclass(frozen=True)
class LilReport:
    T_max: int
    n_runs: int
    sup_ratio: float
    per_run_sup: tuple[float, ...]
    start_sigma: float
    band: tuple[float, float] = (0.5, 1.5)
    heuristic: bool = True

    @property
    def in_band(self) -> bool:
        return self.band[0] < self.sup_ratio < self.band[1]

    def to_dict(self) -> dict:
        return {"T_max": self.T_max, "n_runs": self.n_runs, "sup_ratio": self.sup_ratio,
                "per_run_sup": list(self.per_run_sup), "start_sigma": self.start_sigma,
                "band": list(self.band), "in_band": self.in_band, "heuristic": True}


def lil_envelope_experiment(model: MdpModel, policy, solution, T_max: int, n_runs: int,
                            base_seed: int = 0, initial=0, start_sigma: float = math.e,
                            band=(0.5, 1.5)) -> LilReport:
    """sup over runs and t of |sum M| / sqrt(2 Sigma_t ln ln Sigma_t), for Sigma_t > start_sigma.

    Heuristic finite-T check of an asymptotic statement.
    """
    policy = as_policy(policy).check(model)
    P = induced_chain(model, policy).transition
    V = _value_vector(solution)
    sig2 = _sigma(P, V) ** 2
    if not np.any(sig2 > 0.0):
        raise SigmaDegenerate("sigma is identically zero; the envelope is undefined")
    PV = P @ V
    start = max(float(start_sigma), math.e)
    sups = []
    for r0 in range(0, n_runs, CHUNK):
        runs = np.arange(r0, min(r0 + CHUNK, n_runs))
        st, _ = simulate_batch(model, policy, T_max, base_seed, runs, initial)
        msum = np.cumsum(V[st[:, 1:]] - PV[st[:, :-1]], axis=1)
        Sig = np.cumsum(sig2[st[:, :-1]], axis=1)
        ok = Sig > start
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(ok, np.abs(msum) / np.sqrt(2.0 * Sig * np.log(np.log(Sig))), -np.inf)
        sups.extend(ratio.max(axis=1).tolist())
    if not np.isfinite(max(sups)):
        raise SigmaDegenerate(f"Sigma_t never exceeded {start} within T_max")
    return LilReport(int(T_max), int(n_runs), float(max(sups)), tuple(sups), start, tuple(band))


# -- regret gap -------------------------------------------------------------


@dataclass(frozen=True)
class RegretGapReport:
    T: int
    n_runs: int
    J_star: float
    K_star: float
    H_star: float
    delta: float
    kind: str
    bound_value: float
    violations: int
    max_identity_residual: float
    max_abs_gap_over_T: float
    max_abs_gap_over_lil_rate: float
    rate_times: tuple[int, ...]
    gap_over_T: tuple[float, ...]
    gap_over_lil_rate: tuple[float, ...]
    mean_cumulative_regret: float
    mean_interim_regret: float

    @property
    def coverage(self) -> float:
        return 1.0 - self.violations / self.n_runs

    @property
    def required(self) -> float:
        d = self.delta
        return 1.0 - d - 3.0 * math.sqrt(d * (1.0 - d) / self.n_runs)

    @property
    def identity_holds(self) -> bool:
        return self.max_identity_residual <= IDENTITY_RTOL

    @property
    def passed(self) -> bool:
        return self.coverage >= self.required and self.identity_holds

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d.update(coverage=self.coverage, required=self.required,
                 identity_holds=self.identity_holds, passed=self.passed,
                 rate_times=list(self.rate_times), gap_over_T=list(self.gap_over_T),
                 gap_over_lil_rate=list(self.gap_over_lil_rate))
        return d


@dataclass(frozen=True, eq=False)
class RegretPaths:
    optimal_reward: np.ndarray  # R^{pi*}_t, [run, t]
    learner_reward: np.ndarray  # R^mu_t
    interim: np.ndarray
    cumulative: np.ndarray
    gap: np.ndarray  # cumulative - interim


def regret_paths(model: MdpModel, aroe_solution: AverageOptimalSolution, learner, T: int,
                 runs, base_seed: int = 0, initial=0, learner_stream: int = STREAM_SECOND,
                 optimal_policy=None) -> RegretPaths:
    pi_star = optimal_policy or aroe_solution.policy
    J = aroe_solution.lambda_star
    st, ac = simulate_batch(model, pi_star, T, base_seed, runs, initial, STREAM_PRIMARY)
    st2, ac2 = simulate_batch(model, learner, T, base_seed, runs, initial, learner_stream)
    Rs = _reward_paths(model, st, ac)
    Rm = _reward_paths(model, st2, ac2)
    t = np.arange(T + 1)
    interim = t * J - Rm
    cumulative = Rs - Rm
    return RegretPaths(Rs, Rm, interim, cumulative, cumulative - interim)


def regret_gap_experiment(model: MdpModel, aroe_solution: AverageOptimalSolution, learner,
                          T: int, n_runs: int, base_seed: int = 0, delta: float = 0.05,
                          kind: str = "azuma", initial=0, learner_stream: int = STREAM_SECOND,
                          rate_times=None) -> RegretGapReport:
    """Regret gap D_T = R - R_interim against its bound, plus growth-rate traces."""
    if isinstance(learner, (StationaryPolicy, tuple, list)):
        learner = FixedPolicy(learner)
    pi_star = aroe_solution.policy
    J = aroe_solution.lambda_star
    ev = solve_arpe(model, pi_star)
    st = dispersion(model, pi_star, ev.v)
    bound = B.regret_gap(st.k_dev, st.h_span, T, delta, kind).value
    if rate_times is None:
        rate_times = sorted({t for t in (10, 30, 100, 300, 1000, 3000, 10000, T) if 3 <= t <= T})
    viol = 0
    max_res = 0.0
    cum_sum = int_sum = 0.0
    gmax_T = np.zeros(len(rate_times))
    gmax_L = np.zeros(len(rate_times))
    tt = np.array(rate_times)
    for r0 in range(0, n_runs, CHUNK):
        runs = np.arange(r0, min(r0 + CHUNK, n_runs))
        p = regret_paths(model, aroe_solution, learner, T, runs, base_seed, initial,
                         learner_stream)
        direct = p.optimal_reward[:, T] - T * J
        res = np.abs(p.gap[:, T] - direct) / (1.0 + np.abs(p.optimal_reward[:, T]))
        max_res = max(max_res, float(res.max()))
        viol += int(np.sum(np.abs(p.gap[:, T]) > bound))
        cum_sum += float(p.cumulative[:, T].sum())
        int_sum += float(p.interim[:, T].sum())
        g = np.abs(p.gap[:, tt])
        gmax_T = np.maximum(gmax_T, (g / tt).max(axis=0))
        gmax_L = np.maximum(gmax_L, (g / np.sqrt(tt * np.log(np.log(tt)))).max(axis=0))
    return RegretGapReport(
        int(T), int(n_runs), float(J), st.k_dev, st.h_span, float(delta), kind, bound, viol,
        max_res, float(gmax_T[-1]), float(gmax_L[-1]), tuple(int(x) for x in tt),
        tuple(gmax_T.tolist()), tuple(gmax_L.tolist()),
        cum_sum / n_runs, int_sum / n_runs)
