"""Dispersion statistics of value functions: span, max deviation, sigma, diameter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FiniteHorizonPolicy, MdpModel, as_policy, induced_chain
from .errors import EmptyVector, NoConvergence

DIAMETER_CAP = 1e9


def span(v) -> float:
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise EmptyVector("span of an empty vector")
    return float(v.max() - v.min())


def _chain_arrays(model: MdpModel, policy):
    chain = induced_chain(model, as_policy(policy))
    return chain.transition, chain.reward


def max_abs_deviation(model: MdpModel, policy, v, support_only: bool = False) -> float:
    """max over (s, s+) of |V(s+) - E[V(S+) | s, pi(s)]|.

    By default s+ ranges over every state; with support_only it ranges over
    successors with positive probability.
    """
    P, _ = _chain_arrays(model, policy)
    return _kdev(P, np.asarray(v, dtype=float), support_only)


def _kdev(P: np.ndarray, v: np.ndarray, support_only: bool = False) -> float:
    m = P @ v
    dev = np.abs(v[None, :] - m[:, None])
    if support_only:
        dev = np.where(P > 0.0, dev, 0.0)
    return float(dev.max())


def conditional_std(model: MdpModel, policy, v) -> np.ndarray:
    P, _ = _chain_arrays(model, policy)
    return _sigma(P, np.asarray(v, dtype=float))


def _sigma(P: np.ndarray, v: np.ndarray) -> np.ndarray:
    m = P @ v
    # two-pass: centre first, then square
    return np.sqrt(np.einsum("ij,ij->i", P, (v[None, :] - m[:, None]) ** 2))


# -- diameter ---------------------------------------------------------------


def _almost_sure_reach(support: np.ndarray, target: int) -> np.ndarray:
    """States from which some policy reaches `target` with probability one.

    Greatest fixpoint over allowed sets U of the attractor of `target`
    using only actions whose support stays inside U.
    """
    n = support.shape[0]
    U = np.ones(n, dtype=bool)
    while True:
        safe = ~(support & ~U[None, None, :]).any(axis=2)  # (s, a) stays in U
        R = np.zeros(n, dtype=bool)
        R[target] = True
        while True:
            hits = (support & R[None, None, :]).any(axis=2)
            newR = R | (U & (safe & hits).any(axis=1))
            if (newR == R).all():
                break
            R = newR
        if (R == U).all():
            return U
        U = R


def _proper_policy(support: np.ndarray, allowed: np.ndarray, target: int,
                   U: np.ndarray) -> np.ndarray:
    """Attractor strategy: in each layer pick an action moving closer to target."""
    n = support.shape[0]
    act = np.zeros(n, dtype=np.intp)
    R = np.zeros(n, dtype=bool)
    R[target] = True
    while not R[U].all():
        hits = (support & R[None, None, :]).any(axis=2) & allowed
        new = U & ~R & hits.any(axis=1)
        act[new] = hits[new].argmax(axis=1)
        R |= new
    return act


def hitting_times(model: MdpModel, target: int, method: str = "pi",
                  tol: float = 1e-12, max_iter: int = 1_000_000) -> np.ndarray:
    """Minimal expected hitting time of `target` from every state."""
    P = model.transition
    n = model.n_states
    support = P > 0.0
    U = _almost_sure_reach(support, target)
    out = np.full(n, np.inf)
    out[target] = 0.0
    idx = np.flatnonzero(U & (np.arange(n) != target))
    if idx.size == 0:
        return out
    allowed = ~(support & ~U[None, None, :]).any(axis=2)
    Q = P[np.ix_(idx, np.arange(P.shape[1]), idx)]  # transitions among non-target U states
    mask = np.where(allowed[idx], 0.0, np.inf)

    if method == "pi":
        act = _proper_policy(support, allowed, target, U)[idx]
        rows = np.arange(idx.size)
        for _ in range(max_iter):
            t = np.linalg.solve(np.eye(idx.size) - Q[rows, act, :], np.ones(idx.size))
            q = 1.0 + Q @ t + mask
            best = q.min(axis=1)
            cur = q[rows, act]
            improve = best < cur - 1e-12 * np.maximum(1.0, cur)
            if not improve.any():
                break
            act = np.where(improve, q.argmin(axis=1), act)
        else:
            raise NoConvergence(max_iter, float("nan"), "diameter policy iteration")
    elif method == "vi":
        t = np.zeros(idx.size)
        for _ in range(max_iter):
            nt = (1.0 + Q @ t + mask).min(axis=1)
            delta = float(np.max(np.abs(nt - t)))
            t = nt
            if delta <= tol * max(1.0, float(t.max())) or t.max() > DIAMETER_CAP:
                break
        else:
            raise NoConvergence(max_iter, delta, "diameter value iteration")
    else:
        raise ValueError(f"unknown method {method!r}")
    t = np.where(t > DIAMETER_CAP, np.inf, t)
    out[idx] = t
    return out


def diameter(model: MdpModel, tol: float = 1e-12, max_iter: int = 1_000_000,
             method: str = "pi") -> float:
    """max over ordered pairs s != s' of the minimal expected time s -> s'."""
    n = model.n_states
    if n == 1:
        return 0.0
    d = 0.0
    for target in range(n):
        d = max(d, float(hitting_times(model, target, method, tol, max_iter).max()))
        if np.isinf(d):
            break
    return d


# -- bundled statistics -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class DispersionStats:
    h_span: float
    k_dev: float
    sigma: np.ndarray
    diameter: float | None = None
    r_max: float | None = None

    @property
    def d_rmax(self) -> float | None:
        if self.diameter is None or self.r_max is None or not np.isfinite(self.diameter):
            return None
        return self.diameter * self.r_max

    def to_dict(self) -> dict:
        return {
            "H": self.h_span,
            "K": self.k_dev,
            "sigma": self.sigma.tolist(),
            "D": self.diameter,
            "D_rmax": self.d_rmax,
        }


def dispersion(model: MdpModel, policy, v, with_diameter: bool = False,
               support_only: bool = False) -> DispersionStats:
    P, _ = _chain_arrays(model, policy)
    v = np.asarray(v, dtype=float)
    sig = _sigma(P, v)
    sig.setflags(write=False)
    D = diameter(model) if with_diameter else None
    return DispersionStats(span(v), _kdev(P, v, support_only), sig, D, model.r_max)


def sigma_process(states, sigma) -> np.ndarray:
    """Sigma_t = sum_{tau < t} sigma(S_tau)^2 for t = 0..len(states)-1."""
    s = np.asarray(states, dtype=np.intp)
    sq = np.asarray(sigma, dtype=float)[s[:-1]] ** 2
    return np.concatenate(([0.0], np.cumsum(sq)))


def discounted_dispersion(model: MdpModel, policy, gamma: float,
                          support_only: bool = False) -> tuple[float, float]:
    """(K_gamma, H_gamma) of the discounted value of `policy`."""
    from .solvers import solve_drpe

    v = solve_drpe(model, policy, gamma).v
    P, _ = _chain_arrays(model, policy)
    return _kdev(P, v, support_only), span(v)


@dataclass(frozen=True, eq=False)
class FiniteHorizonDispersion:
    """Per-stage K_t and H_t for t = 0..h+1 (stage h+1 is identically 0)."""

    k_per_stage: np.ndarray
    h_per_stage: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.k_per_stage) - 2

    def k_bar(self, T: int) -> float:
        return float(np.max(self.k_per_stage[: T + 1]))

    def h_bar(self, T: int) -> float:
        return float(np.max(self.h_per_stage[: T + 1]))

    def g(self, T: int) -> float:
        kb = self.k_bar(T)
        if kb == 0.0:
            return 0.0
        return float(np.sum(self.k_per_stage[1: T + 1] ** 2) / kb**2)

    def to_dict(self) -> dict:
        return {"K_t": self.k_per_stage.tolist(), "H_t": self.h_per_stage.tolist()}


def fh_stage_stats(P_stages, values, support_only: bool = False):
    ks, hs = [], []
    for P, v in zip(P_stages, values):
        ks.append(_kdev(P, v, support_only))
        hs.append(span(v))
    return np.array(ks), np.array(hs)


def fh_dispersion(model: MdpModel, fh_policy: FiniteHorizonPolicy, fh_solution,
                  support_only: bool = False) -> FiniteHorizonDispersion:
    h = fh_policy.horizon
    if fh_solution.horizon != h or len(fh_solution.v) != h + 2:
        raise ValueError("solution horizon does not match the policy")
    Ps = [induced_chain(model, fh_policy[t]).transition for t in range(h + 1)]
    ks, hs = fh_stage_stats(Ps, fh_solution.v[: h + 1], support_only)
    ks = np.append(ks, 0.0)
    hs = np.append(hs, 0.0)
    ks.setflags(write=False)
    hs.setflags(write=False)
    return FiniteHorizonDispersion(ks, hs)
