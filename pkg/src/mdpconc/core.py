"""MDP data model, policies, induced chains and the JSON model format.

States and actions are dense 0-based indices.  All arrays held by the
types below are made read-only on construction so instances can be
shared between workers.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EnumerationTooLarge,
    InvalidPolicy,
    ModelError,
    NonStochasticRow,
    RewardOutOfRange,
)

STOCHASTIC_TOL = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MdpModel:
    transition: np.ndarray  # [s, a, s']
    reward: np.ndarray  # [s, a]
    r_max: float
    gamma: float | None = None
    horizon: int | None = None
    state_names: tuple[str, ...] | None = None
    action_names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "transition", _frozen(self.transition))
        object.__setattr__(self, "reward", _frozen(self.reward))
        object.__setattr__(self, "r_max", float(self.r_max))
        if self.state_names is not None:
            object.__setattr__(self, "state_names", tuple(self.state_names))
        if self.action_names is not None:
            object.__setattr__(self, "action_names", tuple(self.action_names))
        issues = _issues(self)
        if issues:
            raise issues[0]

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def to_dict(self) -> dict:
        d = {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "r_max": self.r_max,
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
        }
        if self.gamma is not None:
            d["gamma"] = self.gamma
        if self.horizon is not None:
            d["horizon"] = self.horizon
        if self.state_names is not None:
            d["state_names"] = list(self.state_names)
        if self.action_names is not None:
            d["action_names"] = list(self.action_names)
        return d

    def digest(self) -> str:
        """sha256 of the canonical JSON text; used for report provenance."""
        return hashlib.sha256(dumps_model(self).encode("utf-8")).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, MdpModel):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


def _issues(model: MdpModel) -> list[ModelError]:
    P, r = model.transition, model.reward
    if P.ndim != 3 or P.shape[0] != P.shape[2] or P.shape[0] < 1 or P.shape[1] < 1:
        return [DimensionMismatch(f"transition must have shape (S, A, S), got {P.shape}")]
    S, A = P.shape[:2]
    if r.shape != (S, A):
        return [DimensionMismatch(f"reward must have shape ({S}, {A}), got {r.shape}")]
    for names, n, what in ((model.state_names, S, "state_names"), (model.action_names, A, "action_names")):
        if names is not None and len(names) != n:
            return [DimensionMismatch(f"{what} has {len(names)} entries, expected {n}")]
    out: list[ModelError] = []
    if not np.isfinite(model.r_max) or model.r_max <= 0:
        out.append(ModelError(f"r_max must be a positive finite number, got {model.r_max!r}"))
    if model.gamma is not None and not 0.0 < model.gamma < 1.0:
        out.append(ModelError(f"gamma must lie in (0, 1), got {model.gamma!r}"))
    if model.horizon is not None and (int(model.horizon) != model.horizon or model.horizon < 0):
        out.append(ModelError(f"horizon must be an integer >= 0, got {model.horizon!r}"))
    for s in range(S):
        for a in range(A):
            row = P[s, a]
            if not np.all(np.isfinite(row)) or np.any(row < 0.0) or np.any(row > 1.0):
                out.append(NonStochasticRow(s, a, float("nan"),
                                            f"P(.|s={s}, a={a}) has entries outside [0, 1]"))
                continue
            deficit = 1.0 - float(row.sum())
            if abs(deficit) > STOCHASTIC_TOL:
                out.append(NonStochasticRow(s, a, deficit))
            v = float(r[s, a])
            if not (0.0 <= v <= model.r_max):
                out.append(RewardOutOfRange(s, a, v, model.r_max))
    return out


def model_issues(raw) -> list[ModelError]:
    """Every invariant violation in `raw` (a dict or MdpModel); empty if valid."""
    try:
        validate_model(raw)
    except ModelError as first:
        if isinstance(first, DimensionMismatch):
            return [first]
        m = object.__new__(MdpModel)
        d = raw.to_dict() if isinstance(raw, MdpModel) else raw
        for k, v in _fields_from_raw(d).items():
            object.__setattr__(m, k, v)
        return _issues(m)
    return []


def _fields_from_raw(raw: dict) -> dict:
    try:
        P = np.asarray(raw["transition"], dtype=float)
        r = np.asarray(raw["reward"], dtype=float)
        r_max = float(raw["r_max"])
    except KeyError as e:
        raise DimensionMismatch(f"missing key {e.args[0]!r}") from None
    except (TypeError, ValueError) as e:
        raise DimensionMismatch(f"ragged or non-numeric array: {e}") from None
    if P.ndim != 3:
        raise DimensionMismatch(f"transition must be 3-D, got {P.ndim}-D")
    for key, axis in (("n_states", 0), ("n_actions", 1)):
        if key in raw and int(raw[key]) != P.shape[axis]:
            raise DimensionMismatch(f"{key}={raw[key]} but transition has {P.shape[axis]}")
    return {
        "transition": P,
        "reward": r,
        "r_max": r_max,
        "gamma": None if raw.get("gamma") is None else float(raw["gamma"]),
        "horizon": None if raw.get("horizon") is None else raw["horizon"],
        "state_names": raw.get("state_names"),
        "action_names": raw.get("action_names"),
    }


def validate_model(raw) -> MdpModel:
    """Build a validated MdpModel from a mapping with the on-disk keys.

    Raises the first violation found (DimensionMismatch, NonStochasticRow,
    RewardOutOfRange).  Rows are never renormalised.
    """
    if isinstance(raw, MdpModel):
        return raw
    fields = _fields_from_raw(raw)
    if fields["horizon"] is not None:
        h = fields["horizon"]
        if isinstance(h, float) and h.is_integer():
            fields["horizon"] = int(h)
    return MdpModel(**fields)


def dumps_model(model: MdpModel) -> str:
    return json.dumps(model.to_dict(), sort_keys=True)


def loads_model(text: str) -> MdpModel:
    return validate_model(json.loads(text))


def load_model(path) -> MdpModel:
    return loads_model(Path(path).read_text(encoding="utf-8"))


def save_model(model: MdpModel, path) -> None:
    Path(path).write_text(dumps_model(model) + "\n", encoding="utf-8")


# -- policies ---------------------------------------------------------------


@dataclass(frozen=True)
class StationaryPolicy:
    decision: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "decision", tuple(int(a) for a in self.decision))

    def __len__(self):
        return len(self.decision)

    def __getitem__(self, s):
        return self.decision[s]

    def check(self, model: MdpModel) -> "StationaryPolicy":
        if len(self.decision) != model.n_states:
            raise InvalidPolicy(
                f"policy covers {len(self.decision)} states, model has {model.n_states}")
        bad = [a for a in self.decision if not 0 <= a < model.n_actions]
        if bad:
            raise InvalidPolicy(f"action indices {bad} out of range [0, {model.n_actions})")
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.decision, dtype=np.intp)

    def __str__(self):
        return ",".join(map(str, self.decision))


@dataclass(frozen=True)
class FiniteHorizonPolicy:
    """Decision rules for stages t = 0..h."""

    stages: tuple[StationaryPolicy, ...]

    def __post_init__(self):
        stages = tuple(p if isinstance(p, StationaryPolicy) else StationaryPolicy(p)
                       for p in self.stages)
        if not stages:
            raise InvalidPolicy("a finite-horizon policy needs at least one stage")
        object.__setattr__(self, "stages", stages)

    @property
    def horizon(self) -> int:
        return len(self.stages) - 1

    def __getitem__(self, t) -> StationaryPolicy:
        return self.stages[t]

    def check(self, model: MdpModel) -> "FiniteHorizonPolicy":
        for p in self.stages:
            p.check(model)
        return self

    def as_array(self) -> np.ndarray:
        return np.array([p.decision for p in self.stages], dtype=np.intp)

    @classmethod
    def repeat(cls, policy: StationaryPolicy, horizon: int) -> "FiniteHorizonPolicy":
        return cls((policy,) * (horizon + 1))


@dataclass(frozen=True, eq=False)
class InducedChain:
    transition: np.ndarray  # P^pi[s, s']
    reward: np.ndarray  # r_pi[s]

    def __post_init__(self):
        object.__setattr__(self, "transition", _frozen(self.transition))
        object.__setattr__(self, "reward", _frozen(self.reward))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]


def induced_chain(model: MdpModel, policy: StationaryPolicy) -> InducedChain:
    policy = as_policy(policy).check(model)
    idx = np.arange(model.n_states)
    a = policy.as_array()
    return InducedChain(model.transition[idx, a, :], model.reward[idx, a])


def as_policy(p) -> StationaryPolicy:
    return p if isinstance(p, StationaryPolicy) else StationaryPolicy(p)


def policy_count(model: MdpModel) -> int:
    return model.n_actions ** model.n_states


def enumerate_policies(model: MdpModel, cap: int = 10**6) -> Iterator[StationaryPolicy]:
    """All |A|^|S| deterministic stationary policies, lexicographic order."""
    count = policy_count(model)
    if count > cap:
        raise EnumerationTooLarge(count, cap)
    return (StationaryPolicy(d) for d in
            itertools.product(range(model.n_actions), repeat=model.n_states))


# -- generators and standard instances ---------------------------------------

STRUCTURES = ("dense", "communicating", "unichain")
MIX_EPS = 0.01


def random_model(n_states: int, n_actions: int, r_max: float = 1.0,
                 structure: str = "dense", seed: int = 0) -> MdpModel:
    """Seeded random model.

    "dense" rows are uniform draws from the simplex.  "communicating" mixes
    in 1% of one random n-cycle under every action; "unichain" mixes in 1%
    of the uniform row.
    """
    if structure not in STRUCTURES:
        raise ValueError(f"structure must be one of {STRUCTURES}")
    if n_states < 1 or n_actions < 1:
        raise ValueError("n_states and n_actions must be >= 1")
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    r = rng.uniform(0.0, r_max, size=(n_states, n_actions))
    if structure == "communicating":
        order = rng.permutation(n_states)
        cycle = np.zeros((n_states, n_states))
        cycle[order, np.roll(order, -1)] = 1.0
        P = (1 - MIX_EPS) * P + MIX_EPS * cycle[:, None, :]
    elif structure == "unichain":
        P = (1 - MIX_EPS) * P + MIX_EPS / n_states
    P /= P.sum(axis=2, keepdims=True)
    return MdpModel(P, r, r_max)


def swap_model(reward=((1.0,), (0.0,)), r_max: float = 1.0) -> MdpModel:
    """Two states; action 0 always moves to the other state."""
    reward = np.asarray(reward, dtype=float)
    A = reward.shape[1]
    P = np.zeros((2, A, 2))
    P[0, :, 1] = 1.0
    P[1, :, 0] = 1.0
    for a in range(1, A):  # extra actions stay put
        P[:, a, :] = np.eye(2)
    return MdpModel(P, reward, r_max)


def symmetric_model(reward=((1.0,), (0.0,)), r_max: float = 1.0) -> MdpModel:
    """Every (s, a) row is uniform over the states."""
    reward = np.asarray(reward, dtype=float)
    S, A = reward.shape
    return MdpModel(np.full((S, A, S), 1.0 / S), reward, r_max)


def cycle_model(n: int, reward: Sequence[float] | None = None, r_max: float = 1.0) -> MdpModel:
    """Deterministic n-cycle s -> s+1 mod n with a single action."""
    P = np.zeros((n, 1, n))
    P[np.arange(n), 0, (np.arange(n) + 1) % n] = 1.0
    r = np.zeros((n, 1)) if reward is None else np.asarray(reward, float).reshape(n, 1)
    return MdpModel(P, r, r_max)


def absorbing_pair_model(reward=((1.0,), (0.0,)), r_max: float = 1.0) -> MdpModel:
    """Two states, each absorbing under every action."""
    reward = np.asarray(reward, dtype=float)
    A = reward.shape[1]
    P = np.zeros((2, A, 2))
    P[:, :, :] = np.eye(2)[:, None, :]
    return MdpModel(P, reward, r_max)
