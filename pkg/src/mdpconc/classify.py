"""Recurrence structure of induced chains and brute-force MDP classification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import (
    InducedChain,
    MdpModel,
    StationaryPolicy,
    as_policy,
    enumerate_policies,
    induced_chain,
    policy_count,
)
from .errors import EnumerationTooLarge

GAIN_TOL = 1e-9


@dataclass(frozen=True)
class ChainStructure:
    recurrent_classes: tuple[frozenset[int], ...]
    transient_states: frozenset[int]

    @property
    def is_unichain(self) -> bool:
        return len(self.recurrent_classes) == 1

    @property
    def is_irreducible(self) -> bool:
        return self.is_unichain and not self.transient_states

    @property
    def recurrent_states(self) -> frozenset[int]:
        return frozenset().union(*self.recurrent_classes)


@dataclass(frozen=True)
class MdpClass:
    """Class flags; None means undecided because the policy cap was exceeded."""

    recurrent: bool | None
    unichain: bool | None
    communicating: bool
    weakly_communicating: bool | None
    n_policies: int

    def to_dict(self) -> dict:
        return {
            "recurrent": self.recurrent,
            "unichain": self.unichain,
            "communicating": self.communicating,
            "weakly_communicating": self.weakly_communicating,
            "n_policies": self.n_policies,
        }


def _scc(adj: np.ndarray) -> tuple[int, np.ndarray]:
    return connected_components(csr_matrix(adj), directed=True, connection="strong")


def structure_of(adj: np.ndarray) -> ChainStructure:
    """Recurrent classes are the closed strongly connected components."""
    n_comp, labels = _scc(adj)
    classes = []
    transient: set[int] = set()
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        outside = np.ones(adj.shape[0], dtype=bool)
        outside[members] = False
        if adj[np.ix_(members, outside)].any():
            transient.update(members.tolist())
        else:
            classes.append(frozenset(members.tolist()))
    classes.sort(key=min)
    return ChainStructure(tuple(classes), frozenset(transient))


def classify_chain(chain: InducedChain, support_tol: float = 0.0) -> ChainStructure:
    if support_tol < 0:
        raise ValueError("support_tol must be >= 0")
    return structure_of(chain.transition > support_tol)


def union_graph(model: MdpModel, support_tol: float = 0.0) -> np.ndarray:
    return (model.transition > support_tol).any(axis=1)


def is_communicating(model: MdpModel) -> bool:
    n_comp, _ = _scc(union_graph(model))
    return n_comp == 1


def _weakly_communicating(model: MdpModel, rec_states: set[int],
                          always_transient: set[int]) -> bool:
    R = np.array(sorted(rec_states), dtype=np.intp)
    if R.size == 0:
        return False
    # states outside R must be transient under every policy
    outside = set(range(model.n_states)) - rec_states
    if not outside <= always_transient:
        return False
    in_R = np.zeros(model.n_states, dtype=bool)
    in_R[R] = True
    # some action per state of R keeps all mass inside R
    support = model.transition[R] > 0.0  # (|R|, A, S)
    stays = ~(support & ~in_R[None, None, :]).any(axis=2)
    if not stays.any(axis=1).all():
        return False
    sub = union_graph(model)[np.ix_(R, R)]
    n_comp, _ = _scc(sub)
    return n_comp == 1


def classify_model(model: MdpModel, cap: int = 10**6) -> MdpClass:
    communicating = is_communicating(model)
    count = policy_count(model)
    try:
        policies = enumerate_policies(model, cap)
    except EnumerationTooLarge:
        return MdpClass(None, None, communicating, True if communicating else None, count)

    recurrent = unichain = True
    rec_states: set[int] = set()
    always_transient = set(range(model.n_states))
    for pi in policies:
        cs = classify_chain(induced_chain(model, pi))
        unichain &= cs.is_unichain
        recurrent &= cs.is_irreducible
        rec_states |= cs.recurrent_states
        always_transient &= cs.transient_states
    weak = communicating or _weakly_communicating(model, rec_states, always_transient)
    return MdpClass(recurrent, unichain, communicating, weak or unichain, count)


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Stationary law of an irreducible stochastic matrix."""
    n = P.shape[0]
    A = np.vstack([(P.T - np.eye(n)), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def class_gains(chain: InducedChain, structure: ChainStructure | None = None) -> list[float]:
    """Average reward of each recurrent class, in class order."""
    structure = structure or classify_chain(chain)
    gains = []
    for cls in structure.recurrent_classes:
        idx = np.array(sorted(cls), dtype=np.intp)
        mu = stationary_distribution(chain.transition[np.ix_(idx, idx)])
        gains.append(float(mu @ chain.reward[idx]))
    return gains


def in_pi_ar(model: MdpModel, policy: StationaryPolicy) -> bool:
    chain = induced_chain(model, as_policy(policy))
    cs = classify_chain(chain)
    if cs.is_unichain:
        return True
    g = class_gains(chain, cs)
    return max(g) - min(g) <= GAIN_TOL
