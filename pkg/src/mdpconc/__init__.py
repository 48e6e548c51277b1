"""Reward-concentration guarantees for finite MDPs."""

from .core import (
    FiniteHorizonPolicy,
    InducedChain,
    MdpModel,
    StationaryPolicy,
    enumerate_policies,
    induced_chain,
    load_model,
    random_model,
    save_model,
    validate_model,
)
from .errors import MdpConcError

__version__ = "0.1.0"

__all__ = [
    "FiniteHorizonPolicy",
    "InducedChain",
    "MdpConcError",
    "MdpModel",
    "StationaryPolicy",
    "enumerate_policies",
    "induced_chain",
    "load_model",
    "random_model",
    "save_model",
    "validate_model",
    "__version__",
]
