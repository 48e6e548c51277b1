"""Closed-form concentration bounds and their applicability thresholds.

Every function is total: a value is returned even when the bound is not
yet applicable at the requested T, so envelopes can be plotted from T=1.
All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, HorizonExceeded, InfiniteDiameter, KZero
from .stats import FiniteHorizonDispersion

LIL_CONST = 173.0

KINDS = (
    "azuma_centered", "lil_centered",
    "azuma_uncentered", "lil_uncentered",
    "policy_independent_azuma", "policy_independent_lil",
    "two_policy_azuma", "two_policy_lil",
    "two_optimal_azuma", "two_optimal_lil",
    "regret_gap_azuma", "regret_gap_lil",
    "regret_gap_model_azuma", "regret_gap_model_lil",
    "disc_azuma", "disc_lil",
    "disc_uncentered_azuma", "disc_uncentered_lil",
    "disc_two_policy",
    "fh_azuma", "fh_lil",
    "fh_uncentered_azuma", "fh_uncentered_lil",
    "fh_two_policy",
)
# LIL forms of the two-policy discounted / finite-horizon bounds
EXTRA_KINDS = ("disc_two_policy_lil", "fh_two_policy_lil")
ALL_KINDS = KINDS + EXTRA_KINDS


@dataclass(frozen=True)
class BoundResult:
    value: float
    applicable: bool
    threshold_T0: int | None = None
    notes: str = ""

    def to_dict(self) -> dict:
        return {"value": self.value, "applicable": self.applicable,
                "threshold_T0": self.threshold_T0, "notes": self.notes}


# -- argument checks --------------------------------------------------------


def _check_delta(delta: float) -> float:
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta!r}")
    return delta


def _check_T(T: int, minimum: int = 1) -> int:
    if int(T) != T or T < minimum:
        raise DomainError(f"T must be an integer >= {minimum}, got {T!r}")
    return int(T)


def _check_nonneg(**kw) -> None:
    for name, x in kw.items():
        if x is None or not (x >= 0.0) or math.isnan(x):
            raise DomainError(f"{name} must be >= 0, got {x!r}")


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma!r}")
    return gamma


# -- building blocks --------------------------------------------------------


def _azuma(K: float, x: float, log_arg: float) -> float:
    return K * math.sqrt(2.0 * x * math.log(log_arg))


def _lil(K: float, x: float, log_arg: float) -> float:
    """max{K sqrt(3x(2 ln ln(1.5x) + ln(log_arg))), K^2}; K^2 branch when 1.5x <= e."""
    if 1.5 * x <= math.e:
        return K * K
    inner = 3.0 * x * (2.0 * math.log(math.log(1.5 * x)) + math.log(log_arg))
    return max(K * math.sqrt(inner), K * K)


def lil_threshold(K: float, delta: float, conservative: bool = False,
                  log_arg: float | None = None) -> int:
    """ceil(173/K ln(4/delta)), or ceil(173/K^2 ln(4/delta)) when conservative."""
    if K <= 0.0:
        raise KZero("LIL threshold is undefined for K = 0")
    log_arg = 4.0 / delta if log_arg is None else log_arg
    denom = K * K if conservative else K
    return max(1, math.ceil(LIL_CONST / denom * math.log(log_arg)))


def _threshold_note(conservative: bool, log_arg: str = "4/delta", what: str = "K") -> str:
    if conservative:
        return f"T0 = ceil(173/{what}^2 * ln({log_arg})) [conservative]"
    return f"T0 = ceil(173/{what} * ln({log_arg}))"


def _lil_result(value: float, T: int, T0: int, note: str) -> BoundResult:
    return BoundResult(value, T >= T0, T0, note)


# -- average reward ---------------------------------------------------------


def azuma_centered(K: float, T: int, delta: float) -> BoundResult:
    delta, T = _check_delta(delta), _check_T(T)
    _check_nonneg(K=K)
    return BoundResult(_azuma(K, T, 2.0 / delta), True, None, "always applicable")


def lil_centered(K: float, T: int, delta: float, conservative: bool = False) -> BoundResult:
    delta, T = _check_delta(delta), _check_T(T)
    _check_nonneg(K=K)
    T0 = lil_threshold(K, delta, conservative)
    return _lil_result(_lil(K, T, 2.0 / delta), T, T0, _threshold_note(conservative))


def azuma_uncentered(K: float, H: float, T: int, delta: float) -> BoundResult:
    _check_nonneg(H=H)
    r = azuma_centered(K, T, delta)
    return BoundResult(r.value + H, True, None, r.notes)


def lil_uncentered(K: float, H: float, T: int, delta: float,
                   conservative: bool = False) -> BoundResult:
    _check_nonneg(H=H)
    r = lil_centered(K, T, delta, conservative)
    return BoundResult(r.value + H, r.applicable, r.threshold_T0, r.notes)


def _d_rmax(D: float, r_max: float) -> float:
    if D is None or not math.isfinite(D):
        raise InfiniteDiameter("policy-independent bounds need a finite diameter")
    _check_nonneg(D=D)
    if not r_max > 0:
        raise DomainError(f"r_max must be > 0, got {r_max!r}")
    return D * r_max


def policy_independent(D: float, r_max: float, T: int, delta: float, kind: str = "azuma",
                       conservative: bool = False) -> BoundResult:
    c = _d_rmax(D, r_max)
    if kind == "azuma":
        return azuma_uncentered(c, c, T, delta)
    if kind == "lil":
        r = lil_uncentered(c, c, T, delta, conservative)
        return BoundResult(r.value, r.applicable, r.threshold_T0,
                           _threshold_note(conservative, what="(D r_max)"))
    raise ValueError(f"kind must be 'azuma' or 'lil', got {kind!r}")


def two_policy(K1: float, H1: float, K2: float, H2: float, T: int, delta: float,
               kind: str = "azuma", conservative: bool = False) -> BoundResult:
    """Sum of the two uncentered bounds, each at confidence delta/2."""
    delta, T = _check_delta(delta), _check_T(T)
    _check_nonneg(K1=K1, H1=H1, K2=K2, H2=H2)
    if kind == "azuma":
        v = _azuma(K1, T, 4.0 / delta) + H1 + _azuma(K2, T, 4.0 / delta) + H2
        return BoundResult(v, True, None, "always applicable")
    if kind == "lil":
        T0 = max(lil_threshold(K1, delta, conservative, 8.0 / delta),
                 lil_threshold(K2, delta, conservative, 8.0 / delta))
        v = _lil(K1, T, 4.0 / delta) + H1 + _lil(K2, T, 4.0 / delta) + H2
        return _lil_result(v, T, T0, "max of " + _threshold_note(conservative, "8/delta", "K_i"))
    raise ValueError(f"kind must be 'azuma' or 'lil', got {kind!r}")


def two_optimal(K: float, H: float, T: int, delta: float, kind: str = "azuma",
                conservative: bool = False) -> BoundResult:
    """Twice the single-policy uncentered bound at confidence delta/2."""
    delta, T = _check_delta(delta), _check_T(T)
    _check_nonneg(K=K, H=H)
    if kind == "azuma":
        return BoundResult(2.0 * (_azuma(K, T, 4.0 / delta) + H), True, None,
                           "always applicable")
    if kind == "lil":
        T0 = lil_threshold(K, delta, conservative, 8.0 / delta)
        v = 2.0 * (_lil(K, T, 4.0 / delta) + H)
        return _lil_result(v, T, T0, _threshold_note(conservative, "8/delta"))
    raise ValueError(f"kind must be 'azuma' or 'lil', got {kind!r}")


def regret_gap(K_star: float, H_star: float, T: int, delta: float, kind: str = "azuma",
               conservative: bool = False) -> BoundResult:
    """Bound on |R^{pi*}_T - T J*|, the gap between cumulative and interim regret."""
    if kind == "azuma":
        return azuma_uncentered(K_star, H_star, T, delta)
    if kind == "lil":
        return lil_uncentered(K_star, H_star, T, delta, conservative)
    raise ValueError(f"kind must be 'azuma' or 'lil', got {kind!r}")


def regret_gap_model(D: float, r_max: float, T: int, delta: float, kind: str = "azuma",
                     conservative: bool = False) -> BoundResult:
    return policy_independent(D, r_max, T, delta, kind, conservative)


# -- discounted -------------------------------------------------------------


def f_gamma(gamma: float, T: int) -> float:
    """sum_{t=1}^T gamma^(2t) in closed form."""
    gamma = _check_gamma(gamma)
    if T < 0:
        raise DomainError("T must be >= 0")
    g2 = gamma * gamma
    return (g2 - gamma ** (2 * T + 2)) / (1.0 - g2)


def f_gamma_limit(gamma: float) -> float:
    g2 = _check_gamma(gamma) ** 2
    return g2 / (1.0 - g2)


def disc_threshold(K_gamma: float, gamma: float, delta: float, conservative: bool = False,
                   log_arg: float | None = None) -> int | None:
    """First T' >= 1 with f(T') > 173/K ln(4/delta); None if f never gets there."""
    log_arg = 4.0 / delta if log_arg is None else log_arg
    if K_gamma <= 0.0:
        return None
    denom = K_gamma * K_gamma if conservative else K_gamma
    c = LIL_CONST / denom * math.log(log_arg)
    if not f_gamma_limit(gamma) > c:
        return None
    g2 = gamma * gamma
    # f(T) > c  <=>  gamma^(2T+2) < g2 - c(1-g2)
    rhs = g2 - c * (1.0 - g2)
    T = max(1, math.ceil((math.log(rhs) / math.log(gamma) - 2.0) / 2.0))
    while T > 1 and f_gamma(gamma, T - 1) > c:
        T -= 1
    while not f_gamma(gamma, T) > c:
        T += 1
    return T


def _disc_note(conservative: bool, log_arg: str = "4/delta") -> str:
    k = "K_gamma^2" if conservative else "K_gamma"
    return f"T0 = min{{T' >= 1 : f_gamma(T') > 173/{k} * ln({log_arg})}}"


def disc_bounds(K_gamma: float, gamma: float, r_max: float | None, T: int, delta: float,
                kind: str = "azuma", uncentered: bool = False,
                conservative: bool = False) -> BoundResult:
    delta, T, gamma = _check_delta(delta), _check_T(T), _check_gamma(gamma)
    _check_nonneg(K_gamma=K_gamma)
    f = f_gamma(gamma, T)
    tail = 0.0
    if uncentered:
        if r_max is None or not r_max > 0:
            raise DomainError("uncentered discounted bounds need r_max > 0")
        tail = gamma**T * r_max / (1.0 - gamma)
    if kind == "azuma":
        return BoundResult(_azuma(K_gamma, f, 2.0 / delta) + tail, True, None,
                           "always applicable")
    if kind == "lil":
        T0 = disc_threshold(K_gamma, gamma, delta, conservative)
        v = _lil(K_gamma, f, 2.0 / delta) + tail
        if T0 is None:
            return BoundResult(v, False, None, "never applicable: " + _disc_note(conservative))
        return _lil_result(v, T, T0, _disc_note(conservative))
    raise ValueError(f"kind must be 'azuma' or 'lil', got {kind!r}")


def disc_two_policy(K1: float, K2: float, gamma: float, T: int, delta: float,
                    kind: str = "azuma", conservative: bool = False) -> BoundResult:
    delta, T, gamma = _check_delta(delta), _check_T(T), _check_gamma(gamma)
    _check_nonneg(K1=K1, K2=K2)
    f = f_gamma(gamma, T)
    if kind == "azuma":
        return BoundResult(_azuma(K1, f, 4.0 / delta) + _azuma(K2, f, 4.0 / delta), True,
                           None, "always applicable")
    if kind == "lil":
        v = _lil(K1, f, 4.0 / delta) + _lil(K2, f, 4.0 / delta)
        t1 = disc_threshold(K1, gamma, delta, conservative, 8.0 / delta)
        t2 = disc_threshold(K2, gamma, delta, conservative, 8.0 / delta)
        note = "max of " + _disc_note(conservative, "8/delta")
        if t1 is None or t2 is None:
            return BoundResult(v, False, None, "never applicable: " + note)
        return _lil_result(v, T, max(t1, t2), note)
    raise ValueError(f"kind must be 'azuma' or 'lil', got {kind!r}")


# -- finite horizon ---------------------------------------------------------


def _fh_check(disp: FiniteHorizonDispersion, T: int) -> int:
    T = _check_T(T)
    if T > disp.horizon + 1:
        raise HorizonExceeded(f"T={T} exceeds h+1={disp.horizon + 1}")
    return T


def fh_threshold(disp: FiniteHorizonDispersion, delta: float, conservative: bool = False,
                 log_arg: float | None = None) -> int | None:
    """min{T' in [1, h+1] : g(T') >= 173 ln(4/delta)}; None unless g(h+1) reaches it.

    The conservative variant uses sum_{t<=T'} K_t^2 in place of g(T').
    """
    log_arg = 4.0 / delta if log_arg is None else log_arg
    c = LIL_CONST * math.log(log_arg)
    last = disp.horizon + 1

    def stat(t: int) -> float:
        if conservative:
            return float(np.sum(disp.k_per_stage[1: t + 1] ** 2))
        return disp.g(t)

    if not stat(last) >= c:
        return None
    for t in range(1, last + 1):
        if stat(t) >= c:
            return t
    return None


def _fh_note(conservative: bool, log_arg: str = "4/delta") -> str:
    s = "sum K_t^2" if conservative else "g(T')"
    return f"T0 = min{{T' in [1, h+1] : {s} >= 173 * ln({log_arg})}}, requires the same at T' = h+1"


def fh_bounds(disp: FiniteHorizonDispersion, T: int, delta: float, kind: str = "azuma",
              uncentered: bool = False, conservative: bool = False) -> BoundResult:
    delta = _check_delta(delta)
    T = _fh_check(disp, T)
    kb, hb, g = disp.k_bar(T), disp.h_bar(T), disp.g(T)
    x = float(T) if uncentered else g
    extra = hb if uncentered else 0.0
    if kind == "azuma":
        return BoundResult(_azuma(kb, x, 2.0 / delta) + extra, True, None, "always applicable")
    if kind == "lil":
        T0 = fh_threshold(disp, delta, conservative)
        v = _lil(kb, x, 2.0 / delta) + extra
        if T0 is None:
            return BoundResult(v, False, None, "never applicable: " + _fh_note(conservative))
        return _lil_result(v, T, T0, _fh_note(conservative))
    raise ValueError(f"kind must be 'azuma' or 'lil', got {kind!r}")


def fh_two_policy(d1: FiniteHorizonDispersion, d2: FiniteHorizonDispersion, T: int,
                  delta: float, kind: str = "azuma", conservative: bool = False) -> BoundResult:
    delta = _check_delta(delta)
    T = _fh_check(d1, T)
    _fh_check(d2, T)
    parts = [(d.k_bar(T), d.g(T)) for d in (d1, d2)]
    if kind == "azuma":
        return BoundResult(sum(_azuma(k, g, 4.0 / delta) for k, g in parts), True, None,
                           "always applicable")
    if kind == "lil":
        v = sum(_lil(k, g, 4.0 / delta) for k, g in parts)
        ts = [fh_threshold(d, delta, conservative, 8.0 / delta) for d in (d1, d2)]
        note = "max of " + _fh_note(conservative, "8/delta")
        if None in ts:
            return BoundResult(v, False, None, "never applicable: " + note)
        return _lil_result(v, T, max(ts), note)
    raise ValueError(f"kind must be 'azuma' or 'lil', got {kind!r}")


# -- dispatcher -------------------------------------------------------------


@dataclass(frozen=True)
class BoundRequest:
    kind: str
    T: int
    delta: float
    K: float | None = None
    H: float | None = None
    K2: float | None = None
    H2: float | None = None
    D: float | None = None
    r_max: float | None = None
    gamma: float | None = None
    fh: FiniteHorizonDispersion | None = field(default=None, compare=False)
    fh2: FiniteHorizonDispersion | None = field(default=None, compare=False)
    conservative: bool = False

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise DomainError(f"unknown bound kind {self.kind!r}")

    def with_T(self, T: int) -> "BoundRequest":
        from dataclasses import replace
        return replace(self, T=T)

    @property
    def is_lil(self) -> bool:
        return "lil" in self.kind

    @property
    def family(self) -> str:
        if self.kind.startswith("disc"):
            return "discounted"
        if self.kind.startswith("fh"):
            return "finite_horizon"
        return "average"


def _need(req: BoundRequest, *names):
    vals = []
    for n in names:
        v = getattr(req, n)
        if v is None:
            raise DomainError(f"bound kind {req.kind!r} requires parameter {n}")
        vals.append(v)
    return vals


def evaluate(req: BoundRequest) -> BoundResult:
    k, T, d, c = req.kind, req.T, req.delta, req.conservative
    mode = "lil" if req.is_lil else "azuma"
    if k == "azuma_centered":
        (K,) = _need(req, "K")
        return azuma_centered(K, T, d)
    if k == "lil_centered":
        (K,) = _need(req, "K")
        return lil_centered(K, T, d, c)
    if k in ("azuma_uncentered", "regret_gap_azuma"):
        K, H = _need(req, "K", "H")
        return azuma_uncentered(K, H, T, d)
    if k in ("lil_uncentered", "regret_gap_lil"):
        K, H = _need(req, "K", "H")
        return lil_uncentered(K, H, T, d, c)
    if k.startswith("policy_independent") or k.startswith("regret_gap_model"):
        D, r = _need(req, "D", "r_max")
        return policy_independent(D, r, T, d, mode, c)
    if k.startswith("two_policy"):
        K, H, K2, H2 = _need(req, "K", "H", "K2", "H2")
        return two_policy(K, H, K2, H2, T, d, mode, c)
    if k.startswith("two_optimal"):
        K, H = _need(req, "K", "H")
        return two_optimal(K, H, T, d, mode, c)
    if k in ("disc_azuma", "disc_lil"):
        K, g = _need(req, "K", "gamma")
        return disc_bounds(K, g, req.r_max, T, d, mode, False, c)
    if k.startswith("disc_uncentered"):
        K, g, r = _need(req, "K", "gamma", "r_max")
        return disc_bounds(K, g, r, T, d, mode, True, c)
    if k.startswith("disc_two_policy"):
        K, K2, g = _need(req, "K", "K2", "gamma")
        return disc_two_policy(K, K2, g, T, d, mode, c)
    if k in ("fh_azuma", "fh_lil"):
        (fh,) = _need(req, "fh")
        return fh_bounds(fh, T, d, mode, False, c)
    if k.startswith("fh_uncentered"):
        (fh,) = _need(req, "fh")
        return fh_bounds(fh, T, d, mode, True, c)
    if k.startswith("fh_two_policy"):
        fh, fh2 = _need(req, "fh", "fh2")
        return fh_two_policy(fh, fh2, T, d, mode, c)
    raise DomainError(f"unknown bound kind {k!r}")  # pragma: no cover


# -- vanishing discount -----------------------------------------------------


@dataclass(frozen=True)
class VanishingDiscountRow:
    gamma: float
    K_gamma: float
    f_gamma: float
    disc_azuma: float
    disc_lil: float
    f_gap: float
    k_gap: float
    azuma_gap: float
    lil_gap: float


@dataclass(frozen=True)
class VanishingDiscountReport:
    T: int
    delta: float
    K: float
    avg_azuma: float
    avg_lil: float
    rows: tuple[VanishingDiscountRow, ...]

    def _decreasing(self, attr: str) -> bool:
        gaps = [getattr(r, attr) for r in self.rows]
        return all(b < a for a, b in zip(gaps, gaps[1:]))

    @property
    def f_gap_decreasing(self) -> bool:
        return self._decreasing("f_gap")

    @property
    def k_gap_decreasing(self) -> bool:
        return self._decreasing("k_gap")

    @property
    def azuma_gap_decreasing(self) -> bool:
        return self._decreasing("azuma_gap")

    @property
    def final_relative_gap(self) -> float:
        return self.rows[-1].azuma_gap / self.avg_azuma if self.avg_azuma else 0.0

    def to_dict(self) -> dict:
        return {
            "T": self.T, "delta": self.delta, "K": self.K,
            "avg_azuma": self.avg_azuma, "avg_lil": self.avg_lil,
            "rows": [r.__dict__ for r in self.rows],
            "f_gap_decreasing": self.f_gap_decreasing,
            "k_gap_decreasing": self.k_gap_decreasing,
            "azuma_gap_decreasing": self.azuma_gap_decreasing,
            "final_relative_gap": self.final_relative_gap,
        }


def vanishing_discount_check(model, policy, T: int, delta: float,
                             gamma_list=(0.9, 0.99, 0.999),
                             support_only: bool = False) -> VanishingDiscountReport:
    """Discounted bounds against their average-reward limits along a gamma grid."""
    from .solvers import solve_arpe
    from .stats import discounted_dispersion, max_abs_deviation

    gammas = [float(g) for g in gamma_list]
    if any(b <= a for a, b in zip(gammas, gammas[1:])):
        raise DomainError("gamma_list must be strictly increasing")
    sol = solve_arpe(model, policy)
    K = max_abs_deviation(model, policy, sol.v, support_only)
    avg_az = azuma_centered(K, T, delta).value
    avg_lil = _lil(K, T, 2.0 / delta)
    rows = []
    for g in gammas:
        Kg, _ = discounted_dispersion(model, policy, g, support_only)
        f = f_gamma(g, T)
        az = _azuma(Kg, f, 2.0 / delta)
        ll = _lil(Kg, f, 2.0 / delta)
        rows.append(VanishingDiscountRow(g, Kg, f, az, ll, abs(f - T), abs(Kg - K),
                                         abs(az - avg_az), abs(ll - avg_lil)))
    return VanishingDiscountReport(int(T), float(delta), K, avg_az, avg_lil, tuple(rows))
