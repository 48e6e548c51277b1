"""Counter-based uniforms: u = F(seed, stream, run, t).

Each draw depends only on its key, so trajectories are identical no
matter how runs are split across workers or in which order they execute.
The mixer is the SplitMix64 finaliser.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def mix(x):
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = (x ^ (x >> np.uint64(30))) * _M1
        x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def run_keys(seed: int, stream: int, runs) -> np.ndarray:
    """Per-run 64-bit keys for a given (seed, stream)."""
    runs = np.asarray(runs, dtype=np.uint64)
    with np.errstate(over="ignore"):
        k = mix(np.uint64(int(seed) & _MASK64))
        k = mix(k ^ (np.uint64(int(stream) & _MASK64) * GOLDEN))
        return mix(k ^ runs)


def uniforms_from_keys(keys: np.ndarray, t0: int, n_steps: int) -> np.ndarray:
    """Array [run, step] of uniforms in [0, 1) for counters t0 .. t0+n_steps-1."""
    t = np.arange(t0, t0 + n_steps, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = mix(keys[:, None] + t[None, :] * GOLDEN)
    return (x >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def uniforms(seed: int, stream: int, runs, t0: int, n_steps: int) -> np.ndarray:
    return uniforms_from_keys(run_keys(seed, stream, np.atleast_1d(runs)), t0, n_steps)


def sampling_cdf(probs: np.ndarray) -> np.ndarray:
    """Cumulative sums along the last axis, with the tail pinned above 1.

    Entries from the last positive-probability index onward are set to 2.0
    so that u < 1 always lands on a state with positive mass.
    """
    p = np.asarray(probs, dtype=float)
    cdf = np.cumsum(p, axis=-1)
    n = p.shape[-1]
    last = n - 1 - np.argmax((p > 0.0)[..., ::-1], axis=-1)
    cols = np.arange(n)
    cdf = np.where(cols >= last[..., None], 2.0, cdf)
    return cdf


def inverse_cdf(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Smallest j with u < cdf[j], row by row."""
    return (u[:, None] >= cdf_rows).sum(axis=1)
