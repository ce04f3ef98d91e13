"""Portable deterministic random streams.

Everything stochastic in this package (synthetic data, probabilistic
rounding, purchase draws) runs on SplitMix64, chosen because its output
sequence has a closed form that is trivial to reproduce in any language:

    output[t] = mix64(seed + (t + 1) * GOLDEN)        t = 0, 1, 2, ...

where ``GOLDEN = 0x9E3779B97F4A7C15`` and ``mix64`` is the standard
SplitMix64 finalizer (xor-shift / multiply avalanche).  Uniform doubles use
the top 53 bits offset by half an ulp so they lie strictly inside (0, 1),
and Gaussians are produced by the inverse normal CDF (Wichura's AS241, via
``scipy.special.ndtri``) applied to those uniforms.  No hidden global state
anywhere: callers derive independent substreams from ``(seed, *keys)`` with
:func:`substream`, which makes row-parallel generation and re-runs exact.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)

# Fixed tags for deriving named substreams (arbitrary odd constants).
TAG_ROW = 0x524F57
TAG_PERMUTE = 0x5045524D
TAG_ORDER = 0x4F52444552
TAG_PURCHASE = 0x425559
TAG_SAMPLE = 0x53414D50
TAG_INIT = 0x494E4954
TAG_POINT = 0x504F494E54


def mix64(z: np.ndarray | int) -> np.ndarray:
    """SplitMix64 finalizer, vectorized over uint64 arrays."""
    with np.errstate(over="ignore"):
        z = np.asarray(z, dtype=np.uint64)
        z = (z ^ (z >> np.uint64(30))) * _MUL1
        z = (z ^ (z >> np.uint64(27))) * _MUL2
        return z ^ (z >> np.uint64(31))


def substream(seed: int, *keys: int) -> int:
    """Derive a child seed from ``seed`` and a tuple of integer keys.

    Defined as ``s <- mix64(s XOR mix64(key + GOLDEN))`` folded left over
    the keys; documented so other implementations can match streams.
    """
    with np.errstate(over="ignore"):
        s = np.uint64(seed % (1 << 64))
        for k in keys:
            s = mix64(s ^ mix64(np.uint64(k % (1 << 64)) + GOLDEN))[()]
    return int(s)


def uniforms(seed: int, count: int) -> np.ndarray:
    """``count`` doubles in the open interval (0, 1)."""
    with np.errstate(over="ignore"):
        states = np.arange(1, count + 1, dtype=np.uint64) * GOLDEN + np.uint64(
            seed % (1 << 64)
        )
        bits = mix64(states)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def gaussians(seed: int, count: int, sigma: float = 1.0) -> np.ndarray:
    """i.i.d. normal draws via the inverse-CDF transform (AS241)."""
    return ndtri(uniforms(seed, count)) * sigma


def bernoulli(seed: int, probs: np.ndarray) -> np.ndarray:
    """One Bernoulli draw per entry of ``probs``; True with probability p."""
    p = np.asarray(probs, dtype=np.float64)
    return uniforms(seed, p.size).reshape(p.shape) < p


def permutation(seed: int, count: int) -> np.ndarray:
    """Deterministic permutation of range(count): argsort of one uniform draw."""
    return np.argsort(uniforms(seed, count), kind="stable")
