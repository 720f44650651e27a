"""Keyed random streams.

Two kinds of randomness are used, both fully determined by (seed, key...):

* ``keyed_generator`` builds a ``numpy.random.Generator`` from a
  ``SeedSequence`` whose entropy is the key tuple.  Used where one
  generator serves many draws (population generation, sample selection,
  bootstrap resampling).
* ``keyed_uniforms`` is a counter-based stream built on splitmix64.
  Each value depends only on (seed, key..., counter), so per-unit draws
  are independent of evaluation order and can be generated for any
  subset of counters without drawing the rest.  Used for imputation,
  where every nonrespondent owns its key.

All keys are nonnegative integers; callers map symbolic purposes to the
small constants below so distinct uses can never collide.
"""

from __future__ import annotations

import numpy as np

# Purpose tags for stream separation. Never reuse a value.
TAG_POPULATION_Y = 1
TAG_POPULATION_Z = 2
TAG_SAMPLE = 3
TAG_RESPONSE = 4
TAG_BOOTSTRAP = 5
TAG_IMPUTE_SIMPLE = 6
TAG_IMPUTE_PEL = 7
TAG_STUDY = 8

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mask_int(value: int) -> int:
    return int(value) & 0xFFFFFFFFFFFFFFFF


def keyed_generator(seed: int, *key: int) -> np.random.Generator:
    """Generator seeded by the entropy tuple (seed, key...)."""
    entropy = [_mask_int(seed)] + [_mask_int(k) for k in key]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def splitmix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, elementwise over uint64; wraparound intended."""
    with np.errstate(over="ignore"):
        z = (x + _GOLDEN) & _MASK
        z = ((z ^ (z >> np.uint64(30))) * _MIX1) & _MASK
        z = ((z ^ (z >> np.uint64(27))) * _MIX2) & _MASK
        return z ^ (z >> np.uint64(31))


def _fold_key(seed: int, key: tuple[int, ...]) -> np.uint64:
    state = splitmix64(np.uint64(_mask_int(seed)))
    with np.errstate(over="ignore"):
        for k in key:
            state = splitmix64((state ^ np.uint64(_mask_int(k))) + _GOLDEN & _MASK)
    return np.uint64(state)


def keyed_uniforms(seed: int, key: tuple[int, ...], counters: np.ndarray) -> np.ndarray:
    """Uniform(0,1) values indexed by counter under the stream (seed, key...).

    ``counters`` is an integer array; equal counters give equal values,
    regardless of array shape or call order.
    """
    state = _fold_key(seed, key)
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        bits = splitmix64(state ^ splitmix64(c * _GOLDEN & _MASK))
    # 53-bit mantissa yields uniforms on [0, 1)
    return (bits >> np.uint64(11)).astype(np.float64) * (2.0**-53)


def derive_seed(seed: int, *key: int) -> int:
    """A 63-bit sub-seed for handing to an independent component."""
    return int(_fold_key(seed, key) >> np.uint64(1))


class VoseAlias:
    """Alias table for O(1) draws from a finite distribution.

    Built once per donor pool; ``pick`` maps two uniforms per draw to a
    donor index, so callers control the randomness source.
    """

    def __init__(self, probs: np.ndarray):
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a nonempty vector")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ValueError("probs must be finite and nonnegative")
        total = probs.sum()
        if total <= 0:
            raise ValueError("probs must have positive total")
        from . import _kernels

        self.prob, self.alias = _kernels.build_alias(probs / total)

    def pick(self, u_slot: np.ndarray, u_coin: np.ndarray) -> np.ndarray:
        """Indices drawn using uniforms ``u_slot`` (slot choice) and ``u_coin``."""
        u_slot = np.asarray(u_slot, dtype=np.float64)
        u_coin = np.asarray(u_coin, dtype=np.float64)
        k = np.minimum((u_slot * self.prob.size).astype(np.int64), self.prob.size - 1)
        take_alias = u_coin >= self.prob[k]
        return np.where(take_alias, self.alias[k], k)
