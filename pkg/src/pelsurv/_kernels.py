"""Compiled hot kernels.

The pseudo log-likelihood is evaluated ~10^5 times per simulation study,
so the fixed-cutpoint proportional-odds case gets a compiled kernel.
Everything here has a plain-Python/NumPy twin; PELSURV_BACKEND picks the
implementation (auto / numba / numpy).
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def use_numba() -> bool:
    """Whether compiled kernels should be used right now."""
    mode = os.environ.get("PELSURV_BACKEND", "auto").lower()
    if mode in ("", "auto"):
        return HAVE_NUMBA
    if mode == "numpy":
        return False
    if mode == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("PELSURV_BACKEND=numba but numba is not importable")
        return True
    raise ValueError(f"unknown PELSURV_BACKEND value {mode!r}")


@njit(cache=True)
def objective_po_fixed(r_y, r_w, r_z0, r_start, sum_w, ratio, neg_exp_cut, slope, const_term):
    """Pseudo log-likelihood, proportional odds with fixed cutpoints.

    neg_exp_cut holds exp(-c_j); the cumulative probability is then
    1 / (1 + exp(-c_j) * exp(-slope*y)), one exp per respondent.
    Returns -inf when any mass denominator is nonpositive.
    """
    H = r_start.size - 1
    s = ratio.shape[1]
    total = const_term
    for h in range(H):
        Sh = sum_w[h]
        for i in range(r_start[h], r_start[h + 1]):
            e = math.exp(-slope * r_y[i])
            z = r_z0[i]
            prev = 0.0
            denom = Sh
            fz = 0.0
            for j in range(s - 1):
                cdf = 1.0 / (1.0 + neg_exp_cut[j] * e)
                f = cdf - prev
                if f < 0.0:
                    f = 0.0
                prev = cdf
                denom -= ratio[h, j] * f
                if j == z:
                    fz = f
            f_last = 1.0 - prev
            if f_last < 0.0:
                f_last = 0.0
            denom -= ratio[h, s - 1] * f_last
            if z == s - 1:
                fz = f_last
            if denom <= 0.0:
                return -np.inf
            if fz < 1e-300:
                fz = 1e-300
            w = r_w[i]
            total += w * math.log(w * fz / denom)
    return total


@njit(cache=True)
def objective_po_fixed_grid(r_y, r_w, r_z0, r_start, sum_w, ratio, neg_exp_cut, slopes, const_term):
    """Objective over a vector of slopes; used by grid-search checks."""
    out = np.empty(slopes.size)
    for k in range(slopes.size):
        out[k] = objective_po_fixed(
            r_y, r_w, r_z0, r_start, sum_w, ratio, neg_exp_cut, slopes[k], const_term
        )
    return out


def _build_alias_impl(probs, prob_out, alias_out):
    # Vose construction: split entries into small/large stacks and pair them
    n = probs.size
    scaled = np.empty(n)
    small = np.empty(n, dtype=np.int64)
    large = np.empty(n, dtype=np.int64)
    n_small = 0
    n_large = 0
    for i in range(n):
        scaled[i] = probs[i] * n
        if scaled[i] < 1.0:
            small[n_small] = i
            n_small += 1
        else:
            large[n_large] = i
            n_large += 1
    while n_small > 0 and n_large > 0:
        n_small -= 1
        s_idx = small[n_small]
        n_large -= 1
        l_idx = large[n_large]
        prob_out[s_idx] = scaled[s_idx]
        alias_out[s_idx] = l_idx
        scaled[l_idx] = (scaled[l_idx] + scaled[s_idx]) - 1.0
        if scaled[l_idx] < 1.0:
            small[n_small] = l_idx
            n_small += 1
        else:
            large[n_large] = l_idx
            n_large += 1
    while n_large > 0:
        n_large -= 1
        prob_out[large[n_large]] = 1.0
        alias_out[large[n_large]] = large[n_large]
    while n_small > 0:
        # reachable only through rounding; the entry keeps full mass
        n_small -= 1
        prob_out[small[n_small]] = 1.0
        alias_out[small[n_small]] = small[n_small]


_build_alias_py = _build_alias_impl
_build_alias_nb = njit(cache=True)(_build_alias_impl) if HAVE_NUMBA else _build_alias_impl


def build_alias(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Alias table (prob, alias) for a normalized probability vector."""
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    prob_out = np.empty(probs.size)
    alias_out = np.empty(probs.size, dtype=np.int64)
    impl = _build_alias_nb if use_numba() else _build_alias_py
    impl(probs, prob_out, alias_out)
    return prob_out, alias_out
