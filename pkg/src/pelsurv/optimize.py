"""Derivative-free simplex maximization.

A Nelder-Mead search over parameter vectors, tuned for objectives that
return -inf (the Rejected sentinel) outside an admissible region: such
values order below every finite value, so the simplex retreats from the
boundary instead of crashing.  Searches are deterministic; identical
configuration and objective give bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InitialPointRejected, PelsurvError
from .models import ModelParams

_REFLECT = 1.0
_EXPAND = 2.0
_CONTRACT = 0.5
_SHRINK = 0.5


@dataclass(frozen=True)
class SearchConfig:
    """Search settings.

    ``initial_simplex_scale`` is an absolute per-coordinate step used to
    build the starting simplex; ``max_evals`` defaults to 2000 * p; the
    search restarts ``restarts`` times, re-seeding a fresh simplex at
    the incumbent to guard against premature collapse near a rejected
    boundary.
    """

    initial: ModelParams
    initial_simplex_scale: float = 0.1
    tol_f: float = 1e-10
    tol_x: float = 1e-8
    max_evals: int | None = None
    restarts: int = 2

    def __post_init__(self):
        if self.initial_simplex_scale <= 0:
            raise PelsurvError("initial_simplex_scale must be positive")
        if self.tol_f <= 0 or self.tol_x <= 0:
            raise PelsurvError("tolerances must be positive")
        if self.restarts < 0:
            raise PelsurvError("restarts must be nonnegative")

    def budget(self) -> int:
        p = len(self.initial.beta)
        b = self.max_evals if self.max_evals is not None else 2000 * p
        if b < p + 1:
            raise PelsurvError(f"max_evals {b} cannot even evaluate one simplex")
        return b


@dataclass(frozen=True)
class SearchResult:
    argmax: ModelParams
    value: float
    evals: int
    converged: bool
    rejected_fraction: float


class _BudgetExhausted(Exception):
    pass


def maximize(f, config: SearchConfig) -> SearchResult:
    """Maximize ``f`` over p-vectors.

    ``f`` maps a numpy vector to a float or -inf.  Returns the best
    point seen; ``converged`` is False when the evaluation budget ran
    out first (no exception, callers decide).  Raises
    InitialPointRejected if no admissible starting point is found after
    32 growing perturbations of the initial point.
    """
    x0 = np.asarray(config.initial.beta, dtype=np.float64)
    p = x0.size
    budget = config.budget()
    scale = config.initial_simplex_scale

    state = {"evals": 0, "rejected": 0, "best_x": None, "best_f": -np.inf}

    def call(x: np.ndarray) -> float:
        if state["evals"] >= budget:
            raise _BudgetExhausted()
        state["evals"] += 1
        v = float(f(x))
        if v != v:  # NaN counts as a rejection
            v = -np.inf
        if v == -np.inf:
            state["rejected"] += 1
        elif v > state["best_f"]:
            state["best_f"] = v
            state["best_x"] = x.copy()
        return v

    f0 = call(x0)
    if f0 == -np.inf:
        for k in range(32):
            cand = x0.copy()
            axis = k % p
            sign = 1.0 if (k // p) % 2 == 0 else -1.0
            cand[axis] += sign * scale * (2.0 ** (k // (2 * p)))
            if call(cand) > -np.inf:
                break
        else:
            raise InitialPointRejected(
                "objective rejected the initial point and 32 perturbations of it"
            )

    converged = False
    try:
        for _ in range(config.restarts + 1):
            converged = _one_search(call, state["best_x"], config, budget, state)
    except _BudgetExhausted:
        converged = False

    return SearchResult(
        argmax=ModelParams(tuple(state["best_x"])),
        value=state["best_f"],
        evals=state["evals"],
        converged=converged,
        rejected_fraction=state["rejected"] / state["evals"],
    )


def _one_search(call, x_start, config, budget, state) -> bool:
    p = x_start.size
    scale = config.initial_simplex_scale
    xs = np.tile(x_start, (p + 1, 1))
    for i in range(p):
        xs[i + 1, i] += scale
    fs = np.array([call(x) for x in xs])

    while True:
        order = np.argsort(-fs, kind="stable")
        xs = xs[order]
        fs = fs[order]

        diam = float(np.max(np.abs(xs[1:] - xs[0]))) if p else 0.0
        spread = fs[0] - fs[-1]
        if diam < config.tol_x and spread < config.tol_f:
            return True

        centroid = xs[:-1].mean(axis=0)
        xr = centroid + _REFLECT * (centroid - xs[-1])
        fr = call(xr)
        if fr > fs[0]:
            xe = centroid + _EXPAND * (centroid - xs[-1])
            fe = call(xe)
            if fe > fr:
                xs[-1], fs[-1] = xe, fe
            else:
                xs[-1], fs[-1] = xr, fr
        elif fr > fs[-2]:
            xs[-1], fs[-1] = xr, fr
        elif fr > fs[-1]:
            xc = centroid + _CONTRACT * (xr - centroid)
            fc = call(xc)
            if fc >= fr:
                xs[-1], fs[-1] = xc, fc
            else:
                _shrink(call, xs, fs)
        else:
            xc = centroid + _CONTRACT * (xs[-1] - centroid)
            fc = call(xc)
            if fc > fs[-1]:
                xs[-1], fs[-1] = xc, fc
            else:
                _shrink(call, xs, fs)


def _shrink(call, xs, fs):
    for i in range(1, xs.shape[0]):
        xs[i] = xs[0] + _SHRINK * (xs[i] - xs[0])
        fs[i] = call(xs[i])
