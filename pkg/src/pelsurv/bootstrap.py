"""Stratified with-replacement bootstrap.

Each replicate redraws n_h units with replacement within every stratum,
reruns the FULL estimation pipeline on the redrawn sample (plug-in
probabilities, likelihood maximization, and re-imputation when the
statistic is an imputed estimator), and the variance is the sample
variance across replicates.  Replicate b's randomness is keyed by
(seed, b), so enlarging B extends the replicate set without reshuffling
earlier draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PackedView, StratifiedSample
from .errors import EstimationError, PelsurvError
from .pel import _view_of
from .rng import TAG_BOOTSTRAP, derive_seed, keyed_generator

Z_95 = 1.96


def _resample_indices(view: PackedView, seed: int, replicate_index: int) -> np.ndarray:
    """View-row indices of one redraw; one RNG stream per replicate."""
    gen = keyed_generator(seed, TAG_BOOTSTRAP, replicate_index)
    parts = []
    for hi in range(view.H):
        n_h = int(view.n[hi])
        parts.append(int(view.u_start[hi]) + gen.integers(0, n_h, size=n_h))
    return np.concatenate(parts)


def resample(sample: StratifiedSample, seed: int, replicate_index: int) -> StratifiedSample:
    """One bootstrap replicate of the sample.

    Units keep their weight, category, and (possibly missing) y; stratum
    metadata is unchanged; each stratum contributes exactly n_h draws.
    """
    view = _view_of(sample)
    idx = _resample_indices(view, seed, replicate_index)
    units = tuple(sample.units[p] for p in view.u_pos[idx])
    return StratifiedSample(categories=sample.categories, strata=sample.strata, units=units)


def confidence_interval(point: float, vboot: float) -> tuple[float, float]:
    """Normal-theory 95% interval, point +- 1.96 * sqrt(vboot)."""
    if vboot < 0:
        raise PelsurvError(f"negative bootstrap variance {vboot}")
    half = Z_95 * float(np.sqrt(vboot))
    return point - half, point + half

# A statistic procedure maps (sample, rng_seed) to {name: value}; the
# seed feeds re-imputation so replicates stay independent.  NaN values
# and EstimationError both mean "this replicate failed", the exception
# failing every statistic at once.


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    B: int
    statistics: tuple
    point: dict
    replicate_values: dict
    vboot: dict
    ci_95: dict
    failures: dict

    @property
    def unreliable(self) -> bool:
        """True when any statistic lost more than 2% of its replicates."""
        return any(k > 0.02 * self.B for k in self.failures.values())


def bootstrap_variance(
    sample: StratifiedSample,
    estimator,
    B: int,
    seed: int,
    point_seed: int = None,
) -> BootstrapResult:
    """Bootstrap variance of every statistic the estimator reports.

    The point estimate runs on the original sample with ``point_seed``
    (default: ``seed``); replicate b runs on ``resample(sample, seed, b)``
    with a seed derived from (seed, b).  Failed replicates are dropped
    per statistic and counted, never retried.
    """
    if B < 2:
        raise PelsurvError("B must be at least 2")
    point = dict(estimator(sample, seed if point_seed is None else point_seed))
    names = tuple(point)
    values = np.full((B, len(names)), np.nan)
    for b in range(B):
        replicate = resample(sample, seed, b)
        try:
            got = estimator(replicate, derive_seed(seed, TAG_BOOTSTRAP, b, 1))
        except EstimationError:
            continue
        for k, name in enumerate(names):
            values[b, k] = got.get(name, np.nan)

    failures, vboot, ci = {}, {}, {}
    for k, name in enumerate(names):
        col = values[:, k]
        ok = col[~np.isnan(col)]
        failures[name] = B - ok.size
        vboot[name] = float(np.var(ok, ddof=1)) if ok.size >= 2 else float("nan")
        ci[name] = (
            confidence_interval(point[name], vboot[name])
            if vboot[name] == vboot[name] and point[name] == point[name]
            else (float("nan"), float("nan"))
        )
    return BootstrapResult(
        B=B,
        statistics=names,
        point=point,
        replicate_values={n: values[:, k].copy() for k, n in enumerate(names)},
        vboot=vboot,
        ci_95=ci,
        failures=failures,
    )
