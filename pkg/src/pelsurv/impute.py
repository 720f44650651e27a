"""Imputation of nonrespondent y values.

Four procedures, two families.  The simple family works cell by cell:
a nonrespondent in cell (h, j) takes the cell respondent mean, or a
donor drawn from the cell respondents with probability proportional to
weight.  The likelihood family borrows ALL respondents in the stratum,
reweighted by f_h(Y, z_j, beta_hat) p_hat: the mean variant imputes

    y_hj = sum_i p_hat_hi f_h(Y_hi, z_j, beta) Y_hi
           / sum_i p_hat_hi f_h(Y_hi, z_j, beta)

and the random variant draws donors with those same weights.  Random
draws are keyed by (seed, stratum, unit position), so the imputation of
one unit never depends on how many others are being imputed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import PackedView, StratifiedSample
from .errors import EmptyRespondentCell, ZeroMassError
from .estimators import _cell_sample_matrix
from .models import CategoryModel, ModelParams
from .pel import PelWeights, _view_of, f_matrix
from .rng import TAG_IMPUTE_PEL, TAG_IMPUTE_SIMPLE, VoseAlias, keyed_uniforms

_METHODS = ("simple_mean", "simple_random", "pel_mean", "pel_random")


@dataclass(frozen=True, eq=False)
class ImputedSample:
    """A sample with every missing y filled in.

    ``values`` is aligned to ``base.units``: respondents keep their
    observed y, nonrespondents carry the imputed value and are marked in
    ``imputed_mask``.
    """

    base: StratifiedSample
    values: np.ndarray
    imputed_mask: np.ndarray
    method: str
    rng_seed: Optional[int] = None
    params_used: Optional[ModelParams] = None

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"unknown imputation method {self.method!r}")


def _pel_value_matrix(view: PackedView, p_hat: np.ndarray, F: np.ndarray) -> np.ndarray:
    """(H, s) matrix of f-reweighted stratum means; NaN where mass vanishes."""
    strat_r = view.stratum_of_respondents()
    num = np.empty((view.H, view.s))
    den = np.empty((view.H, view.s))
    for j in range(view.s):
        wj = p_hat * F[:, j]
        den[:, j] = np.bincount(strat_r, weights=wj, minlength=view.H)
        num[:, j] = np.bincount(strat_r, weights=wj * view.r_y, minlength=view.H)
    out = np.full((view.H, view.s), np.nan)
    np.divide(num, den, out=out, where=den > 0)
    return out


def _fill_from_matrix(view: PackedView, matrix: np.ndarray) -> np.ndarray:
    """Values in view unit order: observed y, or the unit's (h, j) matrix entry."""
    vals = view.u_y.copy()
    nr = ~view.u_resp
    vals[nr] = matrix[view.stratum_of_units()[nr], view.u_z0[nr]]
    return vals


def _draw_values(view: PackedView, seed: int, tag: int, pool_for) -> np.ndarray:
    """Donor-draw core shared by both random methods.

    ``pool_for(hi, j)`` returns (respondent row indices, probabilities) or
    None when the pool is empty; empty pools leave NaN for the caller to
    treat.  Each nonrespondent consumes the two counters (2k, 2k+1) of
    the stream (seed, tag, stratum label), k its position within the
    stratum, so draws are independent of evaluation order.
    """
    vals = view.u_y.copy()
    for hi in range(view.H):
        lo, hi_u = int(view.u_start[hi]), int(view.u_start[hi + 1])
        local = np.flatnonzero(~view.u_resp[lo:hi_u])
        if local.size == 0:
            continue
        u = keyed_uniforms(
            seed,
            (tag, int(view.h_labels[hi])),
            np.stack([2 * local, 2 * local + 1], axis=1),
        )
        z_here = view.u_z0[lo + local]
        for j in np.unique(z_here):
            pool = pool_for(hi, int(j))
            if pool is None:
                continue
            members, probs = pool
            sel = z_here == j
            picks = VoseAlias(probs).pick(u[sel, 0], u[sel, 1])
            vals[lo + local[sel]] = view.r_y[members[picks]]
    return vals


def _simple_pool(view: PackedView):
    def pool_for(hi: int, j: int):
        rlo, rhi = int(view.r_start[hi]), int(view.r_start[hi + 1])
        members = rlo + np.flatnonzero(view.r_z0[rlo:rhi] == j)
        if members.size == 0:
            return None
        return members, view.r_w[members]

    return pool_for


def _pel_pool(view: PackedView, p_hat: np.ndarray, F: np.ndarray):
    def pool_for(hi: int, j: int):
        rlo, rhi = int(view.r_start[hi]), int(view.r_start[hi + 1])
        members = np.arange(rlo, rhi)
        probs = p_hat[members] * F[members, j]
        if members.size == 0 or probs.sum() <= 0:
            return None
        return members, probs

    return pool_for


def _simple_mean_values(view: PackedView) -> np.ndarray:
    means, _ = _cell_sample_matrix(view)
    return _fill_from_matrix(view, means)


def _simple_random_values(view: PackedView, seed: int) -> np.ndarray:
    return _draw_values(view, seed, TAG_IMPUTE_SIMPLE, _simple_pool(view))


def _pel_mean_values(view: PackedView, p_hat: np.ndarray, F: np.ndarray) -> np.ndarray:
    return _fill_from_matrix(view, _pel_value_matrix(view, p_hat, F))


def _pel_random_values(
    view: PackedView, p_hat: np.ndarray, F: np.ndarray, seed: int
) -> np.ndarray:
    return _draw_values(view, seed, TAG_IMPUTE_PEL, _pel_pool(view, p_hat, F))


def _raise_on_nan(view: PackedView, labels, vals: np.ndarray, pel: bool):
    nan = np.isnan(vals)
    if not np.any(nan):
        return
    i = int(np.argmax(nan))
    hi = int(np.searchsorted(view.u_start, i, side="right")) - 1
    h, label = int(view.h_labels[hi]), labels[int(view.u_z0[i])]
    if pel:
        raise ZeroMassError(
            f"no donor mass for category {label} in stratum {h}"
        )
    raise EmptyRespondentCell(h, label)


def _finish(view, sample, vals, method, seed=None, params=None) -> ImputedSample:
    values = np.empty(len(sample.units))
    values[view.u_pos] = vals
    mask = np.zeros(len(sample.units), dtype=bool)
    mask[view.u_pos[~view.u_resp]] = True
    return ImputedSample(
        base=sample, values=values, imputed_mask=mask,
        method=method, rng_seed=seed, params_used=params,
    )


def impute_simple_mean(sample: StratifiedSample) -> ImputedSample:
    """Each nonrespondent takes its cell's respondent-weighted mean."""
    view = _view_of(sample)
    vals = _simple_mean_values(view)
    _raise_on_nan(view, sample.categories.labels, vals, pel=False)
    return _finish(view, sample, vals, "simple_mean")


def impute_simple_random(sample: StratifiedSample, seed: int) -> ImputedSample:
    """Each nonrespondent draws a donor from its cell, proportional to weight."""
    view = _view_of(sample)
    vals = _simple_random_values(view, seed)
    _raise_on_nan(view, sample.categories.labels, vals, pel=False)
    return _finish(view, sample, vals, "simple_random", seed=seed)


def impute_pel_mean(
    sample: StratifiedSample,
    model: CategoryModel,
    params: ModelParams,
    weights: PelWeights,
) -> ImputedSample:
    """Each nonrespondent takes the f-reweighted mean of its whole stratum."""
    view = weights.view
    F = f_matrix(view, model, params.as_array())
    vals = _pel_mean_values(view, weights.p_hat, F)
    _raise_on_nan(view, sample.categories.labels, vals, pel=True)
    return _finish(view, sample, vals, "pel_mean", params=params)


def impute_pel_random(
    sample: StratifiedSample,
    model: CategoryModel,
    params: ModelParams,
    weights: PelWeights,
    seed: int,
) -> ImputedSample:
    """Each nonrespondent draws a donor from its whole stratum, weight p_hat * f."""
    view = weights.view
    F = f_matrix(view, model, params.as_array())
    vals = _pel_random_values(view, weights.p_hat, F, seed)
    _raise_on_nan(view, sample.categories.labels, vals, pel=True)
    return _finish(view, sample, vals, "pel_random", seed=seed, params=params)


def _post_values_stats(view: PackedView, vals: np.ndarray) -> tuple[float, np.ndarray]:
    """(overall, per-category) post-imputation estimates from view-ordered values.

    The overall estimate is the plain weighted sum (weights are scaled so
    they total about 1 over the sample); category means are weighted
    within each observed category.  NaN values poison exactly the
    statistics they touch.
    """
    y_i = float(np.sum(view.u_w * vals))
    den = np.bincount(view.u_z0, weights=view.u_w, minlength=view.s)
    num = np.bincount(view.u_z0, weights=view.u_w * vals, minlength=view.s)
    per = np.full(view.s, np.nan)
    np.divide(num, den, out=per, where=den > 0)
    return y_i, per


def post_imputation_estimates(imp: ImputedSample) -> tuple[float, np.ndarray]:
    """Overall and per-category mean estimates from the completed data."""
    view = _view_of(imp.base)
    vals = imp.values[view.u_pos]
    y_i, per = _post_values_stats(view, vals)
    absent = np.bincount(view.u_z0, minlength=view.s) == 0
    if np.any(absent):
        label = imp.base.categories.labels[int(np.argmax(absent))]
        raise ZeroMassError(
            f"category {label} has no sampled units; its mean is undefined"
        )
    return y_i, per
