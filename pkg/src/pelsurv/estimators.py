"""Point estimators.

The maximum pseudo empirical likelihood route: fit beta by maximizing
the pseudo log-likelihood, form the unit masses, then estimate the
overall mean

    y_bar = sum_hi p_tilde_hi Y_hi / sum_hi p_tilde_hi

and the category means

    y_bar_j = sum_hi p_tilde_hi f_h(Y_hi, z_j, beta) Y_hi
              / sum_hi p_tilde_hi f_h(Y_hi, z_j, beta)

which borrow every respondent in a stratum instead of only the ones
observed in category j.  The simple competitors reweight per-cell
respondent sample means and fail outright when a nonempty cell has no
respondents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PackedView, StratifiedSample
from .errors import EmptyRespondentCell, ZeroMassError
from .models import CategoryModel, ModelParams
from .optimize import SearchConfig, SearchResult, maximize
from .pel import (
    CellWeightTable,
    PelWeights,
    _view_of,
    f_matrix,
    masses_from_f,
    objective_plan,
    table_from_view,
)


def default_search_config(model: CategoryModel) -> SearchConfig:
    return SearchConfig(initial=ModelParams((0.0,) * model.param_dim))


def _fit(
    view: PackedView,
    table: CellWeightTable,
    model: CategoryModel,
    config: SearchConfig,
) -> tuple[SearchResult, PelWeights]:
    objective = objective_plan(view, table, model)
    result = maximize(objective, config)
    F = f_matrix(view, model, result.argmax.as_array())
    return result, masses_from_f(view, table, F)


def fit_mpele(
    sample: StratifiedSample,
    model: CategoryModel,
    config: SearchConfig = None,
) -> tuple[ModelParams, PelWeights]:
    """Maximize the pseudo log-likelihood; return beta_hat and the masses at it."""
    view = _view_of(sample)
    table = table_from_view(view)
    if config is None:
        config = default_search_config(model)
    result, weights = _fit(view, table, model, config)
    return result.argmax, weights


def overall_mean(weights: PelWeights, sample) -> float:
    """Mass-weighted respondent mean, an estimate of the population mean."""
    view = weights.view
    total = float(np.sum(weights.p_tilde))
    if not total > 0:
        raise ZeroMassError("total mass is zero")
    return float(np.sum(weights.p_tilde * view.r_y) / total)


def cell_mean(
    weights: PelWeights,
    sample,
    model: CategoryModel,
    params: ModelParams,
    j: int,
) -> float:
    """Estimated mean of Y among category j (0-based index)."""
    return float(cell_means(weights, sample, model, params)[j])


def cell_means(
    weights: PelWeights,
    sample,
    model: CategoryModel,
    params: ModelParams,
) -> np.ndarray:
    view = weights.view
    F = f_matrix(view, model, params.as_array())
    wf = weights.p_tilde[:, None] * F
    den = wf.sum(axis=0)
    if np.any(den <= 0):
        j = int(np.argmax(den <= 0))
        label = sample.categories.labels[j] if hasattr(sample, "categories") else j
        raise ZeroMassError(
            f"category {label} has zero estimated probability mass among respondents"
        )
    num = (wf * view.r_y[:, None]).sum(axis=0)
    return num / den


def _cell_sample_matrix(view: PackedView) -> tuple[np.ndarray, np.ndarray]:
    """Per-(h, j) respondent-weighted y means and respondent weight totals.

    Cells with no respondents hold NaN in the mean matrix; callers decide
    whether that is an error or a statistic to drop.
    """
    strat_r = view.stratum_of_respondents()
    key = strat_r * view.s + view.r_z0
    size = view.H * view.s
    den = np.bincount(key, weights=view.r_w, minlength=size)
    num = np.bincount(key, weights=view.r_w * view.r_y, minlength=size)
    means = np.full(size, np.nan)
    np.divide(num, den, out=means, where=den > 0)
    return means.reshape(view.H, view.s), den.reshape(view.H, view.s)


def simple_cell_sample_mean(sample, h: int, j: int) -> float:
    """Weighted mean of respondent y in cell (stratum label h, category index j)."""
    view = _view_of(sample)
    label = sample.categories.labels[j]
    rows = np.flatnonzero(view.h_labels == h)
    if rows.size == 0:
        raise EmptyRespondentCell(h, label)
    means, _ = _cell_sample_matrix(view)
    value = means[int(rows[0]), j]
    if np.isnan(value):
        raise EmptyRespondentCell(h, label)
    return float(value)


def _simple_from_arrays(
    view: PackedView, table: CellWeightTable
) -> tuple[float, np.ndarray, np.ndarray]:
    """(overall, per-category array, per-cell matrix); NaN marks failed pieces."""
    means, _ = _cell_sample_matrix(view)
    total = table.pi_hat * table.sum_w[:, None]  # all-unit weight per cell

    occupied = total > 0
    contrib = np.where(occupied, table.pi_hat * means, 0.0)
    overall = float(np.sum(view.W * contrib.sum(axis=1)))

    num = np.where(occupied, total * means, 0.0).sum(axis=0)
    den = total.sum(axis=0)
    per_cat = np.full(view.s, np.nan)
    np.divide(num, den, out=per_cat, where=den > 0)
    return overall, per_cat, means


def simple_estimators(sample) -> tuple[float, np.ndarray]:
    """Cell-reweighting estimates of the overall and per-category means.

    Overall: sum_h W_h sum_j pi_hat_hj m_hj with m_hj the cell respondent
    mean.  Per category: cell means combined across strata with all-unit
    cell weights.  Raises EmptyRespondentCell as soon as a cell that
    carries weight has no respondent to supply its mean.
    """
    view = _view_of(sample)
    table = table_from_view(view)
    overall, per_cat, means = _simple_from_arrays(view, table)
    bad = (table.pi_hat > 0) & np.isnan(means)
    if np.any(bad):
        hi, j = np.argwhere(bad)[0]
        label = sample.categories.labels[int(j)]
        raise EmptyRespondentCell(int(view.h_labels[hi]), label)
    return overall, per_cat


@dataclass(frozen=True, eq=False)
class EstimateReport:
    """Everything the estimate command reports for one sample."""

    beta_hat: ModelParams
    y_bar_hat: float
    cell_means: np.ndarray
    simple_overall: float
    simple_cell_means: np.ndarray
    cell_sample_means: np.ndarray
    search: SearchResult
    masses: PelWeights


def estimate(
    sample: StratifiedSample,
    model: CategoryModel,
    config: SearchConfig = None,
) -> EstimateReport:
    """Full point-estimation pass: fit, PEL means, simple competitors.

    The simple estimators can fail on data the PEL route handles (empty
    respondent cells); they come back as NaN here rather than aborting
    the report, and the CLI surfaces a diagnostic.
    """
    view = _view_of(sample)
    table = table_from_view(view)
    if config is None:
        config = default_search_config(model)
    result, weights = _fit(view, table, model, config)
    y_bar = overall_mean(weights, sample)
    cells = cell_means(weights, sample, model, result.argmax)

    # NaN propagation in the array core already marks exactly the simple
    # statistics that an empty respondent cell poisons
    simple_overall, simple_cells, cell_matrix = _simple_from_arrays(view, table)

    return EstimateReport(
        beta_hat=result.argmax,
        y_bar_hat=y_bar,
        cell_means=cells,
        simple_overall=simple_overall,
        simple_cell_means=simple_cells,
        cell_sample_means=cell_matrix,
        search=result,
        masses=weights,
    )
