"""Pseudo empirical likelihood core.

Given a stratified sample with nonresponse and a category model, this
module computes the plug-in cell probabilities and nonrespondent cell
totals, the likelihood masses of the responding units, the pseudo
log-likelihood to be maximized over beta, the multiplier-constraint
residuals, and the distribution estimator built from the masses.

Plug-in probabilities use ALL sampled units (respondents and
nonrespondents):

    pi_hat_hj = sum_i w_hi 1{Z_hi = z_j} / sum_i w_hi        (all i)
    a_hj      = sum over nonrespondents of w_hi 1{Z_hi = z_j}

Mass of responding unit i in stratum h at parameters beta:

    p_hi = w_hi / (sum_i w_hi - sum_j (a_hj / pi_hat_hj) f_h(Y_hi, z_j, beta))

with the convention a_hj = 0  =>  the j term contributes nothing, even
when pi_hat_hj = 0.  The objective is

    l(beta) = sum_h [ sum_resp w_hi log(w_hi f_h(Y_hi, Z_hi, beta) / denom_hi)
                      + sum_j a_hj log pi_hat_hj ]

and evaluates to the Rejected sentinel (-inf) whenever a denominator is
nonpositive, so a derivative-free search can retreat.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import _kernels
from .data import PackedView, StratifiedSample
from .errors import NonpositiveDenominator, ZeroMassError
from .models import CategoryModel, ModelParams, ProportionalOddsModel

# Objective value signalling inadmissible parameters; compares below
# every finite value, which is exactly what a maximizer needs.
REJECTED = float("-inf")

_PROB_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class CellWeightTable:
    """Per-(h, j) plug-in quantities.

    ``a`` holds nonrespondent weight totals, ``pi_hat`` the all-unit
    weighted category shares, ``sum_w`` the stratum weight totals.
    ``ratio`` is a/pi_hat with 0/0 treated as 0, and ``log_term`` is
    sum a*log(pi_hat) over cells with a > 0; both are precomputed
    because the objective needs them at every evaluation.
    """

    h_labels: np.ndarray
    a: np.ndarray
    pi_hat: np.ndarray
    sum_w: np.ndarray
    ratio: np.ndarray
    log_term: float


def _view_of(sample: Union[StratifiedSample, PackedView]) -> PackedView:
    return sample if isinstance(sample, PackedView) else sample.packed()


def table_from_view(view: PackedView) -> CellWeightTable:
    key = view.stratum_of_units() * view.s + view.u_z0
    total = np.bincount(key, weights=view.u_w, minlength=view.H * view.s)
    total = total.reshape(view.H, view.s).astype(np.float64)
    nr = ~view.u_resp
    # bincount of an empty selection comes back int64, hence the cast
    a = np.bincount(key[nr], weights=view.u_w[nr], minlength=view.H * view.s)
    a = a.reshape(view.H, view.s).astype(np.float64)
    sum_w = total.sum(axis=1)
    pi_hat = total / sum_w[:, None]
    has_a = a > 0
    ratio = np.zeros_like(a)
    # a > 0 forces pi_hat > 0 because nonrespondent weight is part of the total
    np.divide(a, pi_hat, out=ratio, where=has_a)
    log_term = float(np.sum(a[has_a] * np.log(np.maximum(pi_hat[has_a], _PROB_FLOOR))))
    return CellWeightTable(
        h_labels=view.h_labels, a=a, pi_hat=pi_hat, sum_w=sum_w,
        ratio=ratio, log_term=log_term,
    )


def cell_weight_table(sample: StratifiedSample) -> CellWeightTable:
    """Plug-in probabilities and nonrespondent cell totals."""
    return table_from_view(_view_of(sample))


def f_matrix(view: PackedView, model: CategoryModel, beta: np.ndarray) -> np.ndarray:
    """(respondents, s) matrix of category probabilities at beta."""
    beta = np.asarray(beta, dtype=np.float64)
    if model.per_stratum:
        parts = []
        for hi in range(view.H):
            lo, hi_ = view.r_start[hi], view.r_start[hi + 1]
            parts.append(model.prob_matrix(int(view.h_labels[hi]), view.r_y[lo:hi_], beta))
        F = np.vstack(parts) if parts else np.empty((0, view.s))
    else:
        F = model.prob_matrix(int(view.h_labels[0]), view.r_y, beta)
    return np.maximum(F, 0.0)


def _kernel_applicable(model: CategoryModel) -> bool:
    return (
        isinstance(model, ProportionalOddsModel)
        and model.cutpoints_mode == "fixed"
        and _kernels.use_numba()
    )


def objective_plan(
    view: PackedView, table: CellWeightTable, model: CategoryModel
) -> Callable[[np.ndarray], float]:
    """A fast beta -> l(beta) closure over fixed data.

    Fixed-cutpoint proportional odds dispatches to the compiled kernel
    when the numba backend is active; everything else runs the general
    vectorized path.
    """
    if _kernel_applicable(model):
        neg_exp_cut = np.exp(-model.fixed_cutpoints)

        def evaluate(beta: np.ndarray) -> float:
            return float(
                _kernels.objective_po_fixed(
                    view.r_y, view.r_w, view.r_z0, view.r_start,
                    table.sum_w, table.ratio, neg_exp_cut,
                    float(np.asarray(beta, dtype=np.float64).reshape(-1)[0]),
                    table.log_term,
                )
            )

        return evaluate

    strat_r = view.stratum_of_respondents()
    sumw_r = table.sum_w[strat_r]
    ratio_r = table.ratio[strat_r]
    rows = np.arange(view.r_y.size)

    def evaluate(beta: np.ndarray) -> float:
        F = f_matrix(view, model, beta)
        denom = sumw_r - np.einsum("ij,ij->i", F, ratio_r)
        if denom.size and np.min(denom) <= 0.0:
            return REJECTED
        fz = np.maximum(F[rows, view.r_z0], _PROB_FLOOR)
        return float(np.sum(view.r_w * np.log(view.r_w * fz / denom)) + table.log_term)

    return evaluate


def make_objective(
    sample: Union[StratifiedSample, PackedView],
    model: CategoryModel,
    table: CellWeightTable = None,
) -> Callable[[np.ndarray], float]:
    view = _view_of(sample)
    return objective_plan(view, table if table is not None else table_from_view(view), model)


def objective(
    sample: Union[StratifiedSample, PackedView],
    model: CategoryModel,
    params: ModelParams,
    table: CellWeightTable = None,
) -> float:
    """l(beta, pi_hat); REJECTED (-inf) outside the admissible region."""
    return make_objective(sample, model, table)(params.as_array())


@dataclass(frozen=True, eq=False)
class PelWeights:
    """Likelihood masses of the responding units.

    ``p_hat`` follows the view's canonical respondent order; ``p_tilde``
    is W_h * p_hat.  ``stratum_sums`` holds per-stratum totals of p_hat,
    which approach 1 as samples grow.
    """

    p_hat: np.ndarray
    p_tilde: np.ndarray
    stratum_sums: np.ndarray
    view: PackedView

    def by_unit(self, sample: StratifiedSample) -> np.ndarray:
        """Masses aligned to sample.units order; NaN for nonrespondents."""
        out = np.full(len(sample.units), np.nan)
        out[self.view.r_pos] = self.p_hat
        return out


def masses_from_f(view: PackedView, table: CellWeightTable, F: np.ndarray) -> PelWeights:
    strat_r = view.stratum_of_respondents()
    denom = table.sum_w[strat_r] - np.einsum("ij,ij->i", F, table.ratio[strat_r])
    bad = denom <= 0.0
    if np.any(bad):
        first = int(np.argmax(bad))
        raise NonpositiveDenominator(
            int(view.h_labels[strat_r[first]]), int(view.r_pos[first])
        )
    p_hat = view.r_w / denom
    p_tilde = view.W[strat_r] * p_hat
    sums = np.bincount(strat_r, weights=p_hat, minlength=view.H)
    return PelWeights(p_hat=p_hat, p_tilde=p_tilde, stratum_sums=sums, view=view)


def pel_masses(
    sample: Union[StratifiedSample, PackedView],
    model: CategoryModel,
    params: ModelParams,
    table: CellWeightTable = None,
) -> PelWeights:
    """Masses p_hat and p_tilde at the given parameters.

    Raises NonpositiveDenominator when beta sits outside the admissible
    region; the optimizer sees the same condition as a REJECTED value.
    """
    view = _view_of(sample)
    if table is None:
        table = table_from_view(view)
    F = f_matrix(view, model, params.as_array())
    return masses_from_f(view, table, F)


def residuals_from_f(
    view: PackedView, table: CellWeightTable, F: np.ndarray, weights: PelWeights
) -> np.ndarray:
    strat_r = view.stratum_of_respondents()
    out = np.empty((view.H, view.s))
    for j in range(view.s):
        out[:, j] = np.bincount(strat_r, weights=weights.p_hat * F[:, j], minlength=view.H)
    out -= table.pi_hat * weights.stratum_sums[:, None]
    return out


def constraint_residuals(
    sample: Union[StratifiedSample, PackedView],
    model: CategoryModel,
    params: ModelParams,
    table: CellWeightTable = None,
) -> np.ndarray:
    """(H, s) matrix with entries sum_i p_hat_hi (f_h(Y_hi, z_j, beta) - pi_hat_hj).

    Not zero at the maximizer; it shrinks at the usual root-n rate as
    samples grow, which is what the rate tests exercise.
    """
    view = _view_of(sample)
    if table is None:
        table = table_from_view(view)
    F = f_matrix(view, model, params.as_array())
    weights = masses_from_f(view, table, F)
    return residuals_from_f(view, table, F, weights)


@dataclass(frozen=True, eq=False)
class DistributionEstimate:
    """Step-function distribution estimate over respondent y values.

    ``masses`` are normalized p_tilde aggregated per distinct support
    point; ``ghat_total`` is the unnormalized total, which generally
    differs from 1 under nonresponse.
    """

    support: np.ndarray
    masses: np.ndarray
    ghat_total: float

    def cdf(self, y) -> np.ndarray:
        """F(y), right-continuous, 0 below the support, 1 at and above its top."""
        cum = np.cumsum(self.masses)
        idx = np.searchsorted(self.support, np.asarray(y, dtype=np.float64), side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    def ghat(self, y) -> np.ndarray:
        """Unnormalized version; ghat(+inf) equals ghat_total."""
        return self.cdf(y) * self.ghat_total


def distribution_estimate(
    weights: PelWeights, sample: Union[StratifiedSample, PackedView]
) -> DistributionEstimate:
    view = _view_of(sample)
    total = float(np.sum(weights.p_tilde))
    if not total > 0:
        raise ZeroMassError("all masses are zero; no respondents to support the estimate")
    support, inverse = np.unique(view.r_y, return_inverse=True)
    agg = np.bincount(inverse, weights=weights.p_tilde, minlength=support.size)
    return DistributionEstimate(support=support, masses=agg / total, ghat_total=total)
