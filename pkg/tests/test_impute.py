"""Imputation: cell donors, likelihood-reweighted donors, and the
post-imputation estimators.

The likelihood-family oracle is a three-respondent stratum worked by
hand.  Respondents (y, w, z) = (1, 1, z1), (2, 1, z2), (4, 2, z1) plus
one z2 nonrespondent of weight 1.  With category probabilities
f2(y) = 0.2 + 0.01 y (a made-up two-cell model):

    S = 5, a = (0, 1), pi_hat = (3/5, 2/5), ratio = (0, 2.5)
    p_i = w_i / (5 - 2.5 f2(y_i))
    imputed value = sum p f2 y / sum p f2
                  = 0.5821674151596944 / 0.2054564856397761
                  = 2.833531457266334
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pelsurv.data import CategorySpace, SampleUnit, StratifiedSample, make_strata
from pelsurv.errors import EmptyRespondentCell, ZeroMassError
from pelsurv.estimators import fit_mpele
from pelsurv.impute import (
    ImputedSample,
    impute_pel_mean,
    impute_pel_random,
    impute_simple_mean,
    impute_simple_random,
    post_imputation_estimates,
)
from pelsurv.models import CategoryModel, ModelParams, ProportionalOddsModel
from pelsurv.pel import pel_masses

from conftest import build_sample

PEL_MEAN_ORACLE = 2.833531457266334


class TwoCellAffine(CategoryModel):
    """f2(y) = b0 + 0.01 y; a tiny model whose algebra is easy by hand."""

    n_categories = 2
    param_dim = 1

    def prob_matrix(self, h, y, beta):
        y = np.asarray(y, dtype=np.float64)
        f2 = beta[0] + 0.01 * y
        return np.column_stack([1.0 - f2, f2])


def toy_sample():
    cats = CategorySpace(("z1", "z2"))
    strata = make_strata((10,))
    units = (
        SampleUnit(1, 1.0, 1, 1.0),
        SampleUnit(1, 1.0, 2, 2.0),
        SampleUnit(1, 2.0, 1, 4.0),
        SampleUnit(1, 1.0, 2, None),
    )
    return StratifiedSample(cats, strata, units)


def toy_fitted():
    sample = toy_sample()
    model = TwoCellAffine()
    params = ModelParams((0.2,))
    weights = pel_masses(sample, model, params)
    return sample, model, params, weights


def nonresp_positions(sample):
    return [i for i, u in enumerate(sample.units) if not u.responded]


def test_pel_mean_oracle():
    sample, model, params, weights = toy_fitted()
    imp = impute_pel_mean(sample, model, params, weights)
    pos = nonresp_positions(sample)
    assert len(pos) == 1
    assert imp.values[pos[0]] == pytest.approx(PEL_MEAN_ORACLE, abs=1e-14)
    assert imp.method == "pel_mean"
    assert imp.params_used == params


def test_pel_random_draws_with_likelihood_weights():
    """Donor frequencies match p_hat * f2 over many seeds."""
    sample, model, params, weights = toy_fitted()
    probs = np.array([
        1.0 / (5 - 2.5 * 0.21) * 0.21,
        1.0 / (5 - 2.5 * 0.22) * 0.22,
        2.0 / (5 - 2.5 * 0.24) * 0.24,
    ])
    probs /= probs.sum()
    pos = nonresp_positions(sample)[0]
    counts = {1.0: 0, 2.0: 0, 4.0: 0}
    n = 4000
    for seed in range(n):
        imp = impute_pel_random(sample, model, params, weights, seed)
        counts[float(imp.values[pos])] += 1
    freq = np.array([counts[1.0], counts[2.0], counts[4.0]]) / n
    np.testing.assert_allclose(freq, probs, atol=4 * np.sqrt(probs * (1 - probs) / n).max())


def test_random_mean_agreement_over_seeds():
    """Seed-averaged random imputation converges on the mean imputation."""
    sample, model, params, weights = toy_fitted()
    mean_value = impute_pel_mean(sample, model, params, weights).values[
        nonresp_positions(sample)[0]
    ]
    n = 2000
    draws = np.empty(n)
    for seed in range(n):
        imp = impute_pel_random(sample, model, params, weights, seed)
        draws[seed] = imp.values[nonresp_positions(sample)[0]]
    mcse = draws.std(ddof=1) / np.sqrt(n)
    assert abs(draws.mean() - mean_value) < 4 * mcse


def test_simple_mean_fills_cell_respondent_means():
    cats = CategorySpace(("1", "2"))
    strata = make_strata((50, 50))
    units = (
        SampleUnit(1, 0.1, 1, 2.0),
        SampleUnit(1, 0.3, 1, 4.0),
        SampleUnit(1, 0.1, 1, None),
        SampleUnit(1, 0.2, 2, 8.0),
        SampleUnit(2, 0.1, 1, 5.0),
        SampleUnit(2, 0.1, 1, None),
    )
    sample = StratifiedSample(cats, strata, units)
    imp = impute_simple_mean(sample)
    # weighted cell means: (0.1*2 + 0.3*4) / 0.4 = 3.5 and 5.0
    assert imp.values[2] == pytest.approx(3.5)
    assert imp.values[5] == pytest.approx(5.0)
    np.testing.assert_array_equal(imp.imputed_mask, [0, 0, 1, 0, 0, 1])


def test_simple_random_frequencies():
    """Cell donors are drawn proportional to their survey weights."""
    cats = CategorySpace(("1",))
    strata = make_strata((50,))
    units = (
        SampleUnit(1, 0.1, 1, 1.0),
        SampleUnit(1, 0.3, 1, 2.0),
        SampleUnit(1, 0.6, 1, 3.0),
        SampleUnit(1, 0.2, 1, None),
    )
    sample = StratifiedSample(cats, strata, units)
    probs = np.array([0.1, 0.3, 0.6])
    n = 4000
    counts = {1.0: 0, 2.0: 0, 3.0: 0}
    for seed in range(n):
        counts[float(impute_simple_random(sample, seed).values[3])] += 1
    freq = np.array([counts[1.0], counts[2.0], counts[3.0]]) / n
    np.testing.assert_allclose(freq, probs, atol=4 * np.sqrt(probs * (1 - probs) / n).max())


@given(st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_respondents_never_touched(seed):
    sample = build_sample(seed, n_by_stratum=(12, 14), s=3)
    model = ProportionalOddsModel(3)
    try:
        params, weights = fit_mpele(sample, model)
        imps = [
            impute_simple_mean(sample),
            impute_simple_random(sample, seed),
            impute_pel_mean(sample, model, params, weights),
            impute_pel_random(sample, model, params, weights, seed),
        ]
    except (EmptyRespondentCell, ZeroMassError):
        return  # sparse draw; failure modes have their own tests
    resp = np.array([u.responded for u in sample.units])
    observed = np.array([u.y if u.responded else np.nan for u in sample.units])
    for imp in imps:
        assert isinstance(imp, ImputedSample)
        np.testing.assert_array_equal(imp.imputed_mask, ~resp)
        np.testing.assert_array_equal(imp.values[resp], observed[resp])
        assert np.isfinite(imp.values).all()


def test_random_imputation_deterministic_in_seed():
    sample, model, params, weights = toy_fitted()
    a = impute_pel_random(sample, model, params, weights, 42)
    b = impute_pel_random(sample, model, params, weights, 42)
    np.testing.assert_array_equal(a.values, b.values)
    assert a.rng_seed == 42
    big = build_sample(9, n_by_stratum=(25, 25), s=3)
    x = impute_simple_random(big, 7).values
    y = impute_simple_random(big, 7).values
    z = impute_simple_random(big, 8).values
    np.testing.assert_array_equal(x, y)
    assert not np.array_equal(x, z)


def test_draws_keyed_by_unit_not_by_count():
    """Adding a nonrespondent elsewhere never changes an existing draw.

    Draw uniforms are keyed to the unit's slot in the stratum, and a new
    nonrespondent in a later cell lands after it in canonical order, so
    the original unit sees the same stream either way.
    """
    cats = CategorySpace(("1", "2"))
    strata = make_strata((50,))
    base_units = [
        SampleUnit(1, 0.2, 1, 1.0),
        SampleUnit(1, 0.2, 1, 5.0),
        SampleUnit(1, 0.2, 1, None),
        SampleUnit(1, 0.2, 2, 7.0),
    ]
    a = StratifiedSample(cats, strata, tuple(base_units))
    b = StratifiedSample(cats, strata, tuple(base_units + [SampleUnit(1, 0.2, 2, None)]))
    for seed in range(40):
        va = impute_simple_random(a, seed).values[2]
        vb = impute_simple_random(b, seed).values[2]
        assert va == vb


def test_simple_methods_raise_on_empty_cell():
    cats = CategorySpace(("1", "2"))
    strata = make_strata((50,))
    units = (
        SampleUnit(1, 0.5, 1, 1.0),
        SampleUnit(1, 0.5, 2, None),
    )
    sample = StratifiedSample(cats, strata, units)
    with pytest.raises(EmptyRespondentCell):
        impute_simple_mean(sample)
    with pytest.raises(EmptyRespondentCell):
        impute_simple_random(sample, 0)
    # the likelihood family borrows across the stratum and still works
    model = TwoCellAffine()
    params = ModelParams((0.2,))
    weights = pel_masses(sample, model, params)
    imp = impute_pel_mean(sample, model, params, weights)
    assert imp.values[1] == pytest.approx(1.0)  # only one possible donor


def test_pel_methods_raise_on_zero_mass():
    """A category carrying no model probability cannot be imputed."""

    class FirstCellOnly(CategoryModel):
        n_categories = 2
        param_dim = 1

        def prob_matrix(self, h, y, beta):
            y = np.asarray(y)
            return np.column_stack([np.ones(y.size), np.zeros(y.size)])

    cats = CategorySpace(("1", "2"))
    strata = make_strata((50,))
    units = (
        SampleUnit(1, 0.5, 1, 1.0),
        SampleUnit(1, 0.5, 2, None),
    )
    sample = StratifiedSample(cats, strata, units)
    model = FirstCellOnly()
    params = ModelParams((0.0,))
    weights = pel_masses(sample, model, params)
    with pytest.raises(ZeroMassError):
        impute_pel_mean(sample, model, params, weights)
    with pytest.raises(ZeroMassError):
        impute_pel_random(sample, model, params, weights, 0)


def test_post_imputation_estimates():
    cats = CategorySpace(("1", "2"))
    strata = make_strata((50, 50))
    units = (
        SampleUnit(1, 0.25, 1, 2.0),
        SampleUnit(1, 0.25, 1, None),
        SampleUnit(2, 0.25, 2, 6.0),
        SampleUnit(2, 0.25, 2, 10.0),
    )
    sample = StratifiedSample(cats, strata, units)
    imp = impute_simple_mean(sample)
    y_i, per = post_imputation_estimates(imp)
    # nonrespondent takes the cell mean 2.0; weights sum to 1
    assert y_i == pytest.approx(0.25 * (2 + 2 + 6 + 10))
    np.testing.assert_allclose(per, [2.0, 8.0])


def test_post_imputation_rejects_absent_category():
    cats = CategorySpace(("1", "2", "3"))
    strata = make_strata((50,))
    units = (
        SampleUnit(1, 0.5, 1, 2.0),
        SampleUnit(1, 0.5, 2, 4.0),
    )
    sample = StratifiedSample(cats, strata, units)
    imp = impute_simple_mean(sample)
    with pytest.raises(ZeroMassError):
        post_imputation_estimates(imp)
